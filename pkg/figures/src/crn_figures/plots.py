"""Figure builders for the four output kinds.

``make_figure`` returns a matplotlib Figure for inspection or testing;
``render`` writes it as both SVG and PNG.  Rendering is deterministic
for fixed inputs (fixed hash salt, no embedded timestamps).
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "crn-figures"

import matplotlib.pyplot as plt
import numpy as np

from .io import (
    SCAN_METRICS,
    FigureError,
    load_ensemble,
    load_profile,
    load_scan,
    load_trajectory,
)

__all__ = ["CI_THRESHOLD", "FigureError", "make_figure", "render"]

CI_THRESHOLD = 1.9207  # chi-square 95% cutoff for one profiled parameter

KINDS = ("profile", "ensemble", "trajectories", "scan")


def make_figure(kind, inputs, truth=None):
    """Build the figure for ``kind`` from the given input files.

    ``inputs`` is a list of paths: the kind's CSV first, then optional
    companions (profile: JSON sidecar; trajectories: noisy-data CSV).
    ``truth`` optionally marks the ground-truth parameter value on
    profile plots.
    """
    if kind not in KINDS:
        raise FigureError(f"unknown figure kind '{kind}'")
    if not inputs:
        raise FigureError("no input files given")
    return _BUILDERS[kind](list(inputs), truth)


def _profile_figure(inputs, truth):
    sidecar = inputs[1] if len(inputs) > 1 else None
    data = load_profile(inputs[0], sidecar)
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ok = data.reliable
    ax.plot(data.values[ok], data.shifted_loss[ok], "o-", color="tab:blue",
            markersize=3, label="profile")
    if np.any(~ok):
        ax.plot(data.values[~ok], data.shifted_loss[~ok], "x",
                color="tab:red", label="unreliable refit")
    ax.axhline(CI_THRESHOLD, linestyle="--", color="black", linewidth=1,
               label=f"95% threshold ({CI_THRESHOLD:g})")
    if truth is not None:
        ax.axvline(truth, linestyle="--", color="tab:green", linewidth=1,
                   label="ground truth")
    if data.ci and not (data.ci.get("lo_open") or data.ci.get("hi_open")):
        ax.axvspan(data.ci["lo"], data.ci["hi"], color="tab:blue", alpha=0.12,
                   label="95% CI")
    finite = data.shifted_loss[ok & np.isfinite(data.shifted_loss)]
    if finite.size:
        top = max(3.0 * CI_THRESHOLD, float(np.percentile(finite, 90)))
        ax.set_ylim(-0.1 * CI_THRESHOLD, top)
    ax.set_xscale("log")
    ax.set_xlabel(data.param or "parameter value")
    ax.set_ylabel("shifted profile loss")
    ax.legend(fontsize=7)
    fig.tight_layout()
    return fig


def _ensemble_figure(inputs, truth):
    data = load_ensemble(inputs[0])
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for curve in data.curves:
        ax.plot(data.support, curve, color="tab:blue", alpha=0.4,
                linewidth=1)
    ax.plot([], [], color="tab:blue", alpha=0.6, linewidth=1,
            label=f"accepted fits (n={data.curves.shape[0]})")
    if data.truth is not None:
        ax.plot(data.support, data.truth, "--", color="black", linewidth=1.5,
                label="ground truth")
    ax.set_xlabel("input species value")
    ax.set_ylabel("learned rate")
    ax.legend(fontsize=7)
    fig.tight_layout()
    return fig


def _trajectories_figure(inputs, truth):
    traj = load_trajectory(inputs[0])
    data = load_trajectory(inputs[1]) if len(inputs) > 1 else None
    fig, ax = plt.subplots(figsize=(5, 3.5))
    colors = plt.cm.tab10.colors
    for i, name in enumerate(traj.species):
        ax.plot(traj.times, traj.states[:, i], color=colors[i % 10],
                label=name)
    if data is not None:
        for i, name in enumerate(data.species):
            j = traj.species.index(name) if name in traj.species else i
            ax.plot(data.times, data.states[:, i], "o", markersize=3,
                    color=colors[j % 10], label=f"{name} data")
    ax.set_xlabel("t")
    ax.set_ylabel("species value")
    ax.legend(fontsize=7)
    fig.tight_layout()
    return fig


def _scan_figure(inputs, truth):
    data = load_scan(inputs[0])
    nrows = len(data.variants)
    fig, axes = plt.subplots(nrows, len(SCAN_METRICS),
                             figsize=(3.2 * len(SCAN_METRICS), 2.6 * nrows),
                             squeeze=False)
    for r, kind in enumerate(data.variants):
        for c, metric in enumerate(SCAN_METRICS):
            ax = axes[r][c]
            grid = data.metrics[metric][kind]
            finite = grid[np.isfinite(grid)]
            shown = np.where(np.isfinite(grid), grid,
                             finite.max() if finite.size else 1.0)
            im = ax.imshow(shown, aspect="auto", cmap="viridis")
            ax.set_xticks(range(len(data.n)), [str(v) for v in data.n],
                          fontsize=7)
            ax.set_yticks(range(len(data.sigma)), [str(v) for v in data.sigma],
                          fontsize=7)
            if r == nrows - 1:
                ax.set_xlabel("N samples", fontsize=8)
            if c == 0:
                ax.set_ylabel(f"{kind}\nsigma", fontsize=8)
            ax.set_title(metric, fontsize=8)
            fig.colorbar(im, ax=ax, shrink=0.8)
    fig.tight_layout()
    return fig


_BUILDERS = {
    "profile": _profile_figure,
    "ensemble": _ensemble_figure,
    "trajectories": _trajectories_figure,
    "scan": _scan_figure,
}


def render(kind, inputs, out_dir, truth=None, stem=None):
    """Write ``<stem>.svg`` and ``<stem>.png`` for the kind; returns paths."""
    fig = make_figure(kind, inputs, truth)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = stem or f"{Path(inputs[0]).stem}_{kind}"
    paths = []
    for ext in ("svg", "png"):
        path = out_dir / f"{stem}.{ext}"
        fig.savefig(path, format=ext, dpi=150, metadata=_no_dates(ext))
        paths.append(path)
    plt.close(fig)
    return paths


def _no_dates(ext):
    # strip per-run timestamps so identical inputs give identical bytes
    return {"Date": None} if ext == "svg" else None
