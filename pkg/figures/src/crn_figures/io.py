"""Loaders for the crn-ude output file schemas.

Each loader validates the header it expects and raises ``FigureError``
on mismatch, so a wrong ``--kind``/file pairing fails with a clear
message instead of a confusing plot.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class FigureError(ValueError):
    """Input file does not match the schema the figure kind expects."""


def _read_csv(path):
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise FigureError(f"cannot read '{path}': {exc}") from exc
    if len(rows) < 2:
        raise FigureError(f"'{path}' has no data rows")
    return rows[0], rows[1:]


def _columns(path, header, rows):
    try:
        return np.array([[float(v) for v in row] for row in rows])
    except ValueError as exc:
        raise FigureError(f"'{path}': non-numeric cell ({exc})") from exc


@dataclass
class ProfileData:
    values: np.ndarray
    shifted_loss: np.ndarray
    reliable: np.ndarray
    param: str | None = None
    ci: dict | None = None
    mle_value: float | None = None
    truth: float | None = None


def load_profile(csv_path, sidecar_path=None) -> ProfileData:
    header, rows = _read_csv(csv_path)
    if header != ["param_value", "shifted_loss", "reliable_flag"]:
        raise FigureError(
            f"'{csv_path}' is not a likelihood profile (header {header})"
        )
    data = _columns(csv_path, header, rows)
    out = ProfileData(
        values=data[:, 0],
        shifted_loss=data[:, 1],
        reliable=data[:, 2].astype(bool),
    )
    if sidecar_path is not None:
        meta = _load_json(sidecar_path)
        out.param = meta.get("param")
        out.ci = meta.get("ci")
        out.mle_value = meta.get("mle_value")
    return out


@dataclass
class EnsembleData:
    support: np.ndarray
    curves: np.ndarray  # (n fits, len(support))
    truth: np.ndarray | None


def load_ensemble(csv_path) -> EnsembleData:
    header, rows = _read_csv(csv_path)
    if header[0] != "support_x" or not any(c.startswith("fit_") for c in header):
        raise FigureError(
            f"'{csv_path}' is not an ensemble table (header {header})"
        )
    data = _columns(csv_path, header, rows)
    has_truth = header[-1] == "ground_truth"
    last_fit = len(header) - (1 if has_truth else 0)
    return EnsembleData(
        support=data[:, 0],
        curves=data[:, 1:last_fit].T,
        truth=data[:, -1] if has_truth else None,
    )


@dataclass
class TrajectoryData:
    times: np.ndarray
    species: list
    states: np.ndarray  # (len(times), len(species))


def load_trajectory(csv_path) -> TrajectoryData:
    header, rows = _read_csv(csv_path)
    if header[0] != "t" or len(header) < 2:
        raise FigureError(
            f"'{csv_path}' is not a trajectory/data table (header {header})"
        )
    data = _columns(csv_path, header, rows)
    return TrajectoryData(times=data[:, 0], species=header[1:],
                          states=data[:, 1:])


@dataclass
class ScanData:
    n: np.ndarray
    sigma: np.ndarray
    variants: list
    metrics: dict  # metric name -> {variant: (len(n)*len(sigma),) grid}


SCAN_METRICS = ("ci_width", "mean_l2", "pred_error")


def load_scan(csv_path) -> ScanData:
    header, rows = _read_csv(csv_path)
    want = ["N", "sigma", "variant", "ci_width", "ci_open", "mean_l2",
            "pred_error"]
    if header != want:
        raise FigureError(f"'{csv_path}' is not a scan table (header {header})")
    ns, sigmas, variants = [], [], []
    cells = []
    for row in rows:
        n, sigma, kind = int(row[0]), float(row[1]), row[2]
        if n not in ns:
            ns.append(n)
        if sigma not in sigmas:
            sigmas.append(sigma)
        if kind not in variants:
            variants.append(kind)
        cells.append((n, sigma, kind, [float(v) for v in (row[3], row[5], row[6])]))
    metrics = {
        m: {k: np.full((len(sigmas), len(ns)), np.nan) for k in variants}
        for m in SCAN_METRICS
    }
    for n, sigma, kind, vals in cells:
        i, j = sigmas.index(sigma), ns.index(n)
        for m, v in zip(SCAN_METRICS, vals):
            metrics[m][kind][i, j] = v
    return ScanData(n=np.array(ns), sigma=np.array(sigmas),
                    variants=variants, metrics=metrics)


def _load_json(path):
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise FigureError(f"cannot parse '{path}': {exc}") from exc
