"""Multistart maximum-likelihood fitting.

Each start draws mechanistic parameters from a Latin hypercube in log
space and neural parameters from the seeded initializer, runs Adam, then
polishes with L-BFGS.  Runs whose final loss reaches the ground-truth
loss threshold are accepted; without a threshold (real data) the top
decile by loss is kept.
"""

from __future__ import annotations

import io
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .likelihood import FitProblem
from .neural import init_params
from .objective import Objective
from .optimizers import latin_hypercube, minimize_adam, minimize_lbfgs

__all__ = ["DEFAULT_START_RANGE", "FitResult", "FitEnsemble", "multistart_fit"]

# default per-parameter multistart range, model scale
DEFAULT_START_RANGE = (1e-2, 1e2)


@dataclass
class FitResult:
    working: np.ndarray
    model: np.ndarray
    loss: float
    adam_iters: int
    lbfgs_iters: int
    converged: bool
    start_index: int
    lbfgs_status: str = ""

    def to_dict(self):
        return {
            "seed": self.start_index,
            "loss": self.loss,
            "converged": self.converged,
            "params_model_scale": self.model.tolist(),
            "adam_iters": self.adam_iters,
            "lbfgs_iters": self.lbfgs_iters,
        }


@dataclass
class FitEnsemble:
    results: list  # FitResult, sorted by loss
    threshold: float | None
    accepted: list  # indices into results
    config: dict = field(default_factory=dict)

    @property
    def best(self) -> FitResult:
        return self.results[0]

    def accepted_results(self):
        return [self.results[i] for i in self.accepted]

    def to_json(self) -> str:
        return json.dumps(
            {
                "config": self.config,
                "threshold": self.threshold,
                "accepted": self.accepted,
                "runs": [r.to_dict() for r in self.results],
            },
            indent=2,
        )

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("start,loss,converged,adam_iters,lbfgs_iters\n")
        for r in self.results:
            buf.write(
                f"{r.start_index},{r.loss!r},{int(r.converged)},"
                f"{r.adam_iters},{r.lbfgs_iters}\n"
            )
        return buf.getvalue()


def _theta_scale_draw(theta_scale, rng):
    """A per-start neural weight scale; scalar or log-uniform (lo, hi)."""
    if np.isscalar(theta_scale):
        return float(theta_scale)
    lo, hi = theta_scale
    return float(np.exp(rng.uniform(np.log(lo), np.log(hi))))


def _start_vectors(problem: FitProblem, n_starts, seed, start_bounds,
                   theta_scale=1.0):
    net = problem.network
    names = net.parameters
    bounds = []
    for name in names:
        lo, hi = (start_bounds or {}).get(name, DEFAULT_START_RANGE)
        bounds.append((np.log(lo), np.log(hi)))
    lhs_seed = np.random.SeedSequence([seed, 0])
    mech = (
        latin_hypercube(np.asarray(bounds), n_starts, lhs_seed)
        if names
        else np.zeros((n_starts, 0))
    )
    scale_rng = np.random.default_rng(np.random.SeedSequence([seed, 2]))
    starts = []
    for i in range(n_starts):
        blocks = [mech[i]]
        scale = _theta_scale_draw(theta_scale, scale_rng)
        for j, slot in enumerate(net.neural_order):
            blocks.append(
                scale
                * init_params(net.neural[slot], np.random.SeedSequence([seed, 1, i, j]))
            )
        starts.append(np.concatenate(blocks))
    return starts


def _run_one(objective, start, i, adam_iters, lr, lbfgs_max_iters):
    x = minimize_adam(objective.value_and_grad, start, iters=adam_iters, lr=lr)
    res = minimize_lbfgs(objective.value_and_grad, x, max_iters=lbfgs_max_iters)
    loss = res.loss
    if not np.isfinite(loss):
        loss = objective.value(x)
        res.x = x
    return FitResult(
        working=res.x,
        model=np.asarray(objective.problem.to_model(res.x)),
        loss=float(loss),
        adam_iters=adam_iters,
        lbfgs_iters=res.n_iters,
        converged=False,  # filled in against the threshold below
        start_index=i,
        lbfgs_status=res.status,
    )


def multistart_fit(problem: FitProblem, n_starts, adam_iters=2000, seed=0,
                   lr=1e-2, start_bounds=None, lbfgs_max_iters=5000,
                   jobs=1, objective=None, extra_starts=None,
                   theta_scale=1.0) -> FitEnsemble:
    """Run ``n_starts`` independent Adam+LBFGS fits and filter by loss.

    ``extra_starts`` (working-scale vectors) are appended to the design;
    profile refits use this for warm starts.  ``theta_scale`` scales the
    neural blocks of the start vectors: either one factor, or a
    ``(lo, hi)`` range drawn log-uniformly per start.  Models whose slot
    inputs are large (e.g. population counts) diverge from full-size
    random weights, so mixing in small-weight starts keeps the design
    diverse without losing the standard initialization.  Deterministic
    per seed; with ``jobs > 1`` the result set is the same, computed
    concurrently.
    """
    if n_starts < 1 and not extra_starts:
        raise ValueError("need at least one start")
    objective = objective or Objective(problem)
    starts = _start_vectors(problem, n_starts, seed, start_bounds, theta_scale)
    if extra_starts is not None:
        starts = starts + [np.asarray(s, dtype=float) for s in extra_starts]

    def run(i_start):
        i, start = i_start
        return _run_one(objective, start, i, adam_iters, lr, lbfgs_max_iters)

    tasks = list(enumerate(starts))
    if jobs and jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(run, tasks))
    else:
        results = [run(t) for t in tasks]

    results.sort(key=lambda r: (not np.isfinite(r.loss), r.loss))
    threshold = problem.threshold
    if threshold is not None:
        accepted = [i for i, r in enumerate(results) if r.loss <= threshold]
    else:
        k = max(1, len(results) // 10)
        accepted = [i for i in range(k) if np.isfinite(results[i].loss)]
    for i, r in enumerate(results):
        r.converged = i in accepted
    return FitEnsemble(
        results=results,
        threshold=threshold,
        accepted=accepted,
        config={
            "n_starts": n_starts,
            "adam_iters": adam_iters,
            "lr": lr,
            "seed": seed,
            "lbfgs_max_iters": lbfgs_max_iters,
        },
    )
