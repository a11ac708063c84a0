"""End-to-end experiment orchestration over zoo bundles.

Thin glue used by the CLI and the acceptance suite: generate data, fit a
variant, profile its designated parameter, build function ensembles, and
evaluate scan cells.  All randomness flows from one seed through named
substreams (data, starts, profile restarts).
"""

from __future__ import annotations

import numpy as np

from .fitting import multistart_fit
from .identifiability import (
    ScanCell,
    ci_width,
    function_ensemble,
    prediction_error,
    profile_likelihood,
)
from .integrate import IntegrationError
from .likelihood import generate_dataset, ground_truth_loss
from .objective import Objective

__all__ = [
    "data_seed",
    "make_dataset",
    "fit_variant",
    "profile_variant",
    "ensemble_variant",
    "prediction_error_variant",
    "run_scan_cell",
]


def data_seed(seed, n, sigma):
    ss = np.random.SeedSequence([seed, 100, int(n), int(round(sigma * 1e9))])
    return int(ss.generate_state(1, np.uint64)[0])


def make_dataset(bundle, n=None, sigma=None, measured=None, seed=0):
    n = n or bundle.n_default
    sigma = sigma if sigma is not None else bundle.sigma_default
    measured = tuple(measured or bundle.measured_default)
    return generate_dataset(bundle, n, sigma, measured, data_seed(seed, n, sigma))


def fit_variant(bundle, kind, dataset, seed=0, jobs=1, objective=None, **overrides):
    """Multistart fit of one variant; returns (problem, objective, ensemble)."""
    cfg = bundle.fit_defaults(kind)
    cfg.update(overrides)
    threshold = ground_truth_loss(bundle, dataset)
    problem = bundle.make_problem(kind, dataset, threshold=threshold)
    objective = objective or Objective(problem)
    ensemble = multistart_fit(
        problem,
        n_starts=cfg["n_starts"],
        adam_iters=cfg["adam_iters"],
        lr=cfg["lr"],
        seed=seed,
        start_bounds=bundle.start_bounds,
        jobs=jobs,
        objective=objective,
        theta_scale=cfg.get("theta_scale", 1.0),
    )
    return problem, objective, ensemble


def profile_grid(bundle, param, mle_value, points=25):
    """Geometric grid over the bundle's configured range (or +-1 decade)."""
    if param in bundle.profile_range:
        lo, hi = bundle.profile_range[param]
    else:
        lo, hi = mle_value / 10.0, mle_value * 10.0
    return np.geomspace(lo, hi, points)


def profile_variant(bundle, kind, problem, objective, mle, param=None,
                    seed=0, points=25, **overrides):
    cfg = bundle.fit_defaults(kind)
    cfg.update(overrides)
    param = param or bundle.profile_param
    index = problem.network.parameters.index(param)
    grid = profile_grid(bundle, param, float(mle.model[index]), points)
    return profile_likelihood(
        problem,
        mle,
        param,
        grid=grid,
        restarts=cfg["restarts"],
        refit_adam_iters=cfg["refit_adam_iters"],
        lr=cfg["lr"],
        seed=seed,
        start_bounds=bundle.start_bounds,
        objective=objective,
        theta_scale=cfg.get("theta_scale", 1.0),
    )


def ensemble_variant(bundle, kind, ensemble, n_grid=200):
    traj = bundle.simulate_truth()
    species_index = bundle.truth_network.species_index(bundle.slot_species)
    return function_ensemble(
        ensemble,
        lambda fit: bundle.slot_rate(kind, fit.model),
        traj,
        species_index,
        n_grid=n_grid,
        truth_rate=bundle.truth_slot_rate(),
    )


def prediction_error_variant(bundle, kind, fit, measured):
    net = bundle.network(kind)
    unmeasured = [s.index for s in net.species if s.name not in measured]
    if not unmeasured:
        return 0.0
    truth_traj = bundle.simulate_truth()
    problem_net = net
    from .network import assemble_rhs
    from .integrate import integrate

    try:
        fit_traj = integrate(
            assemble_rhs(problem_net), bundle.u0(kind), bundle.tspan, fit.model
        )
    except IntegrationError:
        return float(np.inf)
    return prediction_error(fit_traj, truth_traj, unmeasured, bundle.tspan)


def run_scan_cell(bundle, kind, n, sigma, seed, overrides) -> ScanCell:
    dataset = make_dataset(bundle, n=n, sigma=sigma, seed=seed)
    problem, objective, ensemble = fit_variant(
        bundle, kind, dataset, seed=seed, **overrides
    )
    if not ensemble.accepted:
        return ScanCell(n, sigma, kind, np.inf, True, np.inf, np.inf, failed=True)
    mle = ensemble.best
    prof = profile_variant(bundle, kind, problem, objective, mle, seed=seed,
                           **{k: v for k, v in overrides.items()
                              if k in ("restarts", "refit_adam_iters", "lr",
                                       "theta_scale")})
    width, open_flag = ci_width(prof)
    if kind == "known":
        ml2 = 0.0  # the slot is fixed, the ensemble has zero spread by definition
    else:
        ml2 = ensemble_variant(bundle, kind, ensemble).mean_l2
    perr = prediction_error_variant(bundle, kind, mle, dataset.species)
    return ScanCell(n, sigma, kind, float(width), bool(open_flag), float(ml2),
                    float(perr))
