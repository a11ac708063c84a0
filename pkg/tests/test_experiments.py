"""Experiment orchestration glue."""

import numpy as np
import pytest

from crn_ude import zoo
from crn_ude.experiments import (
    data_seed,
    ensemble_variant,
    fit_variant,
    make_dataset,
    prediction_error_variant,
    profile_grid,
)


def test_data_seed_is_a_pure_function():
    assert data_seed(0, 21, 0.05) == data_seed(0, 21, 0.05)
    seeds = {
        data_seed(0, 21, 0.05),
        data_seed(1, 21, 0.05),
        data_seed(0, 31, 0.05),
        data_seed(0, 21, 0.1),
    }
    assert len(seeds) == 4


def test_make_dataset_defaults_come_from_bundle():
    bundle = zoo.builtin("simple_sa")
    data = make_dataset(bundle, seed=0)
    assert data.species == ("X",)
    assert len(data.times) == 21
    assert data.sigma == 0.05
    assert data.model_id == "simple_sa"


def test_make_dataset_overrides():
    bundle = zoo.builtin("simple_sa")
    data = make_dataset(bundle, n=11, sigma=0.2, seed=0)
    assert len(data.times) == 11
    assert data.sigma == 0.2


def test_profile_grid_uses_bundle_range():
    bundle = zoo.builtin("simple_sa")
    grid = profile_grid(bundle, "d", 0.4, points=10)
    assert grid[0] == pytest.approx(0.05)
    assert grid[-1] == pytest.approx(1.5)
    # an unconfigured parameter scans one decade around the estimate
    grid = profile_grid(bundle, "v", 0.4, points=10)
    assert grid[0] == pytest.approx(0.04)
    assert grid[-1] == pytest.approx(4.0)


@pytest.fixture(scope="module")
def quick_fit():
    bundle = zoo.builtin("simple_sa")
    data = make_dataset(bundle, seed=0)
    problem, objective, ensemble = fit_variant(
        bundle, "known", data, seed=0, n_starts=5, adam_iters=200
    )
    return bundle, data, problem, objective, ensemble


def test_fit_variant_threshold_is_ground_truth_loss(quick_fit):
    bundle, data, problem, objective, ensemble = quick_fit
    from crn_ude.likelihood import ground_truth_loss

    assert problem.threshold == pytest.approx(ground_truth_loss(bundle, data))
    assert ensemble.threshold == problem.threshold


def test_ensemble_variant_carries_truth_overlay(quick_fit):
    bundle, data, problem, objective, ensemble = quick_fit
    er = ensemble_variant(bundle, "known", ensemble, n_grid=40)
    assert er.truth is not None
    assert er.values.shape[1] == 40


def test_prediction_error_zero_when_everything_measured(quick_fit):
    bundle, data, problem, objective, ensemble = quick_fit
    # simple_sa has a single species, which the dataset measures
    assert prediction_error_variant(bundle, "known", ensemble.best, ("X",)) == 0.0
