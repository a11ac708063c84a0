"""Differentiable fitting objective and its gradient contract."""

import numpy as np
import pytest

from crn_ude import zoo
from crn_ude.experiments import make_dataset
from crn_ude.objective import (
    GradientError,
    Objective,
    PinnedObjective,
    loss_gradient,
)


def build(model_id, kind, seed=0):
    bundle = zoo.builtin(model_id)
    data = make_dataset(bundle, seed=seed)
    problem = bundle.make_problem(kind, data)
    return bundle, problem, Objective(problem)


def central_fd(objective, working, h=1e-5):
    g = np.empty_like(working)
    for i in range(len(working)):
        e = np.zeros_like(working)
        e[i] = h
        fp = objective.value(working + e)
        fm = objective.value(working - e)
        g[i] = (fp - fm) / (2 * h)
    return g


class TestGradient:
    @pytest.mark.parametrize(
        "model_id,kind",
        [("simple_sa", "parameterised"), ("simple_sa", "ude"), ("extended_sa", "parameterised")],
    )
    def test_matches_central_differences(self, model_id, kind, rng):
        bundle, problem, objective = build(model_id, kind)
        for _ in range(2):
            model = np.concatenate(
                [
                    rng.uniform(0.3, 2.0, problem.n_mechanistic()),
                    rng.normal(
                        scale=0.5, size=problem.n_params() - problem.n_mechanistic()
                    ),
                ]
            )
            working = problem.to_working(model)
            value, grad = objective.value_and_grad(working)
            assert np.isfinite(value)
            fd = central_fd(objective, working)
            scale = np.maximum(np.abs(fd), 1.0)
            np.testing.assert_allclose(grad / scale, fd / scale, atol=1e-3)

    def test_loss_value_matches_direct_nll(self):
        from crn_ude.likelihood import gaussian_nll

        bundle, problem, objective = build("simple_sa", "parameterised")
        model = bundle.truth_vector()
        got = objective.value(problem.to_working(model))
        want = float(gaussian_nll(problem.predictions(model), problem.dataset))
        assert got == pytest.approx(want, rel=1e-4)

    def test_loss_gradient_raises_on_divergence(self):
        bundle, problem, objective = build("simple_sa", "parameterised")
        # absurd parameters blow up the simulation
        working = problem.to_working(np.array([1e8, 1e-6, 50.0, 1e-8]))
        if np.isfinite(objective.value(working)):
            pytest.skip("parameters unexpectedly integrable")
        with pytest.raises(GradientError):
            loss_gradient(objective, working)


class TestBoundsPenalty:
    def test_quadratic_penalty_outside_bounds(self):
        bundle = zoo.builtin("simple_sa")
        data = make_dataset(bundle, seed=0)
        free = bundle.make_problem("known", data)
        boxed = bundle.make_problem("known", data)
        boxed.bounds = {"d": (0.4, 0.6)}
        inside = np.log(np.array([0.5]))
        outside = np.log(np.array([0.8]))
        assert Objective(boxed).value(inside) == pytest.approx(
            Objective(free).value(inside), rel=1e-9
        )
        excess = Objective(boxed).value(outside) - Objective(free).value(outside)
        assert excess == pytest.approx(1e6 * 0.2**2, rel=1e-6)


class TestPinned:
    def test_embed_reduce_round_trip(self):
        bundle, problem, objective = build("simple_sa", "parameterised")
        pinned = PinnedObjective(objective, 3, np.log(0.5))
        full = np.log(np.array([0.6, 0.3, 3.0, 0.5]))
        reduced = pinned.reduce(full)
        assert len(reduced) == 3
        np.testing.assert_allclose(pinned.embed(reduced), full, rtol=1e-15)

    def test_value_matches_full_objective(self):
        bundle, problem, objective = build("simple_sa", "parameterised")
        pinned = PinnedObjective(objective, 3, np.log(0.5))
        reduced = np.log(np.array([0.6, 0.3, 3.0]))
        full = np.log(np.array([0.6, 0.3, 3.0, 0.5]))
        assert pinned.value(reduced) == pytest.approx(objective.value(full), rel=1e-12)

    def test_gradient_drops_pinned_coordinate(self):
        bundle, problem, objective = build("simple_sa", "parameterised")
        pinned = PinnedObjective(objective, 1, np.log(0.3))
        reduced = np.log(np.array([0.6, 3.0, 0.5]))
        v, g = pinned.value_and_grad(reduced)
        vf, gf = objective.value_and_grad(pinned.embed(reduced))
        assert v == vf
        np.testing.assert_array_equal(g, np.delete(gf, 1))

    def test_pin_index_validated(self):
        bundle, problem, objective = build("simple_sa", "parameterised")
        with pytest.raises(IndexError):
            PinnedObjective(objective, 99, 0.0)
