"""Profiles, confidence intervals, ensembles, and structural checks."""

import numpy as np
import pytest

from crn_ude import zoo
from crn_ude.experiments import (
    fit_variant,
    make_dataset,
    profile_variant,
)
from crn_ude.identifiability import (
    ConfidenceInterval,
    EnsembleResult,
    LikelihoodProfile,
    ScanCell,
    ScanResult,
    ci_width,
    confidence_interval,
    function_ensemble,
    mean_l2_distance,
    prediction_error,
    structural_nonident_check,
)


def quadratic_profile(center=0.5, scale=0.1, lo=0.0, hi=1.0, n=401):
    grid = np.linspace(lo, hi, n)
    shifted = 0.5 * ((grid - center) / scale) ** 2
    return LikelihoodProfile(
        param="d",
        grid=grid,
        shifted_loss=shifted,
        mle_loss=-10.0,
        mle_value=center,
        reliable=np.ones(n, dtype=bool),
    )


class TestConfidenceInterval:
    def test_threshold_value(self):
        ci = confidence_interval(quadratic_profile())
        assert ci.threshold == pytest.approx(1.9207, abs=5e-5)

    def test_quadratic_interval_by_hand(self):
        # 0.5 z^2 = 1.9207  =>  z = 1.96, so the CI is center +- 1.96*scale
        ci = confidence_interval(quadratic_profile(center=0.5, scale=0.1))
        assert ci.lo == pytest.approx(0.5 - 0.196, abs=1e-3)
        assert ci.hi == pytest.approx(0.5 + 0.196, abs=1e-3)
        assert not ci.is_open
        assert ci.contains(0.5)
        assert not ci.contains(0.8)

    def test_level_changes_width(self):
        narrow = confidence_interval(quadratic_profile(), level=0.68)
        wide = confidence_interval(quadratic_profile(), level=0.99)
        assert narrow.width < wide.width

    def test_flat_profile_is_open(self):
        grid = np.linspace(0.1, 1.0, 50)
        profile = LikelihoodProfile(
            param="d",
            grid=grid,
            shifted_loss=np.full(50, 0.3),
            mle_loss=0.0,
            mle_value=0.5,
            reliable=np.ones(50, dtype=bool),
        )
        ci = confidence_interval(profile)
        assert ci.lo_open and ci.hi_open
        width, open_flag = ci_width(profile)
        assert open_flag
        assert width == pytest.approx(0.9)

    def test_one_sided_open_end(self):
        grid = np.linspace(0.0, 1.0, 101)
        shifted = np.where(grid < 0.5, 0.0, 40.0 * (grid - 0.5) ** 2)
        profile = LikelihoodProfile("d", grid, shifted, 0.0, 0.2,
                                    np.ones(101, dtype=bool))
        ci = confidence_interval(profile)
        assert ci.lo_open and not ci.hi_open
        assert ci.hi == pytest.approx(0.5 + np.sqrt(1.9207 / 40.0), abs=1e-2)

    def test_everything_above_threshold_degenerates(self):
        profile = quadratic_profile(scale=1e-4)
        profile.shifted_loss += 5.0
        ci = confidence_interval(profile)
        assert ci.lo == ci.hi == profile.mle_value

    def test_csv_export(self):
        profile = quadratic_profile(n=5)
        lines = profile.to_csv().strip().splitlines()
        assert lines[0] == "param_value,shifted_loss,reliable_flag"
        assert len(lines) == 6


class TestMeanL2:
    def ensemble(self, support, rows):
        return EnsembleResult(
            support=np.asarray(support), values=np.asarray(rows, dtype=float)
        )

    def test_two_constant_functions(self):
        support = np.linspace(0.0, 1.0, 101)
        er = self.ensemble(support, [np.zeros(101), np.ones(101)])
        assert mean_l2_distance(er) == pytest.approx(1.0, rel=1e-12)

    def test_three_constant_functions_mean_over_pairs(self):
        support = np.linspace(0.0, 1.0, 101)
        er = self.ensemble(
            support, [np.zeros(101), np.ones(101), np.full(101, 2.0)]
        )
        # pairwise distances 1, 2, 1 -> mean 4/3
        assert mean_l2_distance(er) == pytest.approx(4.0 / 3.0, rel=1e-12)

    def test_linear_vs_zero(self):
        support = np.linspace(0.0, 1.0, 2001)
        er = self.ensemble(support, [np.zeros(2001), support])
        # sqrt(integral of x^2 over [0,1]) = 1/sqrt(3)
        assert mean_l2_distance(er) == pytest.approx(1.0 / np.sqrt(3.0), rel=1e-5)

    def test_single_function_has_zero_spread(self):
        support = np.linspace(0.0, 1.0, 11)
        er = self.ensemble(support, [support])
        assert mean_l2_distance(er) == 0.0

    def test_csv_includes_truth_column(self):
        support = np.linspace(0.0, 1.0, 3)
        er = EnsembleResult(
            support=support,
            values=np.zeros((2, 3)),
            truth=np.ones(3),
        )
        lines = er.to_csv().strip().splitlines()
        assert lines[0] == "support_x,fit_0,fit_1,ground_truth"
        assert len(lines) == 4


class TestPredictionError:
    @staticmethod
    def flat_traj(levels):
        levels = np.asarray(levels, dtype=float)
        return lambda ts: np.tile(levels, (len(np.atleast_1d(ts)), 1))

    def test_constant_offset_by_hand(self):
        fit = self.flat_traj([1.0, 5.0])
        truth = self.flat_traj([1.0, 4.0])
        # offset 1 on species 1 over a unit window: sqrt(int 1 dt) = 1
        assert prediction_error(fit, truth, [1], (0.0, 1.0)) == pytest.approx(
            1.0, rel=1e-12
        )

    def test_sums_over_species(self):
        fit = self.flat_traj([2.0, 5.0])
        truth = self.flat_traj([1.0, 4.0])
        assert prediction_error(fit, truth, [0, 1], (0.0, 4.0)) == pytest.approx(
            4.0, rel=1e-12
        )

    def test_missing_trajectory_is_infinite(self):
        truth = self.flat_traj([1.0])
        assert prediction_error(None, truth, [0], (0.0, 1.0)) == np.inf


class TestStructural:
    def setup_method(self):
        self.d_true = 0.5
        self.truth_rate = lambda x: 0.6 * x**3 / (x**3 + 0.3**3)

    def test_shifted_rate_reproduces_rhs(self):
        report = structural_nonident_check(
            self.truth_rate, self.d_true, (0.5, 1.2), [-0.5, 0.0, 0.25, 0.9]
        )
        assert report.ok
        assert np.all(report.max_rhs_deviation < 1e-12)

    def test_nonnegativity_bound_value(self):
        report = structural_nonident_check(
            self.truth_rate, self.d_true, (0.5, 1.2), [0.0]
        )
        xs = np.linspace(0.5, 1.2, 100)
        want = self.d_true + np.min(self.truth_rate(xs) / xs)
        assert report.d_star_bound == pytest.approx(want, rel=1e-12)

    def test_violation_flags_match_direct_evaluation(self):
        report = structural_nonident_check(
            self.truth_rate, self.d_true, (0.5, 1.2), [-0.5, 0.0, 0.25, 0.9, 5.0]
        )
        xs = np.linspace(0.5, 1.2, 100)
        for d_star, violated in zip(report.d_stars, report.nonneg_violated):
            shifted = self.truth_rate(xs) + (d_star - self.d_true) * xs
            assert violated == bool(np.any(shifted < 0))
        # the shifted rate loses nonnegativity for sufficiently small d*
        assert report.nonneg_violated[0] and not report.nonneg_violated[-1]

    def test_positive_grid_enforced(self):
        report = structural_nonident_check(
            self.truth_rate, self.d_true, (0.0, 1.0), [0.0]
        )
        assert np.isfinite(report.d_star_bound)


class TestScanResult:
    def test_csv_round_shape(self):
        result = ScanResult(
            cells=[
                ScanCell(21, 0.05, "ude", 0.3, False, 0.1, 0.2),
                ScanCell(11, 0.2, "ude", np.inf, True, np.inf, np.inf, failed=True),
            ]
        )
        lines = result.to_csv().strip().splitlines()
        assert lines[0] == "N,sigma,variant,ci_width,ci_open,mean_l2,pred_error"
        assert len(lines) == 3
        assert result.select("ude")[0].ci_width == 0.3


@pytest.fixture(scope="module")
def fitted_simple_sa():
    bundle = zoo.builtin("simple_sa")
    data = make_dataset(bundle, seed=0)
    problem, objective, ensemble = fit_variant(
        bundle, "known", data, seed=0, n_starts=6, adam_iters=200
    )
    return bundle, data, problem, objective, ensemble


class TestProfileEndToEnd:
    def test_profile_minimum_and_reliability(self, fitted_simple_sa):
        bundle, data, problem, objective, ensemble = fitted_simple_sa
        profile = profile_variant(
            bundle, "known", problem, objective, ensemble.best, seed=0, points=9
        )
        assert np.all(profile.reliable)
        assert np.min(profile.shifted_loss) == pytest.approx(0.0, abs=1e-9)
        assert np.all(profile.shifted_loss >= -1e-9)
        assert np.all(np.diff(profile.grid) > 0)

    def test_interval_brackets_the_estimate(self, fitted_simple_sa):
        bundle, data, problem, objective, ensemble = fitted_simple_sa
        profile = profile_variant(
            bundle, "known", problem, objective, ensemble.best, seed=0, points=9
        )
        ci = confidence_interval(profile)
        assert not ci.is_open
        assert ci.contains(float(ensemble.best.model[0]))
        assert ci.width < 0.1

    def test_function_ensemble_support_from_truth(self, fitted_simple_sa):
        bundle, data, problem, objective, ensemble = fitted_simple_sa
        traj = bundle.simulate_truth()
        er = function_ensemble(
            ensemble,
            lambda fit: bundle.slot_rate("known", fit.model),
            traj,
            bundle.truth_network.species_index("X"),
            n_grid=50,
            truth_rate=bundle.truth_slot_rate(),
        )
        vals = traj.states[:, 0]
        assert er.support[0] == pytest.approx(vals.min())
        assert er.support[-1] == pytest.approx(vals.max())
        assert er.values.shape == (len(ensemble.accepted), 50)
        # the known variant's production rate is the truth itself
        np.testing.assert_allclose(er.values, np.tile(er.truth, (er.values.shape[0], 1)),
                                   rtol=1e-10)
        assert er.mean_l2 == pytest.approx(0.0, abs=1e-10)
