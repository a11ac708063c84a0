"""Reaction network model: expressions, propensities, generated RHS."""

import numpy as np
import pytest

from crn_ude.dsl import parse_network
from crn_ude.network import (
    BinOp,
    Hill,
    Neg,
    NetworkError,
    Num,
    Sym,
    assemble_rhs,
    eval_expr,
    expr_symbols,
    hill,
    net_stoichiometry,
    propensity,
    validate,
)

from conftest import naive_rhs, random_mass_action_network


class TestExpressions:
    def test_arithmetic(self):
        # (2 + a) * b - 4 / 2 at a=1, b=3  ->  9 - 2 = 7
        expr = BinOp(
            "-",
            BinOp("*", BinOp("+", Num(2.0), Sym("a")), Sym("b")),
            BinOp("/", Num(4.0), Num(2.0)),
        )
        assert eval_expr(expr, {"a": 1.0, "b": 3.0}) == 7.0

    def test_power_and_negation(self):
        expr = Neg(BinOp("^", Sym("x"), Num(3.0)))
        assert eval_expr(expr, {"x": 2.0}) == -8.0

    def test_unresolved_symbol_raises(self):
        with pytest.raises(NetworkError, match="unresolved symbol 'q'"):
            eval_expr(Sym("q"), {})

    def test_hill_half_max(self):
        # at X = K the Hill function is exactly v/2, any n
        for n in (1.0, 2.0, 3.0, 7.5):
            assert hill(0.3, 0.6, 0.3, n) == pytest.approx(0.3, abs=1e-15)

    def test_hill_limits(self):
        assert hill(1e9, 2.0, 0.5, 3.0) == pytest.approx(2.0, rel=1e-6)
        assert hill(0.0, 2.0, 0.5, 3.0) == 0.0

    def test_symbols_first_appearance_order(self):
        expr = BinOp("+", Hill(Sym("X"), Sym("v"), Sym("K"), Sym("n")), Sym("v"))
        assert expr_symbols(expr) == ["X", "v", "K", "n"]


class TestStoichiometryAndPropensity:
    def test_dimerisation_rhs_by_hand(self):
        net = parse_network(
            "species X = 4.0\nspecies X2 = 1.0\n"
            "param k_b = 2.0\nparam k_d = 0.5\n"
            "2X --[k_b]--> X2\nX2 --[k_d]--> 2X\n"
        )
        sys = assemble_rhs(net)
        # a1 = k_b * X^2/2! = 16, a2 = k_d * X2 = 0.5
        # dX/dt = -2*16 + 2*0.5 = -31, dX2/dt = 16 - 0.5 = 15.5
        out = sys.rhs(np.array([4.0, 1.0]), np.array([2.0, 0.5]))
        np.testing.assert_allclose(out, [-31.0, 15.5], rtol=1e-15)

    def test_empty_substrate_product_is_one(self):
        net = parse_network("species X = 0.0\nparam k = 3.0\n0 --[k]--> X\n")
        a = propensity(net.reactions[0], net, np.array([5.0]), np.array([3.0]))
        assert a == 3.0

    def test_factorial_division(self):
        net = parse_network("species X = 0.0\nparam k = 1.0\n3X --[k]--> 0\n")
        a = propensity(net.reactions[0], net, np.array([2.0]), np.array([1.0]))
        assert a == pytest.approx(8.0 / 6.0, rel=1e-15)

    def test_net_stoichiometry(self):
        net = parse_network("param k = 1.0\n2A + B --[k]--> 3C\n")
        np.testing.assert_array_equal(
            net_stoichiometry(net.reactions[0], net), [-2, -1, 3]
        )

    def test_rhs_matches_naive_oracle_on_random_networks(self, rng):
        for _ in range(25):
            net, values = random_mass_action_network(rng)
            sys = assemble_rhs(net)
            state = rng.uniform(0.1, 3.0, size=len(net.species))
            got = sys.rhs(state, values)
            want = naive_rhs(net, state, values)
            np.testing.assert_allclose(got, want, rtol=1e-12, atol=1e-12)

    def test_rhs_with_algebraic_and_neural_rates_matches_oracle(self, rng):
        net = parse_network(
            "species X = 0.5\nspecies Y = 0.2\n"
            "param v = 0.6\nparam K = 0.3\nparam n = 3.0\nparam d = 0.5\n"
            "nn A(Y) {hidden=4, layers=2, constraint=nonneg}\n"
            "0 --[hill(X; v, K, n)]--> X\n"
            "X --[d]--> 0\n"
            "0 --[A(Y)]--> Y\n"
        )
        sys = assemble_rhs(net)
        n_theta = net.n_params() - 4
        for _ in range(5):
            params = np.concatenate(
                [rng.uniform(0.1, 2.0, 4), rng.normal(size=n_theta)]
            )
            state = rng.uniform(0.1, 3.0, size=2)
            np.testing.assert_allclose(
                sys.rhs(state, params), naive_rhs(net, state, params), rtol=1e-12
            )


class TestValidation:
    def test_valid_network_reports_ok(self):
        net = parse_network("species X = 1.0\nparam d = 0.5\nX --[d]--> 0\n")
        assert validate(net).ok

    def test_unknown_parameter_in_rate(self):
        net = parse_network("species X = 1.0\nparam d = 0.5\nX --[d]--> 0\n")
        net.parameters.remove("d")
        report = validate(net)
        assert not report.ok
        assert any("unknown parameter 'd'" in e for e in report.errors)

    def test_unused_parameter_warns(self):
        net = parse_network(
            "species X = 1.0\nparam d = 0.5\nparam ghost = 1.0\nX --[d]--> 0\n"
        )
        report = validate(net)
        assert report.ok
        assert any("ghost" in w for w in report.warnings)

    def test_neural_input_dim_mismatch(self):
        net = parse_network(
            "species X = 1.0\nspecies Y = 1.0\n"
            "nn A(X, Y) {hidden=3, layers=1}\n0 --[A(X, Y)]--> X\nX --[1.0]--> 0\n"
        )
        rxn = net.reactions[0]
        object.__setattr__(rxn.rate, "inputs", ("X",))
        report = validate(net)
        assert any("expects 2 inputs" in e for e in report.errors)

    def test_empty_network_is_invalid(self):
        net = parse_network("species X = 1.0\nparam d = 0.5\nX --[d]--> 0\n")
        net.reactions = []
        assert not validate(net).ok

    def test_assemble_raises_on_invalid(self):
        net = parse_network("species X = 1.0\nparam d = 0.5\nX --[d]--> 0\n")
        net.parameters.remove("d")
        with pytest.raises(NetworkError):
            assemble_rhs(net)


class TestFlattening:
    def test_theta_slices_follow_declaration_order(self):
        net = parse_network(
            "species X = 1.0\nparam d = 0.5\n"
            "nn B(X) {hidden=2, layers=1}\nnn A(X) {hidden=3, layers=1}\n"
            "0 --[B(X)]--> X\n0 --[A(X)]--> X\nX --[d]--> 0\n"
        )
        slices = net.theta_slices()
        # B declared first: (1+1)*2 + (2+1)*1 = 7 params starting after d
        assert slices["B"] == slice(1, 8)
        assert slices["A"] == slice(8, 8 + (1 + 1) * 3 + (3 + 1) * 1)
        assert net.n_params() == 1 + 7 + 10
