"""Built-in benchmark model bundles.

Each bundle carries one reaction network per variant kind; variants
differ only in the designated rate slot (known form, parameterised
form, neural approximator, constrained neural, or a deliberately wrong
form).  Ground-truth values the source models state are marked 'paper'
in the provenance map; everything else (initial conditions, time spans,
unstated rate constants) is a documented default chosen so the default
simulations show the expected qualitative behaviour (pulse for the
feedforward loop, outbreak-and-decline for the SIR model, staged damped
growth for the insect model).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .dsl import parse_network
from .integrate import IntegratorConfig, integrate
from .likelihood import FitProblem
from .network import Algebraic, Constant, Neural, assemble_rhs, eval_expr
from .neural import eval_rate

__all__ = ["ModelBundle", "builtin", "builtin_ids", "variant"]


@dataclass(eq=False)
class ModelBundle:
    id: str
    variants: dict  # kind -> DSL source
    slot_reaction: int  # index of the replaceable-rate reaction
    slot_species: str  # input species whose truth-trajectory range is the support
    profile_param: str
    tspan: tuple
    n_default: int
    sigma_default: float
    measured_default: tuple
    provenance: dict = field(default_factory=dict)  # param -> 'paper' | 'default'
    start_bounds: dict = field(default_factory=dict)  # LHS range overrides, model scale
    profile_range: dict = field(default_factory=dict)  # param -> (lo, hi), model scale
    fit_cfg: dict = field(default_factory=dict)  # kind -> multistart overrides

    def kinds(self):
        return list(self.variants)

    @lru_cache(maxsize=None)
    def network(self, kind):
        try:
            text = self.variants[kind]
        except KeyError:
            raise ValueError(f"model '{self.id}' has no variant '{kind}'") from None
        return parse_network(text)

    @property
    def truth_network(self):
        return self.network("parameterised")

    def truth_vector(self) -> np.ndarray:
        net = self.truth_network
        try:
            return np.array([net.defaults[p] for p in net.parameters])
        except KeyError as e:
            raise ValueError(
                f"model '{self.id}' has no configured ground truth for {e}"
            ) from None

    def u0(self, kind="parameterised") -> np.ndarray:
        net = self.network(kind)
        return np.array([net.initial.get(s.name, 0.0) for s in net.species])

    def simulate_truth(self, cfg: IntegratorConfig = None):
        sys = assemble_rhs(self.truth_network)
        return integrate(sys, self.u0(), self.tspan, self.truth_vector(), cfg)

    def make_problem(self, kind, dataset, threshold=None) -> FitProblem:
        return FitProblem(
            network=self.network(kind),
            dataset=dataset,
            u0=self.u0(kind),
            tspan=self.tspan,
            threshold=threshold,
        )

    def slot_rate(self, kind, model_params):
        """Vectorized single-input rate function of the designated slot."""
        net = self.network(kind)
        rate = net.reactions[self.slot_reaction].rate
        model_params = np.asarray(model_params, dtype=float)
        if isinstance(rate, Neural):
            spec = net.neural[rate.slot]
            if spec.input_dim != 1:
                raise ValueError("ensemble support is defined for 1-input slots only")
            theta = model_params[net.theta_slices()[rate.slot]]
            return lambda xs: np.array(
                [eval_rate(spec, theta, np.array([x])) for x in np.atleast_1d(xs)]
            )
        env = {p: model_params[j] for j, p in enumerate(net.parameters)}
        if isinstance(rate, Constant):
            return lambda xs: np.full_like(np.atleast_1d(np.asarray(xs, float)),
                                           env[rate.param])

        def fn(xs):
            local = dict(env)
            local[self.slot_species] = np.atleast_1d(np.asarray(xs, dtype=float))
            local["t"] = 0.0
            return np.broadcast_to(
                eval_expr(rate.expr, local), np.atleast_1d(xs).shape
            ).astype(float)

        return fn

    def truth_slot_rate(self):
        return self.slot_rate("parameterised", self.truth_vector())

    def fit_defaults(self, kind):
        base = {"n_starts": 50, "adam_iters": 1000, "lr": 1e-2, "restarts": 3,
                "refit_adam_iters": 300}
        base.update(self.fit_cfg.get("all", {}))
        base.update(self.fit_cfg.get(kind, {}))
        return base


def _simple_sa():
    species = "species X = 0.5\n"
    known = species + (
        "param d = 0.5\n"
        "0 --[hill(X; 0.6, 0.3, 3.0)]--> X\n"
        "X --[d]--> 0\n"
    )
    parameterised = species + (
        "param v = 0.6\nparam K = 0.3\nparam n = 3.0\nparam d = 0.5\n"
        "0 --[hill(X; v, K, n)]--> X\n"
        "X --[d]--> 0\n"
    )
    ude = species + (
        "param d = 0.5\n"
        "nn A(X) {hidden=5, layers=2, constraint=nonneg}\n"
        "0 --[A(X)]--> X\n"
        "X --[d]--> 0\n"
    )
    return ModelBundle(
        id="simple_sa",
        variants={"known": known, "parameterised": parameterised, "ude": ude},
        slot_reaction=0,
        slot_species="X",
        profile_param="d",
        tspan=(0.0, 10.0),
        n_default=21,
        sigma_default=0.05,
        measured_default=("X",),
        provenance={"v": "paper", "K": "paper", "n": "paper", "d": "paper",
                    "X0": "default"},
        start_bounds={"n": (0.5, 10.0)},
        profile_range={"d": (0.05, 1.5)},
    )


def _extended_sa():
    species = "species X = 3.0\nspecies Y = 1.5\n"
    body = (
        "X --[d]--> 0\n"
        "0 --[X]--> Y\n"
        "Y --[d]--> 0\n"
    )
    known = species + "param d = 0.5\n0 --[hill(Y; 1.1, 2.0, 3.0)]--> X\n" + body
    parameterised = species + (
        "param v = 1.1\nparam K = 2.0\nparam n = 3.0\nparam d = 0.5\n"
        "0 --[hill(Y; v, K, n)]--> X\n" + body
    )
    def ude(constraint):
        return species + (
            "param d = 0.5\n"
            f"nn A(Y) {{hidden=5, layers=2, constraint={constraint}}}\n"
            "0 --[A(Y)]--> X\n" + body
        )
    return ModelBundle(
        id="extended_sa",
        variants={
            "known": known,
            "parameterised": parameterised,
            "ude": ude("nonneg"),
            "ude_mono": ude("mono_inc"),
        },
        slot_reaction=0,
        slot_species="Y",
        profile_param="d",
        tspan=(0.0, 15.0),
        n_default=21,
        sigma_default=0.05,
        measured_default=("X", "Y"),
        provenance={"v": "paper", "K": "paper", "n": "paper", "d": "paper",
                    "X0": "default", "Y0": "default"},
        start_bounds={"n": (0.5, 10.0)},
        profile_range={"d": (0.05, 5.0)},
    )


def _goodwin():
    # network shape only; rate parameters are deliberately unset and must
    # be supplied by user configuration
    text = (
        "species M = 0.1\nspecies E = 0.1\nspecies P = 0.1\n"
        "param v0\nparam K\nparam n\nparam v1\nparam v2\n"
        "param dm\nparam de\nparam dp\n"
        "0 --[v0 * K^n / (K^n + P^n)]--> M\n"
        "M --[dm]--> 0\n"
        "0 --[v1 * M]--> E\n"
        "E --[de]--> 0\n"
        "0 --[v2 * E]--> P\n"
        "P --[dp]--> 0\n"
    )
    return ModelBundle(
        id="goodwin",
        variants={"parameterised": text},
        slot_reaction=0,
        slot_species="P",
        profile_param="dm",
        tspan=(0.0, 50.0),
        n_default=31,
        sigma_default=0.05,
        measured_default=("E", "P"),
        provenance={p: "unset" for p in
                    ("v0", "K", "n", "v1", "v2", "dm", "de", "dp")},
    )


def _insect():
    species = "species E = 10.0\nspecies L = 1.0\nspecies A = 1.0\n"
    mech = (
        "param k_el = 1.0\nparam d_e = 0.5\nparam k_la = 0.5\n"
        "param r = 3.0\nparam d_a = 0.5\n"
    )
    body = (
        "E --[k_el]--> L\n"
        "E --[d_e]--> 0\n"
        "L --[k_la]--> A\n"
        "{slot}\n"
        "A --[r]--> A + E\n"
        "A --[d_a]--> 0\n"
    )
    known = species + mech + body.format(
        slot="L --[0.1 + 0.2 * L + 0.05 * L^2]--> 0"
    )
    parameterised = species + mech + (
        "param d_l1 = 0.1\nparam d_l2 = 0.2\nparam d_l3 = 0.05\n"
        + body.format(slot="L --[d_l1 + d_l2 * L + d_l3 * L^2]--> 0")
    )
    ude = species + mech + (
        "nn DL(L) {hidden=5, layers=2, constraint=nonneg}\n"
        + body.format(slot="L --[DL(L)]--> 0")
    )
    return ModelBundle(
        id="insect",
        variants={"known": known, "parameterised": parameterised, "ude": ude},
        slot_reaction=3,
        slot_species="L",
        profile_param="k_la",
        tspan=(0.0, 30.0),
        n_default=41,
        sigma_default=0.05,
        measured_default=("E", "A"),
        provenance={"d_L form": "paper",
                    **{p: "default" for p in
                       ("k_el", "d_e", "k_la", "r", "d_a",
                        "d_l1", "d_l2", "d_l3", "E0", "L0", "A0")}},
        # the reproduction loop (A -> A + E) explodes for most rate draws
        # from the generic [1e-2, 1e2] range; keep starts integrable
        start_bounds={**{p: (0.1, 10.0)
                         for p in ("k_el", "d_e", "k_la", "r", "d_a")},
                      **{p: (0.01, 10.0)
                         for p in ("d_l1", "d_l2", "d_l3")}},
        # fixed scan range so profile widths are comparable across
        # data-quality cells (open profiles report the full range)
        profile_range={"k_la": (0.01, 50.0)},
    )


def _icff():
    species = "species X = 0.0\nspecies Y = 0.0\nspecies Z = 0.0\n"
    decay = "X --[d]--> 0\nY --[d]--> 0\nZ --[d]--> 0\n"
    p_r = "param v_r = 2.0\nparam K_r = 1.0\nparam n_r = 3.0\n"
    p_a = "param v_a = 1.0\nparam K_a = 1.0\nparam n_a = 3.0\n"
    d = "param d = 0.5\n"
    r_param = "0 --[v_r * K_r^n_r / (K_r^n_r + X^n_r)]--> Y\n"
    r_known = "0 --[2.0 * 1.0 / (1.0 + X^3.0)]--> Y\n"
    r_nn = "0 --[R(X)]--> Y\n"
    a_param = "Y --[hill(X; v_a, K_a, n_a)]--> Z\n"
    a_known = "Y --[hill(X; 1.0, 1.0, 3.0)]--> Z\n"
    a_nn = "Y --[A(X)]--> Z\n"
    nn_r = "nn R(X) {hidden=5, layers=2, constraint=nonneg}\n"
    nn_a = "nn A(X) {hidden=5, layers=2, constraint=nonneg}\n"
    production = "0 --[1]--> X\n"
    return ModelBundle(
        id="icff",
        variants={
            "known": species + d + production + r_known + a_known + decay,
            "parameterised": species + d + p_r + p_a + production + r_param
            + a_param + decay,
            "ude_a": species + d + p_r + nn_a + production + r_param + a_nn + decay,
            "ude_r": species + d + p_a + nn_r + production + r_nn + a_param + decay,
            "ude": species + d + nn_r + nn_a + production + r_nn + a_nn + decay,
        },
        slot_reaction=1,  # the repressive production of Y
        slot_species="X",
        profile_param="d",
        tspan=(0.0, 10.0),
        n_default=31,
        sigma_default=0.1,
        measured_default=("X", "Y", "Z"),
        provenance={"X production rate 1": "paper",
                    **{p: "default" for p in
                       ("d", "v_r", "K_r", "n_r", "v_a", "K_a", "n_a")}},
        start_bounds={"n_r": (0.5, 10.0), "n_a": (0.5, 10.0)},
    )


def _linear_pathway():
    species = (
        "species X1 = 2.0\nspecies X2 = 0.0\nspecies X3 = 0.0\nspecies X4 = 0.0\n"
    )
    d = "param d = 0.5\n"
    p_r = "param v0 = 0.1\nparam v = 1.0\nparam K = 1.0\nparam n = 3.0\n"
    decay = lambda x: f"{x} --[d]--> 0\n"

    def body(rate):
        return (
            decay("X1")
            + f"0 --[{rate.format(x='X1')}]--> X2\n"
            + decay("X2")
            + f"0 --[{rate.format(x='X2')}]--> X3\n"
            + decay("X3")
            + f"0 --[{rate.format(x='X3')}]--> X4\n"
            + decay("X4")
        )

    r_param = "v0 + v * K^n / ({x}^n + K^n)"
    r_known = "0.1 + 1.0 * 1.0 / ({x}^3.0 + 1.0)"
    r_nn = "R({x})"

    def ude(constraint):
        return (
            species + d
            + f"nn R(X1) {{hidden=5, layers=2, constraint={constraint}}}\n"
            + body(r_nn)
        )

    return ModelBundle(
        id="linear_pathway",
        variants={
            "known": species + d + body(r_known),
            "parameterised": species + d + p_r + body(r_param),
            "ude": ude("nonneg"),
            "ude_mono": ude("mono_dec"),
            "ude_mono_bounded": ude("mono_dec(0.1, 1.1)"),
        },
        slot_reaction=1,
        slot_species="X1",
        profile_param="d",
        tspan=(0.0, 10.0),
        n_default=31,
        sigma_default=0.05,
        measured_default=("X4",),
        provenance={"R form": "paper", "bounds = (v0, v0+v)": "paper",
                    **{p: "default" for p in ("d", "v0", "v", "K", "n")}},
        start_bounds={"n": (0.5, 10.0)},
    )


def _modified_sir():
    species = "species S = 100.0\nspecies I = 1.0\nspecies R = 0.0\n"
    g = "param g = 0.05\n"
    known = species + g + (
        "S --[0.003 / S^0.05 * I^0.5]--> I\n"
        "I --[g]--> R\n"
    )
    parameterised = species + g + (
        "param b = 0.003\nparam a1 = 0.05\nparam a2 = 0.5\n"
        "S --[b / S^a1 * I^a2]--> I\n"
        "I --[g]--> R\n"
    )
    ude = species + g + (
        "nn U(S, I) {hidden=5, layers=2, constraint=nonneg}\n"
        "S --[U(S, I)]--> I\n"
        "I --[g]--> R\n"
    )
    misspecified = species + g + (
        "param b = 0.003\n"
        "S --[b * I]--> I\n"
        "I --[g]--> R\n"
    )
    return ModelBundle(
        id="modified_sir",
        variants={
            "known": known,
            "parameterised": parameterised,
            "ude": ude,
            "misspecified": misspecified,
        },
        slot_reaction=0,
        slot_species="I",
        profile_param="g",
        tspan=(0.0, 150.0),
        n_default=31,
        sigma_default=0.05,
        measured_default=("S", "I", "R"),
        provenance={"b": "paper", "a1": "paper", "a2": "paper",
                    "g": "default", "S0": "default", "I0": "default",
                    "R0": "default"},
        start_bounds={"b": (1e-4, 1e-1)},
    )


_BUILDERS = {
    "simple_sa": _simple_sa,
    "extended_sa": _extended_sa,
    "goodwin": _goodwin,
    "insect": _insect,
    "icff": _icff,
    "linear_pathway": _linear_pathway,
    "modified_sir": _modified_sir,
}


def builtin_ids():
    return list(_BUILDERS)


@lru_cache(maxsize=None)
def builtin(model_id: str) -> ModelBundle:
    try:
        return _BUILDERS[model_id]()
    except KeyError:
        raise ValueError(
            f"unknown model '{model_id}'; available: {', '.join(_BUILDERS)}"
        ) from None


def variant(bundle: ModelBundle, kind: str, dataset, threshold=None) -> FitProblem:
    """Fit problem for one variant of a bundle (see ModelBundle.make_problem)."""
    return bundle.make_problem(kind, dataset, threshold)
