"""Reaction network data model and ODE generation.

A network is a list of species and reactions.  Each reaction carries
substrate/product stoichiometries and a rate, which is either a named
constant, an algebraic expression over species/parameters/time, or a
reference to a neural rate slot.  The ODE right-hand side is always
generated from the reactions via the reaction rate equation

    dX_m/dt = sum_k nu_m^k * a_k(X, t),
    a_k = c_k(X, t) * prod_m X_m^alpha_m / alpha_m!

and never hand-entered.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .neural import NeuralRateSpec, eval_rate, param_count

__all__ = [
    "Species",
    "Reaction",
    "ReactionNetwork",
    "OdeSystem",
    "ValidationReport",
    "NetworkError",
    "Num",
    "Sym",
    "BinOp",
    "Neg",
    "Hill",
    "Constant",
    "Algebraic",
    "Neural",
    "eval_expr",
    "expr_symbols",
    "hill",
    "net_stoichiometry",
    "propensity",
    "validate",
    "assemble_rhs",
]


class NetworkError(ValueError):
    """Malformed network or rate expression."""


# --- algebraic expression tree -------------------------------------------------

@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Sym:
    name: str


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - * / ^
    left: object
    right: object


@dataclass(frozen=True)
class Neg:
    operand: object


@dataclass(frozen=True)
class Hill:
    """hill(X; v, K, n) = v * X^n / (X^n + K^n)."""

    x: object
    v: object
    k: object
    n: object


def hill(x, v, k, n, xp=np):
    xn = xp.asarray(x) ** n
    return v * xn / (xn + k**n)


def eval_expr(expr, env, xp=np):
    """Evaluate an expression tree in an environment mapping names to values.

    ``xp`` selects the array namespace (numpy or jax.numpy) so the same
    tree serves both plain evaluation and JAX tracing.
    """
    if isinstance(expr, Num):
        return expr.value
    if isinstance(expr, Sym):
        try:
            return env[expr.name]
        except KeyError:
            raise NetworkError(f"unresolved symbol '{expr.name}'") from None
    if isinstance(expr, Neg):
        return -eval_expr(expr.operand, env, xp)
    if isinstance(expr, Hill):
        return hill(
            eval_expr(expr.x, env, xp),
            eval_expr(expr.v, env, xp),
            eval_expr(expr.k, env, xp),
            eval_expr(expr.n, env, xp),
            xp,
        )
    if isinstance(expr, BinOp):
        a = eval_expr(expr.left, env, xp)
        b = eval_expr(expr.right, env, xp)
        if expr.op == "+":
            return a + b
        if expr.op == "-":
            return a - b
        if expr.op == "*":
            return a * b
        if expr.op == "/":
            return a / b
        if expr.op == "^":
            # fractional powers on nonpositive bases are undefined; numpy
            # yields nan there, which the loss maps to +inf
            return a**b
        raise NetworkError(f"unknown operator '{expr.op}'")
    raise NetworkError(f"unknown expression node {expr!r}")


def expr_symbols(expr):
    """Free symbol names in an expression tree, in first-appearance order."""
    out = []

    def walk(node):
        if isinstance(node, Sym):
            if node.name not in out:
                out.append(node.name)
        elif isinstance(node, Neg):
            walk(node.operand)
        elif isinstance(node, BinOp):
            walk(node.left)
            walk(node.right)
        elif isinstance(node, Hill):
            for sub in (node.x, node.v, node.k, node.n):
                walk(sub)

    walk(expr)
    return out


# --- rate expressions ----------------------------------------------------------

@dataclass(frozen=True)
class Constant:
    """Rate equal to a single named parameter."""

    param: str


@dataclass(frozen=True)
class Algebraic:
    """Rate given by an expression over species, parameters, and 't'."""

    expr: object


@dataclass(frozen=True)
class Neural:
    """Rate given by a neural slot applied to the listed input species."""

    slot: str
    inputs: tuple


# --- network -------------------------------------------------------------------

@dataclass(frozen=True)
class Species:
    name: str
    index: int


@dataclass(frozen=True)
class Reaction:
    substrates: dict  # species name -> count
    products: dict  # species name -> count
    rate: object  # Constant | Algebraic | Neural


@dataclass
class ReactionNetwork:
    species: list  # of Species, in declaration order
    reactions: list  # of Reaction, in declaration order
    parameters: list  # mechanistic parameter names, canonical flattening order
    neural: dict = field(default_factory=dict)  # slot name -> NeuralRateSpec
    neural_order: list = field(default_factory=list)  # slot names, flattening order
    initial: dict = field(default_factory=dict)  # species name -> default X(0)
    defaults: dict = field(default_factory=dict)  # param name -> declared value

    @property
    def species_names(self):
        return [s.name for s in self.species]

    def species_index(self, name):
        for s in self.species:
            if s.name == name:
                return s.index
        raise NetworkError(f"unknown species '{name}'")

    def n_mechanistic(self):
        return len(self.parameters)

    def theta_slices(self):
        """Slot name -> slice into the flattened parameter vector.

        Flattening order: mechanistic parameters first (declaration order),
        then one theta block per neural slot in slot declaration order.
        """
        out = {}
        offset = len(self.parameters)
        for name in self.neural_order:
            n = param_count(self.neural[name])
            out[name] = slice(offset, offset + n)
            offset += n
        return out

    def n_params(self):
        return len(self.parameters) + sum(
            param_count(self.neural[n]) for n in self.neural_order
        )


@dataclass
class ValidationReport:
    errors: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    @property
    def ok(self):
        return not self.errors


def net_stoichiometry(rxn: Reaction, net: ReactionNetwork) -> np.ndarray:
    """Net change per species (products minus substrates) as an int vector."""
    nu = np.zeros(len(net.species), dtype=int)
    for name, count in rxn.substrates.items():
        nu[net.species_index(name)] -= count
    for name, count in rxn.products.items():
        nu[net.species_index(name)] += count
    return nu


def validate(net: ReactionNetwork) -> ValidationReport:
    report = ValidationReport()
    if not net.species or not net.reactions:
        report.errors.append("network has no species or no reactions")
        return report

    names = [s.name for s in net.species]
    if len(set(names)) != len(names):
        report.errors.append("duplicate species names")
    species = set(names)
    params = set(net.parameters)

    referenced = set()
    for i, rxn in enumerate(net.reactions):
        for name, count in list(rxn.substrates.items()) + list(rxn.products.items()):
            if count < 0:
                report.errors.append(f"reaction {i}: negative stoichiometry for {name}")
            if name not in species:
                report.errors.append(f"reaction {i}: unknown species '{name}'")
        rate = rxn.rate
        if isinstance(rate, Constant):
            if rate.param not in params:
                report.errors.append(f"reaction {i}: unknown parameter '{rate.param}'")
            referenced.add(rate.param)
        elif isinstance(rate, Algebraic):
            for sym in expr_symbols(rate.expr):
                if sym == "t":
                    continue
                if sym in species:
                    continue
                if sym in params:
                    referenced.add(sym)
                else:
                    report.errors.append(f"reaction {i}: unresolved symbol '{sym}'")
        elif isinstance(rate, Neural):
            if rate.slot not in net.neural:
                report.errors.append(f"reaction {i}: undeclared neural slot '{rate.slot}'")
            else:
                spec = net.neural[rate.slot]
                if spec.input_dim != len(rate.inputs):
                    report.errors.append(
                        f"reaction {i}: slot '{rate.slot}' expects "
                        f"{spec.input_dim} inputs, got {len(rate.inputs)}"
                    )
            for name in rate.inputs:
                if name not in species:
                    report.errors.append(
                        f"reaction {i}: neural input '{name}' is not a species"
                    )
        else:
            report.errors.append(f"reaction {i}: unknown rate kind {rate!r}")

    for p in net.parameters:
        if p not in referenced:
            report.warnings.append(f"parameter '{p}' declared but never used")
    return report


def propensity(rxn: Reaction, net: ReactionNetwork, state, params, t=0.0, xp=np):
    """a_k = c_k(X, t) * prod over substrates of X^alpha / alpha!.

    ``params`` is the full flattened parameter vector (mechanistic then
    theta blocks).  The empty product (no substrates) is 1.
    """
    rate = _rate_value(rxn.rate, net, state, params, t, xp)
    prod = 1.0
    for name, count in rxn.substrates.items():
        if count == 0:
            continue
        x = state[net.species_index(name)]
        prod = prod * x**count / math.factorial(count)
    return rate * prod


def _rate_value(rate, net, state, params, t, xp):
    if isinstance(rate, Constant):
        return params[net.parameters.index(rate.param)]
    if isinstance(rate, Algebraic):
        env = {s.name: state[s.index] for s in net.species}
        env["t"] = t
        for j, p in enumerate(net.parameters):
            env[p] = params[j]
        return eval_expr(rate.expr, env, xp)
    if isinstance(rate, Neural):
        spec = net.neural[rate.slot]
        theta = params[net.theta_slices()[rate.slot]]
        x = xp.stack([state[net.species_index(n)] for n in rate.inputs])
        return eval_rate(spec, theta, x, xp)
    raise NetworkError(f"unknown rate kind {rate!r}")


@dataclass
class OdeSystem:
    """Generated right-hand side of the reaction rate equation.

    ``rhs(state, params, t, xp)`` is pure and safe to call concurrently;
    ``xp`` may be numpy or jax.numpy.
    """

    dimension: int
    network: ReactionNetwork
    _nu: np.ndarray = None  # (K, M) net stoichiometry matrix

    def rhs(self, state, params, t=0.0, xp=np):
        # species counts are physically nonnegative; solvers (and adjoint
        # passes) can undershoot zero slightly, where fractional powers
        # would poison the whole evaluation with nan
        state = xp.maximum(state, 0.0)
        out = xp.zeros(self.dimension)
        for k, rxn in enumerate(self.network.reactions):
            a = propensity(rxn, self.network, state, params, t, xp)
            out = out + self._nu[k] * a
        return out


def assemble_rhs(net: ReactionNetwork) -> OdeSystem:
    report = validate(net)
    if not report.ok:
        raise NetworkError("; ".join(report.errors))
    nu = np.array([net_stoichiometry(r, net) for r in net.reactions])
    return OdeSystem(dimension=len(net.species), network=net, _nu=nu)
