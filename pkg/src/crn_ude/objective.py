"""Differentiable fitting objective.

The loss is the Gaussian NLL of the dataset under the model simulated at
the candidate parameters, expressed over the optimizer's working
coordinates (log scale for mechanistic parameters, raw for neural
ones).  The whole pipeline (RHS, solver, likelihood) is traced with JAX
and differentiated in reverse mode, so one jitted call returns loss and
exact gradient; agreement with central finite differences is a tested
contract rather than an implementation detail.

Any integration blow-up surfaces as a nonfinite loss value; optimizers
treat that as "reject this iterate" rather than an error.
"""

from __future__ import annotations

import numpy as np

from ._jax import jax, jnp
from .likelihood import FitProblem, gaussian_nll

__all__ = ["Objective", "PinnedObjective", "GradientError", "build_objective", "loss_gradient"]

_PENALTY = 1e6
_MXSTEP = 10_000


class GradientError(RuntimeError):
    """Loss not finite where a gradient was requested."""


class Objective:
    """Jitted loss and gradient over the full working-scale vector."""

    def __init__(self, problem: FitProblem):
        self.problem = problem
        self.n = problem.n_params()
        self._value_and_grad = jax.jit(jax.value_and_grad(_make_loss(problem)))
        self._value = jax.jit(_make_loss(problem))

    def value(self, working) -> float:
        return float(self._value(jnp.asarray(np.asarray(working, dtype=float))))

    def value_and_grad(self, working):
        v, g = self._value_and_grad(jnp.asarray(np.asarray(working, dtype=float)))
        return float(v), np.asarray(g)


class PinnedObjective:
    """An objective with one working coordinate frozen (for profiles)."""

    def __init__(self, base: Objective, index: int, value: float):
        if not 0 <= index < base.n:
            raise IndexError(f"pin index {index} out of range")
        self.base = base
        self.index = index
        self.pin = float(value)
        self.n = base.n - 1

    def embed(self, reduced):
        reduced = np.asarray(reduced, dtype=float)
        return np.insert(reduced, self.index, self.pin)

    def reduce(self, full):
        return np.delete(np.asarray(full, dtype=float), self.index)

    def value(self, reduced) -> float:
        return self.base.value(self.embed(reduced))

    def value_and_grad(self, reduced):
        v, g = self.base.value_and_grad(self.embed(reduced))
        return v, np.delete(g, self.index)


def _make_loss(problem: FitProblem):
    from jax.experimental.ode import odeint

    sys = problem.ode_system
    data = problem.dataset
    u0 = jnp.asarray(problem.u0)
    t0 = float(problem.tspan[0])
    times = np.asarray(data.times, dtype=float)
    prepend_t0 = times[0] > t0
    ts = jnp.asarray(np.concatenate([[t0], times]) if prepend_t0 else times)
    idx = tuple(problem.network.species_index(name) for name in data.species)
    bound_rows = [
        (problem.network.parameters.index(name), lo, hi)
        for name, (lo, hi) in problem.bounds.items()
    ]

    def rhs(u, t, p):
        return sys.rhs(u, p, t, xp=jnp)

    def loss(working):
        p = problem.to_model(working, xp=jnp)
        sol = odeint(rhs, u0, ts, p, rtol=1e-6, atol=1e-8, mxstep=_MXSTEP)
        if prepend_t0:
            sol = sol[1:]
        preds = sol[:, jnp.array(idx)]
        nll = gaussian_nll(preds, data, xp=jnp)
        penalty = 0.0
        for j, lo, hi in bound_rows:
            v = p[j]
            penalty = penalty + _PENALTY * (
                jnp.maximum(lo - v, 0.0) ** 2 + jnp.maximum(v - hi, 0.0) ** 2
            )
        return nll + penalty

    return loss


def build_objective(problem: FitProblem) -> Objective:
    return Objective(problem)


def loss_gradient(objective, working) -> np.ndarray:
    """Gradient of the loss at ``working`` (working scale).

    Raises GradientError when the loss is not finite there, since no
    meaningful gradient exists for a divergent parameter set.
    """
    v, g = objective.value_and_grad(working)
    if not np.isfinite(v):
        raise GradientError(f"loss is {v} at the requested parameters")
    if not np.all(np.isfinite(g)):
        bad = [int(i) for i in np.nonzero(~np.isfinite(g))[0]]
        raise GradientError(f"nonfinite gradient components at indices {bad}")
    return g
