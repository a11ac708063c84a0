"""Adaptive explicit integration with dense output.

Uses the Dormand-Prince 5(4) pair (scipy's RK45: embedded error estimate,
PI step control, 4th-order dense interpolant).  The systems in this
package are nonstiff at their default parameters, so an explicit solver
is the right default.  Integration failures raise IntegrationError; the
fitting layer maps them to an infinite loss instead of aborting.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .network import OdeSystem

__all__ = ["IntegratorConfig", "Trajectory", "IntegrationError", "integrate", "sample"]


class IntegrationError(RuntimeError):
    """Solver could not complete the requested time span."""


@dataclass(frozen=True)
class IntegratorConfig:
    rtol: float = 1e-6
    atol: float = 1e-8
    max_steps: int = 1_000_000

    def __post_init__(self):
        if self.rtol <= 0 or self.atol <= 0:
            raise ValueError("tolerances must be positive")


@dataclass(frozen=True)
class Trajectory:
    """Accepted solver steps plus a dense interpolant between them."""

    times: np.ndarray  # strictly increasing accepted step times
    states: np.ndarray  # (len(times), M)
    _dense: object  # scipy OdeSolution

    @property
    def t0(self):
        return float(self.times[0])

    @property
    def t1(self):
        return float(self.times[-1])

    def __call__(self, t):
        return np.atleast_2d(self._dense(np.asarray(t)).T)

    def to_csv(self, names) -> str:
        buf = io.StringIO()
        buf.write("t," + ",".join(names) + "\n")
        for t, row in zip(self.times, self.states):
            buf.write(
                f"{float(t)!r}," + ",".join(repr(float(v)) for v in row) + "\n"
            )
        return buf.getvalue()


def integrate(sys: OdeSystem, u0, tspan, params, cfg: IntegratorConfig = None) -> Trajectory:
    """Integrate the system over ``tspan`` and keep dense output.

    Raises IntegrationError on nonfinite states or step-budget
    exhaustion (both typically signal divergent parameters).
    """
    cfg = cfg or IntegratorConfig()
    t0, t1 = float(tspan[0]), float(tspan[1])
    if not t0 < t1:
        raise ValueError(f"need t0 < t1, got {tspan}")
    u0 = np.asarray(u0, dtype=float)
    if not np.all(np.isfinite(u0)):
        raise ValueError("nonfinite initial state")
    params = np.asarray(params, dtype=float)

    def f(t, y):
        return np.asarray(sys.rhs(y, params, t), dtype=float)

    sol = solve_ivp(
        f,
        (t0, t1),
        u0,
        method="RK45",
        rtol=cfg.rtol,
        atol=cfg.atol,
        dense_output=True,
    )
    if not sol.success or not np.all(np.isfinite(sol.y)):
        raise IntegrationError(sol.message or "nonfinite state during integration")
    if sol.t.size > cfg.max_steps:
        raise IntegrationError(f"exceeded {cfg.max_steps} steps")
    return Trajectory(times=sol.t, states=sol.y.T, _dense=sol.sol)


def sample(traj: Trajectory, times) -> np.ndarray:
    """Dense-output states at sorted ``times`` within the trajectory span."""
    times = np.asarray(times, dtype=float)
    if times.size and (times[0] < traj.t0 - 1e-12 or times[-1] > traj.t1 + 1e-12):
        raise ValueError(
            f"sample times outside [{traj.t0}, {traj.t1}]"
        )
    return traj(times)
