"""Small feedforward rate approximators with architectural constraints.

All activations are softplus (smooth, so ODE solvers see a C1 right-hand
side).  Constraints are enforced by construction, not by penalty:

* nonnegative output: softplus output activation
* bounds (lo, hi): sigmoid output, reported as lo + (hi - lo) * sigmoid(z)
* monotone decreasing: every weight w is replaced by -softplus(w) at
  evaluation time; monotone increasing uses +softplus(w)

Monotone and bounded constraints compose (sigmoid is increasing, so the
weight transform alone fixes the monotonicity direction).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "Constraint",
    "NeuralRateSpec",
    "param_count",
    "init_params",
    "eval_rate",
    "eval_grad_theta",
]


@dataclass(frozen=True)
class Constraint:
    monotone: str | None = None  # None | "dec" | "inc"
    bounds: tuple | None = None  # None | (lo, hi)

    def __post_init__(self):
        if self.monotone not in (None, "dec", "inc"):
            raise ValueError(f"bad monotone mode {self.monotone!r}")
        if self.bounds is not None:
            lo, hi = self.bounds
            if not lo < hi:
                raise ValueError(f"bounds require lo < hi, got {self.bounds}")

    @classmethod
    def nonneg(cls):
        return cls()

    @classmethod
    def bounded(cls, lo, hi):
        return cls(bounds=(float(lo), float(hi)))

    @classmethod
    def mono_dec(cls, bounds=None):
        return cls(monotone="dec", bounds=bounds)

    @classmethod
    def mono_inc(cls, bounds=None):
        return cls(monotone="inc", bounds=bounds)


@dataclass(frozen=True)
class NeuralRateSpec:
    """Architecture of one neural rate slot.

    Default is 2 hidden layers of width 5 (10 internal nodes, below the
    12-node budget small UDE rate nets are kept to).
    """

    input_dim: int
    hidden_layers: int = 2
    hidden_width: int = 5
    constraint: Constraint = Constraint()

    def __post_init__(self):
        if self.input_dim < 1:
            raise ValueError("input_dim must be >= 1")
        if self.hidden_layers < 0 or self.hidden_width < 1:
            raise ValueError("bad hidden architecture")

    def layer_dims(self):
        """(fan_in, fan_out) per affine layer; scalar output."""
        dims = [self.input_dim] + [self.hidden_width] * self.hidden_layers + [1]
        return list(zip(dims[:-1], dims[1:]))


def param_count(spec: NeuralRateSpec) -> int:
    return sum((fi + 1) * fo for fi, fo in spec.layer_dims())


def init_params(spec: NeuralRateSpec, seed: int) -> np.ndarray:
    """Glorot-uniform weights, zero biases; deterministic per seed."""
    rng = np.random.default_rng(seed)
    parts = []
    for fan_in, fan_out in spec.layer_dims():
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        parts.append(rng.uniform(-limit, limit, size=fan_in * fan_out))
        parts.append(np.zeros(fan_out))
    return np.concatenate(parts)


def _softplus(z, xp):
    return xp.logaddexp(0.0, z)


def _sigmoid(z, xp):
    return 0.5 * (xp.tanh(0.5 * z) + 1.0)


def _unpack(spec, theta, xp):
    layers = []
    offset = 0
    for fan_in, fan_out in spec.layer_dims():
        w = xp.reshape(theta[offset : offset + fan_in * fan_out], (fan_out, fan_in))
        offset += fan_in * fan_out
        b = theta[offset : offset + fan_out]
        offset += fan_out
        layers.append((w, b))
    return layers


def eval_rate(spec: NeuralRateSpec, theta, x, xp=np):
    """Evaluate the rate net at input vector ``x``; returns a scalar.

    Works under both numpy and jax.numpy (``xp``), so the same code path
    is used for plain evaluation and for tracing inside the fitted loss.
    """
    x = xp.asarray(x)
    if x.ndim != 1 or x.shape[0] != spec.input_dim:
        raise ValueError(
            f"expected input of length {spec.input_dim}, got shape {x.shape}"
        )
    theta = xp.asarray(theta)
    if theta.shape != (param_count(spec),):
        raise ValueError(
            f"expected {param_count(spec)} parameters, got shape {theta.shape}"
        )

    mono = spec.constraint.monotone
    layers = _unpack(spec, theta, xp)
    h = x
    for i, (w, b) in enumerate(layers):
        if mono == "dec":
            w = -_softplus(w, xp)
        elif mono == "inc":
            w = _softplus(w, xp)
        z = w @ h + b
        if i < len(layers) - 1:
            h = _softplus(z, xp)
        elif spec.constraint.bounds is not None:
            lo, hi = spec.constraint.bounds
            h = lo + (hi - lo) * _sigmoid(z, xp)
        else:
            h = _softplus(z, xp)
    return h[0]


def eval_grad_theta(spec: NeuralRateSpec, theta, x) -> np.ndarray:
    """Exact gradient of eval_rate w.r.t. theta (reverse-mode)."""
    from ._jax import jax, jnp

    g = jax.grad(lambda th: eval_rate(spec, th, jnp.asarray(np.asarray(x)), jnp))(
        jnp.asarray(np.asarray(theta, dtype=float))
    )
    return np.asarray(g)
