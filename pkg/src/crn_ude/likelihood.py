"""Proportional-noise Gaussian data model and the fitting objective's parts.

Measurements of a species value X are drawn from Normal(X, sigma * X)
with a known, experiment-global sigma.  Because that law degenerates as
X -> 0, the standard deviation is floored at 1e-6 * max(1, |X|) both
when generating data and inside the likelihood; the floor is explicit
rather than hidden in solver tolerances.

The likelihood's standard deviation uses the *predicted* species value
(consistent with the generative model), not the measurement.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass, field

import numpy as np

from .integrate import IntegratorConfig, integrate, sample
from .network import ReactionNetwork, assemble_rhs

__all__ = [
    "STD_FLOOR",
    "Dataset",
    "FitProblem",
    "noise_std",
    "generate_dataset",
    "gaussian_nll",
    "ground_truth_loss",
]

STD_FLOOR = 1e-6

_LOG_2PI = float(np.log(2.0 * np.pi))


def noise_std(x, sigma, xp=np):
    """Std of the measurement noise at true/predicted value ``x``, floored."""
    x = xp.asarray(x)
    return xp.maximum(sigma * x, STD_FLOOR * xp.maximum(1.0, xp.abs(x)))


@dataclass(frozen=True)
class Dataset:
    times: np.ndarray  # N evenly spaced sample times
    species: tuple  # measured species names
    values: np.ndarray  # (N, len(species)) noisy measurements
    sigma: float
    seed: int | None = None
    model_id: str | None = None

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")
        if self.values.shape != (len(self.times), len(self.species)):
            raise ValueError("values shape does not match times x species")

    def to_json(self) -> str:
        return json.dumps(
            {
                "times": self.times.tolist(),
                "species": list(self.species),
                "values": self.values.tolist(),
                "sigma": self.sigma,
                "seed": self.seed,
                "model_id": self.model_id,
            },
            indent=2,
        )

    @classmethod
    def from_json(cls, text: str) -> "Dataset":
        obj = json.loads(text)
        return cls(
            times=np.asarray(obj["times"], dtype=float),
            species=tuple(obj["species"]),
            values=np.asarray(obj["values"], dtype=float),
            sigma=obj["sigma"],
            seed=obj.get("seed"),
            model_id=obj.get("model_id"),
        )

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("t," + ",".join(self.species) + "\n")
        for t, row in zip(self.times, self.values):
            buf.write(
                f"{float(t)!r}," + ",".join(repr(float(v)) for v in row) + "\n"
            )
        return buf.getvalue()


def generate_dataset(bundle, n, sigma, measured, seed, cfg: IntegratorConfig = None) -> Dataset:
    """Simulate the bundle's ground truth and add proportional noise.

    ``bundle`` needs .network-like ground truth access: see zoo.ModelBundle.
    Deterministic per seed.
    """
    if n < 2:
        raise ValueError("need at least two sample points")
    traj = bundle.simulate_truth(cfg)
    times = np.linspace(bundle.tspan[0], bundle.tspan[1], n)
    measured = tuple(measured)
    idx = [bundle.truth_network.species_index(name) for name in measured]
    truth = sample(traj, times)[:, idx]
    rng = np.random.default_rng(seed)
    values = truth + noise_std(truth, sigma) * rng.standard_normal(truth.shape)
    return Dataset(
        times=times,
        species=measured,
        values=values,
        sigma=float(sigma),
        seed=seed,
        model_id=bundle.id,
    )


def gaussian_nll(predictions, data: Dataset, xp=np):
    """Negative log likelihood of the data given model predictions.

    Additive over points; any nonfinite prediction yields +inf (an
    ordinary value, so optimizers can skip divergent parameter sets).
    """
    predictions = xp.asarray(predictions)
    with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
        std = noise_std(predictions, data.sigma, xp)
        r = (data.values - predictions) / std
        nll = xp.sum(0.5 * r**2 + 0.5 * (_LOG_2PI + 2.0 * xp.log(std)))
        return xp.where(xp.all(xp.isfinite(predictions)), nll, xp.inf)


def ground_truth_loss(bundle, data: Dataset, cfg: IntegratorConfig = None) -> float:
    """NLL at the ground-truth simulation: the multistart acceptance bar."""
    traj = bundle.simulate_truth(cfg)
    idx = [bundle.truth_network.species_index(name) for name in data.species]
    preds = sample(traj, data.times)[:, idx]
    return float(gaussian_nll(preds, data))


@dataclass
class FitProblem:
    """One model-to-data fitting task.

    Mechanistic parameters are optimized on log scale (which also keeps
    them positive); neural parameters are left untransformed.  The
    flattened order is mechanistic parameters in declaration order, then
    one theta block per neural slot.  Initial conditions are known
    constants.  Optional per-parameter bounds (model scale) are enforced
    with a quadratic loss penalty.
    """

    network: ReactionNetwork
    dataset: Dataset
    u0: np.ndarray
    tspan: tuple
    bounds: dict = field(default_factory=dict)  # param name -> (lo, hi)
    threshold: float | None = None  # ground-truth loss when provenance is known
    fixed: dict = field(default_factory=dict)  # param name -> pinned model-scale value

    def __post_init__(self):
        self.u0 = np.asarray(self.u0, dtype=float)
        if self.u0.shape != (len(self.network.species),):
            raise ValueError("u0 length must equal species count")
        self._sys = assemble_rhs(self.network)
        self._measured_idx = [
            self.network.species_index(name) for name in self.dataset.species
        ]

    @property
    def ode_system(self):
        return self._sys

    def n_params(self):
        return self.network.n_params()

    def n_mechanistic(self):
        return self.network.n_mechanistic()

    def to_working(self, model_params):
        p = np.array(model_params, dtype=float)
        m = self.n_mechanistic()
        out = p.copy()
        out[:m] = np.log(p[:m])
        return out

    def to_model(self, working, xp=np):
        w = xp.asarray(working)
        m = self.n_mechanistic()
        return xp.concatenate([xp.exp(w[:m]), w[m:]])

    def simulate(self, model_params, cfg: IntegratorConfig = None):
        return integrate(self._sys, self.u0, self.tspan, model_params, cfg)

    def predictions(self, model_params, cfg: IntegratorConfig = None):
        traj = self.simulate(model_params, cfg)
        return sample(traj, self.dataset.times)[:, self._measured_idx]
