"""Per-slot observation distributions.

A periodic stream is described slot by slot; each slot carries one scalar
distribution, either Gaussian or Poisson.  Everything downstream (likelihood
ratios, detector recursions, information numbers) is built from the three
primitives here: log density evaluation, sampling, and closed-form
Kullback-Leibler divergence.  All likelihood arithmetic stays in the log
domain so that products over hundreds of slots never underflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

_LN_2PI = math.log(2.0 * math.pi)

# Floors applied by the fitting pipeline only; direct construction with a
# non-positive parameter is always an error.
FITTED_VARIANCE_FLOOR = 1e-8
FITTED_RATE_FLOOR = 1e-6


@dataclass(frozen=True)
class Gaussian:
    """Normal slot distribution with the given mean and variance."""

    mean: float
    variance: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "mean", float(self.mean))
        object.__setattr__(self, "variance", float(self.variance))
        if not math.isfinite(self.mean):
            raise ValueError("Gaussian mean must be finite")
        if not (math.isfinite(self.variance) and self.variance > 0.0):
            raise ValueError(f"Gaussian variance must be > 0, got {self.variance}")

    def log_density(self, x: float) -> float:
        x = float(x)
        if not math.isfinite(x):
            raise ValueError(f"observation must be finite, got {x}")
        return -0.5 * (_LN_2PI + math.log(self.variance)) - (x - self.mean) ** 2 / (2.0 * self.variance)

    def sample(self, rng: np.random.Generator, size: int | None = None):
        return rng.normal(self.mean, math.sqrt(self.variance), size)


@dataclass(frozen=True)
class Poisson:
    """Poisson slot distribution supported on the nonnegative integers."""

    rate: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "rate", float(self.rate))
        if not (math.isfinite(self.rate) and self.rate > 0.0):
            raise ValueError(f"Poisson rate must be > 0, got {self.rate}")

    def log_density(self, x: float) -> float:
        x = float(x)
        if not math.isfinite(x):
            raise ValueError(f"observation must be finite, got {x}")
        if x < 0.0 or not x.is_integer():
            raise ValueError(f"Poisson support is the nonnegative integers, got {x}")
        return x * math.log(self.rate) - self.rate - math.lgamma(x + 1.0)

    def sample(self, rng: np.random.Generator, size: int | None = None):
        draw = rng.poisson(self.rate, size)
        if size is None:
            return float(draw)
        return np.asarray(draw, dtype=float)


SlotDensity = Union[Gaussian, Poisson]


def log_density(d: SlotDensity, x: float) -> float:
    """Natural-log density (or pmf) of ``d`` at ``x``."""
    return d.log_density(x)


def llr(g: SlotDensity, f: SlotDensity, x: float) -> float:
    """Log-likelihood ratio log g(x)/f(x).

    Implemented as the difference of the two log densities, so
    ``llr(g, f, x) == -llr(f, g, x)`` holds exactly in floating point.
    """
    return g.log_density(x) - f.log_density(x)


def sample(d: SlotDensity, rng: np.random.Generator, size: int | None = None):
    """Draw from ``d`` using ``rng``; deterministic given the generator state."""
    return d.sample(rng, size)


def kl(g: SlotDensity, f: SlotDensity) -> float:
    """Kullback-Leibler divergence D(g || f), in nats, by closed form.

    Only within-family pairs are defined.  Gaussian:
    ``log(sf/sg) + (vg + (mg-mf)^2) / (2 vf) - 1/2``.  Poisson:
    ``lg log(lg/lf) + lf - lg``.
    """
    if isinstance(g, Gaussian) and isinstance(f, Gaussian):
        diff = g.mean - f.mean
        return 0.5 * (math.log(f.variance / g.variance) + (g.variance + diff * diff) / f.variance - 1.0)
    if isinstance(g, Poisson) and isinstance(f, Poisson):
        return g.rate * math.log(g.rate / f.rate) + f.rate - g.rate
    raise ValueError(
        f"KL divergence is defined within one family only, got {type(g).__name__} vs {type(f).__name__}"
    )


def density_to_dict(d: SlotDensity) -> dict:
    if isinstance(d, Gaussian):
        return {"type": "gaussian", "mean": d.mean, "variance": d.variance}
    if isinstance(d, Poisson):
        return {"type": "poisson", "rate": d.rate}
    raise TypeError(f"not a slot density: {d!r}")


def density_from_dict(obj: dict) -> SlotDensity:
    kind = obj.get("type")
    if kind == "gaussian":
        return Gaussian(mean=obj["mean"], variance=obj["variance"])
    if kind == "poisson":
        return Poisson(rate=obj["rate"])
    raise ValueError(f"unknown density type: {kind!r}")
