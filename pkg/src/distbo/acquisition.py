"""Closed-form acquisition functions over the GP posterior.

Everything here uses the minimization convention: the incumbent rho is the
lowest observed target value, improvement means going below it, and UCB is
written as -mu + kappa*sigma so that larger acquisition values always mark
more attractive query points.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .space import Box, ld_points
from .surrogate import Dataset, GPModel, posterior_batch

__all__ = [
    "AcquisitionKind",
    "AcquisitionSpec",
    "Incumbent",
    "incumbent_of",
    "ei",
    "pi",
    "ucb",
    "ucb_kappa_schedule",
    "acquisition_value",
    "acquisition_values",
    "acquisition_range",
]

_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


class AcquisitionKind(str, enum.Enum):
    EI = "ei"
    PI = "pi"
    UCB = "ucb"


@dataclass(frozen=True)
class AcquisitionSpec:
    """Which acquisition to use and its parameters.

    ``xi`` is the PI/EI improvement margin in objective units (default 0).
    ``kappa`` is the fixed UCB weight; ``kappa_schedule=True`` replaces it
    with the slowly growing sqrt(2 log(t^2 pi^2 / (3 delta))) schedule.
    """

    kind: AcquisitionKind
    xi: float = 0.0
    kappa: float = 2.0
    kappa_schedule: bool = False
    schedule_delta: float = 0.1

    def __post_init__(self):
        object.__setattr__(self, "kind", AcquisitionKind(self.kind))
        if self.xi < 0:
            raise ValueError(f"xi must be >= 0, got {self.xi}")
        if not self.kappa_schedule and not self.kappa > 0:
            raise ValueError(f"kappa must be positive, got {self.kappa}")


@dataclass(frozen=True)
class Incumbent:
    """Best observed value so far (minimization) and the point attaining it."""

    rho: float
    x_best: tuple[float, ...] | None


def incumbent_of(data: Dataset) -> Incumbent:
    """Incumbent of a dataset; ties broken by canonical record order.

    An empty dataset gets rho = 0 (the standardized prior mean), which
    makes prior-only acquisition values finite and constant.
    """
    best = None
    for rec in data.canonical():
        if best is None or rec.y < best.y:
            best = rec
    if best is None:
        return Incumbent(rho=0.0, x_best=None)
    return Incumbent(rho=best.y, x_best=best.x)


def _phi(z):
    return _INV_SQRT_2PI * np.exp(-0.5 * np.square(z))


def ei(mu, sigma, rho, xi=0.0):
    """Expected improvement below rho - xi for a N(mu, sigma^2) prediction.

    sigma = 0 degenerates to max(0, rho - xi - mu). Vectorizes over numpy
    inputs; scalars in, scalar out.
    """
    mu = np.asarray(mu, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    if np.any(sigma < 0):
        raise ValueError("sigma must be >= 0")
    gap = rho - xi - mu
    safe = np.where(sigma > 0, sigma, 1.0)
    z = gap / safe
    value = np.where(sigma > 0, gap * ndtr(z) + sigma * _phi(z), np.maximum(gap, 0.0))
    value = np.maximum(value, 0.0)
    return float(value) if value.ndim == 0 else value


def pi(mu, sigma, rho, xi=0.0):
    """Probability that a N(mu, sigma^2) prediction lands below rho - xi."""
    mu = np.asarray(mu, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    if np.any(sigma < 0):
        raise ValueError("sigma must be >= 0")
    gap = rho - xi - mu
    safe = np.where(sigma > 0, sigma, 1.0)
    value = np.where(sigma > 0, ndtr(gap / safe), (gap > 0).astype(float))
    return float(value) if value.ndim == 0 else value


def ucb(mu, sigma, kappa):
    """Optimistic lower-bound score -mu + kappa*sigma (larger = better query)."""
    if not kappa > 0:
        raise ValueError(f"kappa must be positive, got {kappa}")
    mu = np.asarray(mu, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    if np.any(sigma < 0):
        raise ValueError("sigma must be >= 0")
    value = -mu + kappa * sigma
    return float(value) if value.ndim == 0 else value


def ucb_kappa_schedule(t: int, delta: float = 0.1) -> float:
    """Slowly growing confidence weight sqrt(2 log(t^2 pi^2 / (3 delta)))."""
    t = max(int(t), 1)
    return float(np.sqrt(2.0 * np.log(t * t * np.pi**2 / (3.0 * delta))))


def _kappa_for(model: GPModel, spec: AcquisitionSpec) -> float:
    if spec.kappa_schedule:
        return ucb_kappa_schedule(max(model.n, 1), spec.schedule_delta)
    return spec.kappa


def acquisition_values(model: GPModel, spec: AcquisitionSpec, inc: Incumbent, X) -> np.ndarray:
    """Acquisition at each row of X: posterior then the scalar form."""
    mu, var = posterior_batch(model, X)
    sigma = np.sqrt(var)
    if spec.kind is AcquisitionKind.EI:
        return np.asarray(ei(mu, sigma, inc.rho, spec.xi))
    if spec.kind is AcquisitionKind.PI:
        return np.asarray(pi(mu, sigma, inc.rho, spec.xi))
    return np.asarray(ucb(mu, sigma, _kappa_for(model, spec)))


def acquisition_value(model: GPModel, spec: AcquisitionSpec, inc: Incumbent, x) -> float:
    values = acquisition_values(model, spec, inc, np.asarray(x, dtype=float).reshape(1, -1))
    return float(values[0])


def acquisition_range(
    model: GPModel,
    spec: AcquisitionSpec,
    inc: Incumbent,
    domain: Box,
    grid_size: int = 1024,
    seed=0,
) -> float:
    """Spread (max - min) of the acquisition over a low-discrepancy grid.

    The grid is a seeded scrambled-Sobol set of ``grid_size`` points plus
    every observed point, so the estimate never misses the incumbent
    region and is monotone in grid_size for a fixed seed.
    """
    if grid_size < 2:
        raise ValueError(f"grid_size must be >= 2, got {grid_size}")
    grid = ld_points(domain, grid_size, seed=seed)
    if model.n > 0:
        grid = np.vstack([grid, model.X])
    values = acquisition_values(model, spec, inc, grid)
    return float(values.max() - values.min())
