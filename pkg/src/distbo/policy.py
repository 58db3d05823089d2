"""Query-selection policies: Boltzmann sampling, greedy argmax, Thompson.

The stochastic policy draws the next query from a density proportional to
exp(beta * acquisition(x)) over the domain box. The draw is produced by a
Metropolis-Hastings chain with a Gaussian-mixture random-walk proposal;
only unnormalized log densities are ever evaluated, and acceptance works
on beta-scaled differences so large beta never overflows. beta itself
follows either a fixed value or the GLIE schedule ln(t) / C_t, where C_t
is the acquisition range estimate.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .acquisition import AcquisitionSpec, Incumbent, acquisition_value, acquisition_values
from .space import Box, ld_points, uniform_in_box
from .surrogate import GPModel, posterior_sample_at

__all__ = [
    "ScheduleMode",
    "TemperatureSchedule",
    "MHInit",
    "MHConfig",
    "MHStats",
    "EPSILON_C",
    "glie_beta",
    "boltzmann_sample",
    "boltzmann_sample_with_stats",
    "boltzmann_lattice_chain",
    "greedy_argmax",
    "thompson_select",
    "StochasticPolicy",
    "GreedyPolicy",
    "ThompsonPolicy",
]

# Floor for the C_t denominator: a flat acquisition gives C = 0, where any
# beta yields the uniform distribution anyway.
EPSILON_C = 1e-9

LOW_ACCEPTANCE_RATE = 0.01


class ScheduleMode(str, enum.Enum):
    FIXED = "fixed"
    GLIE = "glie"


@dataclass(frozen=True)
class TemperatureSchedule:
    """Inverse-temperature schedule: a fixed beta or GLIE's ln(t)/C_t."""

    mode: ScheduleMode = ScheduleMode.GLIE
    beta: float = 1.0
    glie_grid_size: int = 1024

    def __post_init__(self):
        object.__setattr__(self, "mode", ScheduleMode(self.mode))
        if self.mode is ScheduleMode.FIXED and not self.beta > 0:
            raise ValueError(f"fixed-mode beta must be positive, got {self.beta}")


class MHInit(str, enum.Enum):
    GREEDY_START = "greedy_start"
    RANDOM_START = "random_start"


@dataclass(frozen=True)
class MHConfig:
    """Metropolis-Hastings chain settings.

    The proposal is a mixture of isotropic Gaussian steps whose standard
    deviations are ``proposal_scales`` fractions of the domain width per
    dimension, mixed with ``proposal_weights``. Proposals outside the box
    are rejected (the target is zero there), preserving detailed balance.
    """

    chain_length: int = 500
    burn_in: int = 100
    proposal_weights: tuple[float, ...] = (0.5, 0.5)
    proposal_scales: tuple[float, ...] = (0.1, 0.01)
    init: MHInit = MHInit.GREEDY_START
    greedy_restarts: int = 4

    def __post_init__(self):
        object.__setattr__(self, "init", MHInit(self.init))
        object.__setattr__(self, "proposal_weights", tuple(float(w) for w in self.proposal_weights))
        object.__setattr__(self, "proposal_scales", tuple(float(s) for s in self.proposal_scales))
        if len(self.proposal_weights) != len(self.proposal_scales):
            raise ValueError("proposal_weights and proposal_scales must have equal length")
        if abs(sum(self.proposal_weights) - 1.0) > 1e-9:
            raise ValueError(f"proposal weights must sum to 1, got {self.proposal_weights}")
        if any(not s > 0 for s in self.proposal_scales):
            raise ValueError("proposal scales must be positive")
        if not 0 <= self.burn_in < self.chain_length:
            raise ValueError("burn_in must satisfy 0 <= burn_in < chain_length")


@dataclass(frozen=True)
class MHStats:
    acceptance_rate: float
    low_acceptance: bool


def _seedseq(seed) -> np.random.SeedSequence:
    return seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)


def glie_beta(t: int, C: float) -> float:
    """GLIE inverse temperature ln(t) / max(C, epsilon).

    t = 1 gives beta = 0 exactly, i.e. the uniform sampling distribution.
    """
    if t < 1:
        raise ValueError(f"t must be >= 1, got {t}")
    if C < 0:
        raise ValueError(f"C must be >= 0, got {C}")
    return math.log(t) / max(C, EPSILON_C)


def _pick_component(rng: np.random.Generator, cum_weights: np.ndarray) -> int:
    return int(np.searchsorted(cum_weights, rng.random(), side="right"))


def _mh_continuous(log_target, x0, domain: Box, mh: MHConfig, rng) -> tuple[np.ndarray, MHStats]:
    """Random-walk MH over the box; returns the final state and burn-in stats."""
    cum = np.cumsum(mh.proposal_weights)
    scales = [s * domain.width for s in mh.proposal_scales]
    x = np.asarray(x0, dtype=float).copy()
    lx = log_target(x)
    accepted = 0
    for step in range(mh.chain_length):
        comp = _pick_component(rng, cum)
        prop = x + rng.standard_normal(domain.dim) * scales[comp]
        log_u = math.log(rng.random())
        if domain.contains(prop):
            lp = log_target(prop)
            if log_u < lp - lx:
                x, lx = prop, lp
                if step < mh.burn_in:
                    accepted += 1
    denom = max(mh.burn_in, 1)
    rate = accepted / denom
    return x, MHStats(acceptance_rate=rate, low_acceptance=rate < LOW_ACCEPTANCE_RATE)


def boltzmann_sample_with_stats(
    model: GPModel,
    spec: AcquisitionSpec,
    inc: Incumbent,
    beta: float,
    domain: Box,
    mh: MHConfig,
    seed,
) -> tuple[np.ndarray, MHStats]:
    """Like boltzmann_sample but also returns chain diagnostics."""
    if beta < 0:
        raise ValueError(f"beta must be >= 0, got {beta}")
    root = _seedseq(seed)
    s_init, s_chain = root.spawn(2)
    rng = np.random.default_rng(s_chain)
    if beta == 0.0:
        # Exactly the target distribution: zero inverse temperature makes
        # the density uniform over the box regardless of the model.
        return uniform_in_box(domain, rng), MHStats(acceptance_rate=1.0, low_acceptance=False)
    if mh.init is MHInit.GREEDY_START:
        x0 = greedy_argmax(model, spec, inc, domain, restarts=mh.greedy_restarts, seed=s_init)
    else:
        x0 = uniform_in_box(domain, np.random.default_rng(s_init))

    def log_target(x):
        return beta * acquisition_value(model, spec, inc, x)

    return _mh_continuous(log_target, x0, domain, mh, rng)


def boltzmann_sample(
    model: GPModel,
    spec: AcquisitionSpec,
    inc: Incumbent,
    beta: float,
    domain: Box,
    mh: MHConfig,
    seed,
) -> np.ndarray:
    """One approximate draw from the density proportional to exp(beta * acq).

    Deterministic given the seed. Chains whose burn-in acceptance rate
    falls below 1% still return; callers wanting the diagnostic flag use
    boltzmann_sample_with_stats.
    """
    x, _ = boltzmann_sample_with_stats(model, spec, inc, beta, domain, mh, seed)
    return x


def boltzmann_lattice_chain(
    values: np.ndarray,
    beta: float,
    mh: MHConfig,
    seed,
    n_draws: int | None = None,
) -> tuple[np.ndarray, MHStats]:
    """Test-harness mode: the same chain restricted to a fixed 1-d lattice.

    ``values`` holds the acquisition at each lattice point (assumed evenly
    spaced over the domain). Proposal steps are the continuous Gaussian
    mixture rounded to whole lattice cells; off-lattice proposals are
    rejected. Returns the post-burn-in walk as index draws, plus stats.
    beta = 0 short-circuits to exact iid uniform indices.
    """
    values = np.asarray(values, dtype=float)
    n = len(values)
    draws = (mh.chain_length - mh.burn_in) if n_draws is None else int(n_draws)
    rng = np.random.default_rng(seed)
    if beta == 0.0:
        idx = rng.integers(0, n, size=draws)
        return idx, MHStats(acceptance_rate=1.0, low_acceptance=False)
    cum = np.cumsum(mh.proposal_weights)
    # Scales are fractions of the domain width = (n - 1) lattice cells.
    scales = [max(s * (n - 1), 1e-12) for s in mh.proposal_scales]
    log_v = beta * values
    i = int(np.argmax(values)) if mh.init is MHInit.GREEDY_START else int(rng.integers(0, n))
    total = mh.burn_in + draws
    out = np.empty(draws, dtype=np.int64)
    accepted = 0
    for step in range(total):
        comp = _pick_component(rng, cum)
        j = i + int(round(rng.standard_normal() * scales[comp]))
        log_u = math.log(rng.random())
        if 0 <= j < n and log_u < log_v[j] - log_v[i]:
            i = j
            if step < mh.burn_in:
                accepted += 1
        if step >= mh.burn_in:
            out[step - mh.burn_in] = i
    denom = max(mh.burn_in, 1)
    rate = accepted / denom
    return out, MHStats(acceptance_rate=rate, low_acceptance=rate < LOW_ACCEPTANCE_RATE)


def greedy_argmax(
    model: GPModel,
    spec: AcquisitionSpec,
    inc: Incumbent,
    domain: Box,
    restarts: int = 8,
    seed=0,
) -> np.ndarray:
    """Multistart maximization of the acquisition over the box.

    Each scrambled-Sobol start is refined by coordinate ascent with a
    geometrically shrinking step. Ties across restarts go to the lowest
    start index, so the result is deterministic given the seed.
    """
    if restarts < 1:
        raise ValueError(f"restarts must be >= 1, got {restarts}")
    starts = ld_points(domain, restarts, seed=np.random.default_rng(seed))
    width = domain.width
    lo, hi = domain.lo, domain.hi
    d = domain.dim
    best_x, best_v = None, -np.inf
    for x0 in starts:
        x = np.asarray(x0, dtype=float)
        v = float(acquisition_values(model, spec, inc, x.reshape(1, -1))[0])
        step = 0.25
        iters = 0
        while step > 1e-9 and iters < 1000:
            iters += 1
            # Pattern search: probe +/- step along each axis in one batch,
            # move to the best improving candidate, shrink when stuck.
            cands = np.repeat(x.reshape(1, -1), 2 * d, axis=0)
            offsets = step * width
            for j in range(d):
                cands[2 * j, j] = min(x[j] + offsets[j], hi[j])
                cands[2 * j + 1, j] = max(x[j] - offsets[j], lo[j])
            vals = acquisition_values(model, spec, inc, cands)
            k = int(np.argmax(vals))
            if vals[k] > v and not np.array_equal(cands[k], x):
                x = cands[k]
                v = float(vals[k])
            else:
                step *= 0.5
        if v > best_v:
            best_x, best_v = x, v
    return best_x


def thompson_select(model: GPModel, domain: Box, grid_size: int, seed) -> np.ndarray:
    """Smallest value of one joint posterior sample over a fresh Sobol grid."""
    if grid_size < 1:
        raise ValueError(f"grid_size must be >= 1, got {grid_size}")
    root = _seedseq(seed)
    s_grid, s_sample = root.spawn(2)
    grid = ld_points(domain, grid_size, seed=np.random.default_rng(s_grid))
    sample = posterior_sample_at(model, grid, seed=s_sample)
    return grid[int(np.argmin(sample))]


@dataclass(frozen=True)
class StochasticPolicy:
    """Boltzmann node policy: acquisition + temperature schedule + chain."""

    acquisition: AcquisitionSpec
    schedule: TemperatureSchedule = TemperatureSchedule()
    mh: MHConfig = MHConfig()


@dataclass(frozen=True)
class GreedyPolicy:
    """Deterministic argmax policy (the sequential baseline)."""

    acquisition: AcquisitionSpec
    restarts: int = 8


@dataclass(frozen=True)
class ThompsonPolicy:
    """Posterior-sample argmin policy (the distributed Thompson baseline)."""

    grid_size: int = 512
