"""Axis-aligned search domains and low-discrepancy point sets."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import qmc

from .errors import ConfigurationError

__all__ = ["Box", "make_ld_table", "ld_points", "uniform_in_box"]


@dataclass(frozen=True)
class Box:
    """Axis-aligned box in R^d, the search domain for one problem.

    ``lower`` and ``upper`` are per-dimension bounds with lower <= upper.
    Zero-width dimensions are allowed (degenerate domains collapse to a
    point along that axis).
    """

    lower: tuple[float, ...]
    upper: tuple[float, ...]

    def __post_init__(self):
        lo = tuple(float(v) for v in self.lower)
        hi = tuple(float(v) for v in self.upper)
        if len(lo) != len(hi):
            raise ValueError("lower and upper must have equal length")
        if len(lo) == 0:
            raise ValueError("domain must have at least one dimension")
        if any(h < l for l, h in zip(lo, hi)):
            raise ValueError(f"upper < lower in box: {lo} .. {hi}")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def dim(self) -> int:
        return len(self.lower)

    @property
    def lo(self) -> np.ndarray:
        return np.asarray(self.lower, dtype=float)

    @property
    def hi(self) -> np.ndarray:
        return np.asarray(self.upper, dtype=float)

    @property
    def width(self) -> np.ndarray:
        return self.hi - self.lo

    def contains(self, x, rtol: float = 0.0) -> bool:
        """True when x lies inside the box (with optional per-axis slack)."""
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            return False
        slack = rtol * np.maximum(self.width, 1.0)
        return bool(np.all(x >= self.lo - slack) and np.all(x <= self.hi + slack))

    def clip(self, x) -> np.ndarray:
        return np.clip(np.asarray(x, dtype=float), self.lo, self.hi)

    def from_unit(self, u) -> np.ndarray:
        """Map points in [0,1]^d to the box."""
        u = np.asarray(u, dtype=float)
        return self.lo + u * self.width


def _sobol_block(dim: int, n: int, scramble: bool, seed, skip: int = 0) -> np.ndarray:
    # Draw a power-of-two block and slice: keeps Sobol balance (no scipy
    # warning) and preserves the prefix property across different n.
    if isinstance(seed, np.random.SeedSequence):
        seed = np.random.default_rng(seed)
    eng = qmc.Sobol(d=dim, scramble=scramble, seed=seed)
    total = n + skip
    m = max(1, int(np.ceil(np.log2(total))))
    pts = eng.random_base2(m)
    return pts[skip : skip + n]


def make_ld_table(dim: int, n: int, seed=None) -> np.ndarray:
    """Precompute a Sobol table of n rows over [0,1]^dim.

    With seed None the table is the plain Sobol sequence with the leading
    all-zeros element dropped, so row 0 is the midpoint. A seed applies
    Owen scrambling, giving a different (but still low-discrepancy and
    prefix-stable) table per seed.
    """
    if n < 1:
        raise ConfigurationError(f"table length must be >= 1, got {n}")
    if seed is None:
        return _sobol_block(dim, n, scramble=False, seed=None, skip=1)
    return _sobol_block(dim, n, scramble=True, seed=seed)


def ld_points(box: Box, n: int, seed) -> np.ndarray:
    """A fresh scrambled-Sobol point set of n rows scaled to the box.

    Same seed and larger n yields a superset (Sobol streams are
    prefix-stable), which keeps grid-based range estimates monotone in n.
    """
    return box.from_unit(_sobol_block(box.dim, n, scramble=True, seed=seed))


def uniform_in_box(box: Box, rng: np.random.Generator, n: int | None = None) -> np.ndarray:
    """Uniform draw(s) in the box: one point when n is None, else (n, d)."""
    size = (box.dim,) if n is None else (n, box.dim)
    return box.lo + rng.random(size) * box.width
