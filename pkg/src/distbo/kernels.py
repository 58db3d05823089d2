"""Stationary covariance kernels and the jittered Gram factorization.

All kernel math lives here. Distances are lengthscale-weighted per
dimension (ARD); tying all lengthscales recovers the isotropic case.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cholesky

from .errors import NumericalFailure

__all__ = [
    "KernelFamily",
    "KernelSpec",
    "kernel_eval",
    "kernel_matrix",
    "kernel_gram",
    "gram_cholesky",
    "chol_with_jitter",
    "JITTER_START_REL",
    "JITTER_MAX_REL",
]

# Jitter escalation ladder, relative to signal variance: start small,
# multiply by 10 until the factorization succeeds or the cap is hit.
JITTER_START_REL = 1e-10
JITTER_MAX_REL = 1e-4

_SQRT3 = np.sqrt(3.0)
_SQRT5 = np.sqrt(5.0)


class KernelFamily(str, enum.Enum):
    MATERN12 = "matern12"
    MATERN32 = "matern32"
    MATERN52 = "matern52"
    SQUARED_EXPONENTIAL = "squared_exponential"
    RATIONAL_QUADRATIC = "rational_quadratic"


@dataclass(frozen=True)
class KernelSpec:
    """Kernel family plus hyperparameters.

    ``lengthscales`` has one positive entry per input dimension (domain
    units); ``signal_variance`` is the prior variance at zero distance;
    ``rq_shape`` is the shape parameter of the rational-quadratic family
    and is ignored by the others.
    """

    family: KernelFamily
    lengthscales: tuple[float, ...]
    signal_variance: float = 1.0
    rq_shape: float = 1.0

    def __post_init__(self):
        family = KernelFamily(self.family)
        ls = tuple(float(v) for v in np.atleast_1d(np.asarray(self.lengthscales, dtype=float)))
        object.__setattr__(self, "family", family)
        object.__setattr__(self, "lengthscales", ls)
        object.__setattr__(self, "signal_variance", float(self.signal_variance))
        object.__setattr__(self, "rq_shape", float(self.rq_shape))
        if len(ls) == 0 or any(not v > 0 for v in ls):
            raise ValueError(f"lengthscales must all be positive, got {ls}")
        if not self.signal_variance > 0:
            raise ValueError(f"signal_variance must be positive, got {self.signal_variance}")
        if family is KernelFamily.RATIONAL_QUADRATIC and not self.rq_shape > 0:
            raise ValueError(f"rq_shape must be positive, got {self.rq_shape}")

    @property
    def dim(self) -> int:
        return len(self.lengthscales)


def _check_dims(spec: KernelSpec, *arrays) -> None:
    for a in arrays:
        if a.shape[-1] != spec.dim:
            raise ValueError(
                f"point dimension {a.shape[-1]} does not match kernel dimension {spec.dim}"
            )


def _sq_dists(spec: KernelSpec, X: np.ndarray, X2: np.ndarray) -> np.ndarray:
    """Matrix of squared lengthscale-weighted distances, shape (n, m)."""
    ls = np.asarray(spec.lengthscales)
    diff = (X[:, None, :] - X2[None, :, :]) / ls
    return np.einsum("ijk,ijk->ij", diff, diff)


def _from_sq_dist(spec: KernelSpec, r2: np.ndarray) -> np.ndarray:
    """Covariance values from squared scaled distances."""
    sv = spec.signal_variance
    fam = spec.family
    if fam is KernelFamily.SQUARED_EXPONENTIAL:
        return sv * np.exp(-0.5 * r2)
    if fam is KernelFamily.RATIONAL_QUADRATIC:
        a = spec.rq_shape
        return sv * (1.0 + r2 / (2.0 * a)) ** (-a)
    r = np.sqrt(r2)
    if fam is KernelFamily.MATERN12:
        return sv * np.exp(-r)
    if fam is KernelFamily.MATERN32:
        return sv * (1.0 + _SQRT3 * r) * np.exp(-_SQRT3 * r)
    if fam is KernelFamily.MATERN52:
        return sv * (1.0 + _SQRT5 * r + (5.0 / 3.0) * r2) * np.exp(-_SQRT5 * r)
    raise ValueError(f"unknown kernel family {fam!r}")  # pragma: no cover


def kernel_eval(spec: KernelSpec, x, x2) -> float:
    """Covariance k(x, x2); symmetric in its arguments.

    Value lies in (0, signal_variance], equal to signal_variance at zero
    distance.
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    x2 = np.asarray(x2, dtype=float).reshape(-1)
    if x.shape != x2.shape:
        raise ValueError(f"point dimensions differ: {x.shape} vs {x2.shape}")
    _check_dims(spec, x)
    d = (x - x2) / np.asarray(spec.lengthscales)
    r2 = float(np.dot(d, d))
    return float(_from_sq_dist(spec, np.asarray(r2)))


def kernel_matrix(spec: KernelSpec, X, X2=None) -> np.ndarray:
    """Cross-covariance matrix [k(x_i, x2_j)], no noise on the diagonal."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    X2 = X if X2 is None else np.atleast_2d(np.asarray(X2, dtype=float))
    _check_dims(spec, X, X2)
    return _from_sq_dist(spec, _sq_dists(spec, X, X2))


def chol_with_jitter(K: np.ndarray, scale: float, jitter: float = 0.0):
    """Lower Cholesky factor of K + jitter*I, escalating jitter on failure.

    Tries the given jitter first; on failure walks the ladder
    ``scale * [1e-10 .. 1e-4]`` in decade steps. Returns ``(L, jitter_used)``
    or raises NumericalFailure carrying the final jitter tried.
    """
    n = K.shape[0]
    eye = np.eye(n)
    ladder = [jitter]
    step = scale * JITTER_START_REL
    while step <= scale * JITTER_MAX_REL * (1.0 + 1e-12):
        if step > jitter:
            ladder.append(step)
        step *= 10.0
    tried = jitter
    for j in ladder:
        tried = j
        try:
            L = cholesky(K + j * eye, lower=True)
        except np.linalg.LinAlgError:
            continue
        if np.all(np.isfinite(L)):
            return L, j
    raise NumericalFailure(
        f"Cholesky factorization failed for {n}x{n} matrix after jitter escalation "
        f"(final jitter {tried:g})",
        jitter=tried,
    )


def gram_cholesky(spec: KernelSpec, X, noise_variance: float = 0.0, jitter: float = 0.0):
    """Gram matrix of X with noise and jitter, plus its Cholesky factor.

    Returns ``(K, L, jitter_used)`` where K includes the noise and the
    escalated jitter on its diagonal and L is its lower Cholesky factor.
    """
    if noise_variance < 0:
        raise ValueError(f"noise_variance must be >= 0, got {noise_variance}")
    X = np.atleast_2d(np.asarray(X, dtype=float))
    K0 = kernel_matrix(spec, X) + noise_variance * np.eye(X.shape[0])
    L, used = chol_with_jitter(K0, spec.signal_variance, jitter)
    return K0 + used * np.eye(X.shape[0]), L, used


def kernel_gram(spec: KernelSpec, X, noise_variance: float = 0.0, jitter: float = 0.0) -> np.ndarray:
    """Gram matrix K + (noise_variance + jitter)*I, verified factorizable.

    The jitter actually applied may be larger than requested if the
    factorization needed escalation (duplicate rows, tiny lengthscales).
    """
    K, _, _ = gram_cholesky(spec, X, noise_variance, jitter)
    return K
