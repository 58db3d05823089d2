"""Gaussian-process surrogate: datasets, posterior inference, fitting, sampling.

The posterior mean and variance at a query point x_q follow the standard
zero-mean GP equations

    mu(x_q)     = k(x_q)^T K^{-1} y
    sigma2(x_q) = k(x_q, x_q) - k(x_q)^T K^{-1} k(x_q)

with K the Gram matrix of the observed inputs plus noise on the diagonal.
Targets are standardized (mean removed, scaled by the standard deviation)
before inference by default, and the transform is inverted on outputs, so
the zero-mean prior assumption holds for objectives with large offsets.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve, solve_triangular

from .errors import NumericalFailure, ProtocolViolation
from .kernels import KernelFamily, KernelSpec, chol_with_jitter, gram_cholesky, kernel_matrix
from .space import Box, ld_points

__all__ = [
    "ObservationRecord",
    "Dataset",
    "GPModel",
    "FitConfig",
    "FitResult",
    "build_model",
    "posterior",
    "posterior_batch",
    "log_marginal_likelihood",
    "fit_hyperparameters",
    "default_kernel_spec",
    "posterior_sample_at",
    "sample_objective",
]

# Posterior variances more negative than this (relative to the prior
# variance) indicate a real numerical problem rather than float dust.
_NEG_VAR_TOL = 1e-8


@dataclass(frozen=True, order=True)
class ObservationRecord:
    """One evaluated query: the unit of broadcast and deduplication.

    ``(node_id, seq)`` is the identity key; records with equal keys must
    be identical everywhere in the system.
    """

    node_id: int
    seq: int
    x: tuple[float, ...]
    y: float

    def __post_init__(self):
        if self.node_id < 0 or self.seq < 0:
            raise ValueError("node_id and seq must be nonnegative")
        object.__setattr__(self, "x", tuple(float(v) for v in self.x))
        object.__setattr__(self, "y", float(self.y))

    @property
    def key(self) -> tuple[int, int]:
        return (self.node_id, self.seq)


class Dataset:
    """Set of observation records keyed by (node_id, seq), over a domain box.

    Insertion is idempotent for identical duplicates; a key collision with
    a different payload is a protocol violation. All numeric consumers see
    the records in canonical (node_id, seq) order, so the order of
    insertion never affects downstream results.
    """

    def __init__(self, domain: Box):
        self.domain = domain
        self._records: dict[tuple[int, int], ObservationRecord] = {}

    def __len__(self) -> int:
        return len(self._records)

    def __contains__(self, key) -> bool:
        return tuple(key) in self._records

    def insert(self, record: ObservationRecord) -> bool:
        """Insert one record. Returns True when it was new.

        Raises ProtocolViolation on a conflicting duplicate and ValueError
        when the point lies outside the domain box.
        """
        existing = self._records.get(record.key)
        if existing is not None:
            if existing == record:
                return False
            raise ProtocolViolation(
                f"conflicting duplicate for key {record.key}: {existing} vs {record}",
                key=record.key,
            )
        if len(record.x) != self.domain.dim:
            raise ValueError(
                f"record dimension {len(record.x)} does not match domain dimension {self.domain.dim}"
            )
        if not self.domain.contains(record.x, rtol=1e-12):
            raise ValueError(f"point {record.x} outside domain box")
        self._records[record.key] = record
        return True

    def insert_all(self, records) -> int:
        return sum(self.insert(r) for r in records)

    def keys(self) -> frozenset:
        return frozenset(self._records)

    def canonical(self) -> tuple[ObservationRecord, ...]:
        """Records sorted by (node_id, seq); the one ordering used for math."""
        return tuple(sorted(self._records.values(), key=lambda r: r.key))

    def arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """(X, y) in canonical order; X has shape (n, d)."""
        recs = self.canonical()
        if not recs:
            return np.zeros((0, self.domain.dim)), np.zeros(0)
        X = np.array([r.x for r in recs], dtype=float)
        y = np.array([r.y for r in recs], dtype=float)
        return X, y

    def copy(self) -> "Dataset":
        out = Dataset(self.domain)
        out._records = dict(self._records)
        return out


@dataclass(frozen=True)
class GPModel:
    """Immutable fitted-GP snapshot: factorized Gram matrix plus metadata.

    ``chol @ chol.T`` reconstructs the (standardized-scale) Gram matrix;
    ``alpha`` solves K alpha = y_std. Empty models (n == 0) fall back to
    the prior.
    """

    kernel: KernelSpec
    noise_variance: float
    domain: Box
    X: np.ndarray
    y: np.ndarray
    y_mean: float
    y_scale: float
    chol: np.ndarray | None
    alpha: np.ndarray | None
    jitter: float
    records: tuple[ObservationRecord, ...] = ()

    @property
    def n(self) -> int:
        return self.X.shape[0]


def _standardization(y: np.ndarray, standardize: bool) -> tuple[float, float]:
    if not standardize or len(y) == 0:
        return 0.0, 1.0
    mean = float(np.mean(y))
    scale = float(np.std(y)) if len(y) > 1 else 0.0
    if scale <= 1e-300:
        scale = 1.0
    return mean, scale


def build_model(
    kernel: KernelSpec,
    noise_variance: float,
    data: Dataset,
    standardize: bool = True,
) -> GPModel:
    """Factorize the Gram matrix of the dataset into a GPModel snapshot."""
    X, y = data.arrays()
    if X.shape[0] == 0:
        return GPModel(kernel, float(noise_variance), data.domain, X, y, 0.0, 1.0, None, None, 0.0)
    y_mean, y_scale = _standardization(y, standardize)
    y_std = (y - y_mean) / y_scale
    _, L, used = gram_cholesky(kernel, X, noise_variance)
    alpha = cho_solve((L, True), y_std)
    return GPModel(
        kernel=kernel,
        noise_variance=float(noise_variance),
        domain=data.domain,
        X=X,
        y=y,
        y_mean=y_mean,
        y_scale=y_scale,
        chol=L,
        alpha=alpha,
        jitter=used,
        records=data.canonical(),
    )


def posterior_batch(model: GPModel, Xq) -> tuple[np.ndarray, np.ndarray]:
    """Posterior mean and variance at each row of Xq, shapes (m,), (m,)."""
    Xq = np.atleast_2d(np.asarray(Xq, dtype=float))
    if Xq.shape[1] != model.domain.dim:
        raise ValueError(
            f"query dimension {Xq.shape[1]} does not match domain dimension {model.domain.dim}"
        )
    prior_var = model.kernel.signal_variance
    if model.n == 0:
        m = Xq.shape[0]
        return np.zeros(m), np.full(m, prior_var)
    k_cross = kernel_matrix(model.kernel, model.X, Xq)  # (n, m)
    mu_std = k_cross.T @ model.alpha
    v = solve_triangular(model.chol, k_cross, lower=True)
    var_std = prior_var - np.einsum("ij,ij->j", v, v)
    floor = -_NEG_VAR_TOL * max(1.0, prior_var)
    if np.any(var_std < floor):
        raise NumericalFailure(
            f"posterior variance {float(var_std.min()):g} below tolerance {floor:g}",
            jitter=model.jitter,
        )
    var_std = np.maximum(var_std, 0.0)
    mu = model.y_mean + model.y_scale * mu_std
    var = model.y_scale**2 * var_std
    return mu, var


def posterior(model: GPModel, xq) -> tuple[float, float]:
    """Posterior (mean, variance) at one point; the prior when no data."""
    mu, var = posterior_batch(model, np.asarray(xq, dtype=float).reshape(1, -1))
    return float(mu[0]), float(var[0])


def log_marginal_likelihood(kernel: KernelSpec, noise_variance: float, data: Dataset) -> float:
    """Log evidence of the dataset targets under the kernel and noise level.

    Computed through the Cholesky factor:
    -0.5 y^T K^{-1} y - sum(log diag L) - (n/2) log 2 pi.
    """
    X, y = data.arrays()
    if len(y) == 0:
        raise ValueError("log marginal likelihood needs a non-empty dataset")
    return _lml_arrays(kernel, noise_variance, X, y)


def _lml_arrays(kernel: KernelSpec, noise_variance: float, X: np.ndarray, y: np.ndarray) -> float:
    _, L, _ = gram_cholesky(kernel, X, noise_variance)
    alpha = cho_solve((L, True), y)
    n = len(y)
    return float(
        -0.5 * float(y @ alpha) - float(np.sum(np.log(np.diag(L)))) - 0.5 * n * np.log(2.0 * np.pi)
    )


@dataclass(frozen=True)
class FitConfig:
    """Knobs for the multistart hyperparameter search.

    ``fixed=True`` bypasses the search and returns ``fixed_spec`` /
    ``fixed_noise`` unchanged. The search itself is derivative-free:
    8 starts (the incumbent values plus 7 scrambled-Sobol draws in the
    log-bounds box), coordinate descent with golden-section line
    searches, ~100 objective evaluations per start.
    """

    seed: int = 0
    n_starts: int = 8
    evals_per_start: int = 100
    fixed: bool = False
    fixed_spec: KernelSpec | None = None
    fixed_noise: float = 0.0
    standardize: bool = True
    isotropic: bool = False
    init_spec: KernelSpec | None = None
    init_noise: float | None = None


@dataclass(frozen=True)
class FitResult:
    spec: KernelSpec
    noise_variance: float
    lml: float
    used_fallback: bool = False


def default_kernel_spec(family: KernelFamily, domain: Box, y_variance: float = 1.0) -> KernelSpec:
    """Fallback hyperparameters: half-width lengthscales, data-scale variance."""
    ls = tuple(0.5 * max(w, 1e-12) for w in domain.width)
    return KernelSpec(family=family, lengthscales=ls, signal_variance=max(y_variance, 1e-12))


def _golden_max(f, lo: float, hi: float, n_evals: int) -> tuple[float, float]:
    """Golden-section maximization of f on [lo, hi] using n_evals calls."""
    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    best_x, best_f = (c, fc) if fc >= fd else (d, fd)
    for _ in range(max(0, n_evals - 2)):
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
            if fc > best_f:
                best_x, best_f = c, fc
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
            if fd > best_f:
                best_x, best_f = d, fd
    return best_x, best_f


def fit_hyperparameters(data: Dataset, family: KernelFamily, fit_config: FitConfig) -> FitResult:
    """Maximize the log marginal likelihood over log-scale hyperparameters.

    Bounds are log-uniform over [1e-3, 1e3] relative to the domain width
    (lengthscales) and the target variance (signal and noise variances).
    Deterministic given ``fit_config.seed``. When every start fails
    numerically the default spec is returned with ``used_fallback=True``.
    """
    family = KernelFamily(family)
    if fit_config.fixed:
        if fit_config.fixed_spec is None:
            raise ValueError("fixed fit mode requires fixed_spec")
        return FitResult(fit_config.fixed_spec, fit_config.fixed_noise, float("nan"))
    X, y = data.arrays()
    if len(y) < 2:
        raise ValueError("hyperparameter fitting needs at least 2 records")

    y_mean, y_scale = _standardization(y, fit_config.standardize)
    y_fit = (y - y_mean) / y_scale
    y_var = float(np.var(y_fit))
    if y_var <= 1e-300:
        y_var = 1.0

    domain = data.domain
    widths = np.maximum(domain.width, 1e-12)
    n_ls = 1 if fit_config.isotropic else domain.dim
    is_rq = family is KernelFamily.RATIONAL_QUADRATIC

    # Parameter vector: log lengthscales, log signal var, log noise var,
    # and the RQ shape when applicable.
    los, his = [], []
    for j in range(n_ls):
        w = float(np.max(widths)) if fit_config.isotropic else float(widths[j])
        los.append(np.log(1e-3 * w))
        his.append(np.log(1e3 * w))
    for _ in range(2):  # signal variance, then noise variance
        los.append(np.log(1e-3 * y_var))
        his.append(np.log(1e3 * y_var))
    if is_rq:
        los.append(np.log(1e-3))
        his.append(np.log(1e3))
    los = np.array(los)
    his = np.array(his)
    n_par = len(los)

    def unpack(theta) -> tuple[KernelSpec, float]:
        ls = np.exp(theta[:n_ls])
        if fit_config.isotropic:
            ls = np.full(domain.dim, ls[0])
        sv = float(np.exp(theta[n_ls]))
        noise = float(np.exp(theta[n_ls + 1]))
        shape = float(np.exp(theta[n_ls + 2])) if is_rq else 1.0
        return KernelSpec(family, tuple(ls), sv, shape), noise

    def objective(theta) -> float:
        spec, noise = unpack(theta)
        try:
            return _lml_arrays(spec, noise, X, y_fit)
        except NumericalFailure:
            return -np.inf

    # Start 0: incumbent hyperparameters when provided, else mid-box with
    # a small noise guess. Remaining starts: scrambled Sobol in the box.
    mid = 0.5 * (los + his)
    start0 = mid.copy()
    start0[n_ls + 1] = np.log(1e-2 * y_var)
    if fit_config.init_spec is not None:
        init_ls = np.asarray(fit_config.init_spec.lengthscales)
        if fit_config.isotropic:
            init_ls = init_ls[:1]
        start0[:n_ls] = np.log(init_ls)
        start0[n_ls] = np.log(fit_config.init_spec.signal_variance)
        if fit_config.init_noise is not None and fit_config.init_noise > 0:
            start0[n_ls + 1] = np.log(fit_config.init_noise)
        if is_rq:
            start0[n_ls + 2] = np.log(fit_config.init_spec.rq_shape)
        start0 = np.clip(start0, los, his)
    if fit_config.n_starts > 1:
        box = Box(tuple(los), tuple(his))
        extra = ld_points(box, fit_config.n_starts - 1, seed=fit_config.seed)
    else:
        extra = np.zeros((0, n_par))
    starts = [start0] + [row for row in extra]

    best_theta, best_val = None, -np.inf
    per_line = 10  # golden-section evaluations per coordinate visit
    for theta0 in starts:
        theta = np.asarray(theta0, dtype=float)
        val = objective(theta)
        budget = fit_config.evals_per_start - 1
        radius = 0.5 * (his - los)  # halved each sweep to refine locally
        while budget >= per_line:
            improved = False
            for j in range(n_par):
                if budget < per_line:
                    break
                lo_j = max(los[j], theta[j] - radius[j])
                hi_j = min(his[j], theta[j] + radius[j])

                def line(t, j=j, theta=theta):
                    cand = theta.copy()
                    cand[j] = t
                    return objective(cand)

                t_best, v_best = _golden_max(line, lo_j, hi_j, per_line)
                budget -= per_line
                if v_best > val:
                    theta = theta.copy()
                    theta[j] = t_best
                    val = v_best
                    improved = True
            radius *= 0.5
            if not improved and budget < per_line * n_par:
                break
        if val > best_val:
            best_theta, best_val = theta, val

    if best_theta is None or not np.isfinite(best_val):
        spec = default_kernel_spec(family, domain, y_var)
        return FitResult(spec, 1e-2 * y_var, -np.inf, used_fallback=True)
    spec, noise = unpack(best_theta)
    return FitResult(spec, noise, best_val)


def posterior_sample_at(model: GPModel, Xgrid, seed) -> np.ndarray:
    """One joint posterior sample over the grid rows, deterministic per seed."""
    Xgrid = np.atleast_2d(np.asarray(Xgrid, dtype=float))
    if Xgrid.shape[0] == 0:
        raise ValueError("grid must be non-empty")
    rng = np.random.default_rng(seed)
    prior_cov = kernel_matrix(model.kernel, Xgrid)
    if model.n == 0:
        mean_std = np.zeros(Xgrid.shape[0])
        cov = prior_cov
    else:
        k_cross = kernel_matrix(model.kernel, model.X, Xgrid)
        mean_std = k_cross.T @ model.alpha
        v = solve_triangular(model.chol, k_cross, lower=True)
        cov = prior_cov - v.T @ v
        cov = 0.5 * (cov + cov.T)
    L, _ = chol_with_jitter(cov, model.kernel.signal_variance)
    z = rng.standard_normal(Xgrid.shape[0])
    return model.y_mean + model.y_scale * (mean_std + L @ z)


def sample_objective(spec: KernelSpec, domain: Box, anchor_count: int, seed):
    """Deterministic objective drawn from the GP prior with the given kernel.

    Draws one prior sample at ``anchor_count`` low-discrepancy anchor
    points, then returns the noise-free posterior-mean interpolant through
    those values as an Objective. Same seed, same function.
    """
    from .objectives import Objective

    if anchor_count < 1:
        raise ValueError(f"anchor_count must be >= 1, got {anchor_count}")
    root = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    s_anchor, s_values = root.spawn(2)
    anchors = ld_points(domain, anchor_count, seed=np.random.default_rng(s_anchor))
    _, L, _ = gram_cholesky(spec, anchors, noise_variance=0.0)
    values = L @ np.random.default_rng(s_values).standard_normal(anchor_count)
    alpha = cho_solve((L, True), values)

    def evaluate(x) -> float:
        x = np.asarray(x, dtype=float).reshape(1, -1)
        return float(kernel_matrix(spec, anchors, x)[:, 0] @ alpha)

    name = f"gp-{spec.family.value}"
    return Objective(name=name, dim=domain.dim, bounds=domain, fn=evaluate, f_min=None, x_min=None)
