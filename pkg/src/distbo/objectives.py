"""Benchmark objectives with known optima, plus the regret metric.

Standard forms and bounds follow the usual global-optimization test-suite
conventions; the embedded minima were verified against dense-grid searches
and the known analytic minimizers.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ConfigurationError, UnsupportedMetric
from .space import Box

__all__ = ["Objective", "get_objective", "list_objectives", "immediate_regret"]


@dataclass(frozen=True)
class Objective:
    """A deterministic function on a box, with its minimum when known."""

    name: str
    dim: int
    bounds: Box
    fn: Callable[[np.ndarray], float]
    f_min: float | None
    x_min: tuple[tuple[float, ...], ...] | None

    def __call__(self, x) -> float:
        return float(self.fn(np.asarray(x, dtype=float)))


def _branin(x):
    a, b, c = 1.0, 5.1 / (4.0 * np.pi**2), 5.0 / np.pi
    r, s, t = 6.0, 10.0, 1.0 / (8.0 * np.pi)
    return a * (x[1] - b * x[0] ** 2 + c * x[0] - r) ** 2 + s * (1 - t) * np.cos(x[0]) + s


def _bohachevsky(x):
    return (
        x[0] ** 2
        + 2.0 * x[1] ** 2
        - 0.3 * np.cos(3.0 * np.pi * x[0])
        - 0.4 * np.cos(4.0 * np.pi * x[1])
        + 0.7
    )


def _schubert(x):
    j = np.arange(1.0, 6.0)
    f1 = np.sum(j * np.cos((j + 1.0) * x[0] + j))
    f2 = np.sum(j * np.cos((j + 1.0) * x[1] + j))
    return f1 * f2


def _ackley(x):
    a, b, c = 20.0, 0.2, 2.0 * np.pi
    n = len(x)
    return (
        -a * np.exp(-b * np.sqrt(np.sum(x**2) / n))
        - np.exp(np.sum(np.cos(c * x)) / n)
        + a
        + np.e
    )


_HART6_ALPHA = np.array([1.0, 1.2, 3.0, 3.2])
_HART6_A = np.array(
    [
        [10.0, 3.0, 17.0, 3.5, 1.7, 8.0],
        [0.05, 10.0, 17.0, 0.1, 8.0, 14.0],
        [3.0, 3.5, 1.7, 10.0, 17.0, 8.0],
        [17.0, 8.0, 0.05, 10.0, 0.1, 14.0],
    ]
)
_HART6_P = 1e-4 * np.array(
    [
        [1312.0, 1696.0, 5569.0, 124.0, 8283.0, 5886.0],
        [2329.0, 4135.0, 8307.0, 3736.0, 1004.0, 9991.0],
        [2348.0, 1451.0, 3522.0, 2883.0, 3047.0, 6650.0],
        [4047.0, 8828.0, 8732.0, 5743.0, 1091.0, 381.0],
    ]
)


def _hartmann6(x):
    inner = np.sum(_HART6_A * (x[None, :] - _HART6_P) ** 2, axis=1)
    return -float(np.sum(_HART6_ALPHA * np.exp(-inner)))


def _rosenbrock(x):
    return np.sum(100.0 * (x[1:] - x[:-1] ** 2) ** 2 + (1.0 - x[:-1]) ** 2)


def _camelback(x):
    x1, x2 = x[0], x[1]
    return (
        (4.0 - 2.1 * x1**2 + x1**4 / 3.0) * x1**2
        + x1 * x2
        + (-4.0 + 4.0 * x2**2) * x2**2
    )


def _rastrigin(x):
    return 10.0 * len(x) + np.sum(x**2 - 10.0 * np.cos(2.0 * np.pi * x))


def _fixed_dim(name, dim, lo, hi, fn, f_min, x_min):
    def build(params):
        d = int(params.get("dim", dim))
        if d != dim:
            raise ConfigurationError(f"{name} is defined for dim={dim}, got {d}")
        bounds = Box(tuple(lo), tuple(hi))
        return Objective(name, dim, bounds, fn, f_min, x_min)

    return build


def _any_dim(name, default_dim, lo, hi, fn, f_min, x_min_of_dim):
    def build(params):
        d = int(params.get("dim", default_dim))
        if d < 1:
            raise ConfigurationError(f"{name} needs dim >= 1, got {d}")
        bounds = Box((lo,) * d, (hi,) * d)
        return Objective(name, d, bounds, fn, f_min, x_min_of_dim(d))

    return build


_REGISTRY: dict[str, Callable[[dict], Objective]] = {
    "branin": _fixed_dim(
        "branin",
        2,
        (-5.0, 0.0),
        (10.0, 15.0),
        _branin,
        0.39788735772973816,
        ((-np.pi, 12.275), (np.pi, 2.275), (9.42478, 2.475)),
    ),
    "bohachevsky": _fixed_dim(
        "bohachevsky", 2, (-100.0, -100.0), (100.0, 100.0), _bohachevsky, 0.0, ((0.0, 0.0),)
    ),
    "schubert": _fixed_dim(
        "schubert",
        2,
        (-10.0, -10.0),
        (10.0, 10.0),
        _schubert,
        -186.73090883102392,
        ((-7.708313735, 5.482864206),),
    ),
    "ackley": _any_dim("ackley", 2, -32.768, 32.768, _ackley, 0.0, lambda d: ((0.0,) * d,)),
    "hartmann6": _fixed_dim(
        "hartmann6",
        6,
        (0.0,) * 6,
        (1.0,) * 6,
        _hartmann6,
        -3.322368011391339,
        ((0.20169, 0.150011, 0.476874, 0.275332, 0.311652, 0.6573),),
    ),
    "rosenbrock": _any_dim(
        "rosenbrock", 2, -5.0, 10.0, _rosenbrock, 0.0, lambda d: ((1.0,) * d,)
    ),
    "camelback": _fixed_dim(
        "camelback",
        2,
        (-3.0, -2.0),
        (3.0, 2.0),
        _camelback,
        -1.0316284534898774,
        ((0.0898420131, -0.7126564032), (-0.0898420131, 0.7126564032)),
    ),
    "rastrigin": _any_dim(
        "rastrigin", 2, -5.12, 5.12, _rastrigin, 0.0, lambda d: ((0.0,) * d,)
    ),
}


def list_objectives() -> list[str]:
    """Registry names, plus the GP-sample family."""
    return sorted(_REGISTRY) + ["gp-matern52", "gp-rational_quadratic"]


def get_objective(name: str, params: dict | None = None) -> Objective:
    """Build a registered objective, or a GP-sampled one for gp-* names.

    GP-sample params: dim (default 2), lengthscale (fraction of a unit
    box, default 0.25), anchors (default 1000), seed (default 0). Using a
    rational-quadratic sample while optimizing with a Matern surrogate is
    the out-of-model setting.
    """
    params = dict(params or {})
    if name.startswith("gp-"):
        return _gp_sample_objective(name, params)
    builder = _REGISTRY.get(name)
    if builder is None:
        raise ConfigurationError(f"unknown objective {name!r}; see list_objectives()")
    return builder(params)


def _gp_sample_objective(name: str, params: dict) -> Objective:
    from .kernels import KernelFamily, KernelSpec
    from .surrogate import sample_objective

    family = KernelFamily(name[len("gp-") :])
    dim = int(params.get("dim", 2))
    lengthscale = float(params.get("lengthscale", 0.25))
    anchors = int(params.get("anchors", 1000))
    seed = params.get("seed", 0)
    signal_variance = float(params.get("signal_variance", 1.0))
    rq_shape = float(params.get("rq_shape", 1.0))
    domain = Box((0.0,) * dim, (1.0,) * dim)
    spec = KernelSpec(
        family=family,
        lengthscales=(lengthscale,) * dim,
        signal_variance=signal_variance,
        rq_shape=rq_shape,
    )
    return sample_objective(spec, domain, anchors, seed)


def immediate_regret(objective: Objective, best_y: float) -> float:
    """Gap between the best observed value and the true minimum, floored at 0."""
    if objective.f_min is None:
        raise UnsupportedMetric(
            f"objective {objective.name!r} has no known minimum; use best-value traces"
        )
    return max(0.0, float(best_y) - objective.f_min)
