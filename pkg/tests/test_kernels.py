"""Kernel math: closed forms, symmetry, PSD Gram matrices, jitter escalation."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from conftest import ALL_FAMILIES
from distbo.errors import NumericalFailure
from distbo.kernels import (
    KernelFamily,
    KernelSpec,
    gram_cholesky,
    kernel_eval,
    kernel_gram,
    kernel_matrix,
)

# Frozen against a 30-digit mpmath evaluation of the closed form
# (1 + sqrt(5) r + 5 r^2 / 3) exp(-sqrt(5) r) at r = 1.
MATERN52_AT_1 = 0.5239941088318203


def test_zero_distance_gives_signal_variance():
    for family in ALL_FAMILIES:
        spec = KernelSpec(family, (0.7, 1.3), signal_variance=2.5)
        assert kernel_eval(spec, [0.2, -1.0], [0.2, -1.0]) == pytest.approx(2.5, abs=0)


def test_matern52_closed_form_at_unit_distance():
    spec = KernelSpec(KernelFamily.MATERN52, (1.0,), 1.0)
    assert kernel_eval(spec, [0.0], [1.0]) == pytest.approx(MATERN52_AT_1, abs=1e-15)


def test_squared_exponential_at_unit_distance():
    spec = KernelSpec(KernelFamily.SQUARED_EXPONENTIAL, (1.0,), 1.0)
    assert kernel_eval(spec, [0.0], [1.0]) == pytest.approx(np.exp(-0.5), abs=1e-15)


def test_dimension_mismatch_raises():
    spec = KernelSpec(KernelFamily.MATERN32, (1.0, 1.0))
    with pytest.raises(ValueError):
        kernel_eval(spec, [0.0], [1.0])
    with pytest.raises(ValueError):
        kernel_eval(spec, [0.0, 1.0, 2.0], [0.0, 1.0, 2.0])


def test_spec_validation():
    with pytest.raises(ValueError):
        KernelSpec(KernelFamily.MATERN52, (0.0,))
    with pytest.raises(ValueError):
        KernelSpec(KernelFamily.MATERN52, (1.0,), signal_variance=-1.0)
    with pytest.raises(ValueError):
        KernelSpec(KernelFamily.RATIONAL_QUADRATIC, (1.0,), rq_shape=0.0)


def test_symmetry_is_exact():
    rng = np.random.default_rng(0)
    for family in ALL_FAMILIES:
        spec = KernelSpec(family, (0.5, 2.0, 1.1), signal_variance=1.7, rq_shape=0.8)
        for _ in range(50):
            x = rng.normal(size=3)
            y = rng.normal(size=3)
            assert kernel_eval(spec, x, y) == kernel_eval(spec, y, x)


def test_stationarity_under_shift():
    rng = np.random.default_rng(1)
    for family in ALL_FAMILIES:
        spec = KernelSpec(family, (0.5, 2.0), signal_variance=1.3)
        for _ in range(20):
            x, y, shift = rng.normal(size=2), rng.normal(size=2), rng.normal(size=2)
            assert kernel_eval(spec, x + shift, y + shift) == pytest.approx(
                kernel_eval(spec, x, y), abs=1e-12
            )


def test_gram_psd_with_small_jitter():
    rng = np.random.default_rng(2)
    for family in ALL_FAMILIES:
        for n in (2, 7, 20):
            d = rng.integers(1, 4)
            spec = KernelSpec(family, tuple(rng.uniform(0.3, 2.0, d)), 1.0)
            X = rng.uniform(-1, 1, size=(n, d))
            _, L, _ = gram_cholesky(spec, X, noise_variance=0.0, jitter=1e-10)
            assert np.all(np.diag(L) > 0)


def test_monotone_decreasing_in_distance():
    rs = np.linspace(0.05, 3.0, 40)
    for family in ALL_FAMILIES:
        spec = KernelSpec(family, (1.0,), 1.0)
        vals = np.array([kernel_eval(spec, [0.0], [r]) for r in rs])
        assert np.all(np.diff(vals) < 0), family


def test_gram_single_point():
    spec = KernelSpec(KernelFamily.MATERN12, (1.0,), signal_variance=2.0)
    K = kernel_gram(spec, [[0.3]], noise_variance=0.5, jitter=0.25)
    assert_allclose(K, [[2.0 + 0.5 + 0.25]])


def test_gram_duplicate_points_escalates_jitter():
    spec = KernelSpec(KernelFamily.SQUARED_EXPONENTIAL, (1.0,), 1.0)
    X = [[0.5], [0.5]]
    _, L, used = gram_cholesky(spec, X, noise_variance=0.0, jitter=0.0)
    assert used > 0.0  # rank-deficient without escalation
    assert np.all(np.diag(L) > 0)


def test_gram_matches_entrywise_eval():
    rng = np.random.default_rng(3)
    spec = KernelSpec(KernelFamily.MATERN52, (0.8,), 1.4)
    X = rng.uniform(-2, 2, size=(3, 1))
    K = kernel_gram(spec, X, noise_variance=0.0, jitter=0.0)
    for i in range(3):
        for j in range(3):
            expected = kernel_eval(spec, X[i], X[j]) + (0.0 if i != j else 0.0)
            if i == j:
                # diagonal may carry escalated jitter; here none is needed
                assert K[i, j] == pytest.approx(expected, abs=1e-12)
            else:
                assert K[i, j] == pytest.approx(expected, abs=1e-12)
    assert_allclose(K, K.T, atol=1e-12)


def test_factorization_failure_carries_final_jitter():
    spec = KernelSpec(KernelFamily.MATERN52, (1.0,), 1.0)
    X = np.array([[np.nan], [0.0]])
    with pytest.raises(NumericalFailure) as err:
        kernel_gram(spec, X)
    assert err.value.jitter == pytest.approx(1e-4, rel=1e-6)


def test_kernel_matrix_cross_shape():
    spec = KernelSpec(KernelFamily.MATERN32, (1.0, 1.0), 1.0)
    A = np.zeros((4, 2))
    B = np.ones((3, 2))
    K = kernel_matrix(spec, A, B)
    assert K.shape == (4, 3)
    assert np.all(K > 0) and np.all(K <= 1.0)
