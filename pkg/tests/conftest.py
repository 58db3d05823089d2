import numpy as np
import pytest

from distbo.kernels import KernelFamily, KernelSpec
from distbo.space import Box
from distbo.surrogate import Dataset, ObservationRecord


@pytest.fixture
def unit_box():
    return Box((0.0,), (1.0,))


@pytest.fixture
def se_spec():
    return KernelSpec(KernelFamily.SQUARED_EXPONENTIAL, (1.0,), 1.0)


@pytest.fixture
def m52_spec():
    return KernelSpec(KernelFamily.MATERN52, (1.0,), 1.0)


def dataset_from(domain: Box, points, values, node_id=0) -> Dataset:
    """Build a dataset of records (node_id, 0..n-1) from parallel lists."""
    data = Dataset(domain)
    for seq, (x, y) in enumerate(zip(points, values)):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        data.insert(ObservationRecord(node_id, seq, tuple(x), float(y)))
    return data


ALL_FAMILIES = [
    KernelFamily.MATERN12,
    KernelFamily.MATERN32,
    KernelFamily.MATERN52,
    KernelFamily.SQUARED_EXPONENTIAL,
    KernelFamily.RATIONAL_QUADRATIC,
]
