import numpy as np
import pytest

import nerboot as nb


def benchmark_dataset(n=60, m=3, seed=42, sigma2_u=1.0, sigma2_v=1.0, beta=1.0):
    """Benchmark-design dataset: X ~ U[1/2,1], s = 1, normal errors."""
    rng = np.random.default_rng(seed)
    total = n * m
    x = rng.uniform(0.5, 1.0, size=(total, 1))
    labels = np.repeat(np.arange(n), m)
    u = rng.standard_normal(n) * np.sqrt(sigma2_u)
    v = rng.standard_normal(total) * np.sqrt(sigma2_v)
    y = beta * x[:, 0] + np.repeat(u, m) + v
    return nb.from_arrays(labels, x, y)


def random_ragged_dataset(seed, n=5, r=1, unit_scales=False):
    """Small ragged dataset with unequal s for oracle comparisons."""
    rng = np.random.default_rng(seed)
    sizes = rng.integers(2, 6, size=n)
    labels = np.repeat(np.arange(n), sizes)
    total = len(labels)
    x = rng.normal(size=(total, r))
    s = np.ones(total) if unit_scales else rng.uniform(0.5, 2.0, size=total)
    y = (
        x.sum(axis=1)
        + np.repeat(rng.standard_normal(n), sizes)
        + s * rng.standard_normal(total)
    )
    return nb.from_arrays(labels, x, y, s)


@pytest.fixture
def benchmark_fixture():
    return benchmark_dataset()
