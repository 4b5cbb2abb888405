import numpy as np
import pytest

from sesopt import CompositeObjective, DenseOperator, seeded_rng


def small_quadratic(n=30, seed=3):
    """Dense noise-free least squares with a known zero optimum."""
    rng = seeded_rng(seed)
    a = rng.normal(0.0, 1.0 / np.sqrt(n), size=(n, n))
    x_star = rng.standard_normal(n)
    obj = CompositeObjective(DenseOperator(a), a @ x_star, mu=0.0)
    return obj, a, x_star


def small_l1(m=40, n=60, seed=5, mu=1e-3):
    rng = seeded_rng(seed)
    a = rng.standard_normal((m, n)) / np.sqrt(m)
    x_sig = np.zeros(n)
    x_sig[rng.choice(n, 4, replace=False)] = rng.standard_normal(4)
    b = a @ x_sig + 0.01 * rng.standard_normal(m)
    obj = CompositeObjective(DenseOperator(a), b, mu=mu)
    obj.x_signal = x_sig
    return obj, a


def assert_monotone(values, slack=1e-12):
    v = np.asarray(values, dtype=np.float64)
    up = np.nonzero(v[1:] > v[:-1] + slack * np.maximum(1.0, np.abs(v[:-1])))[0]
    assert up.size == 0, f"f increased at rows {up[:5] + 1}"


@pytest.fixture
def rng():
    return seeded_rng(2024)
