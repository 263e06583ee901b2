import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20260810)


def random_problem(rng, d_max=12, sigma_max=2.0, t_max=1500):
    """Shared generator for fuzzed quadratic instances."""
    d = int(rng.integers(1, d_max + 1))
    lam = rng.uniform(0.05, 50.0, d)
    off = rng.normal(0.0, 2.0, d)
    sigma = float(rng.uniform(0.0, sigma_max))
    T = int(rng.integers(1, t_max))
    return lam, off, sigma, T
