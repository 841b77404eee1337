import numpy as np
import pytest

from symcycle.model import SystemSpec


def log_uniform_spec(rng, n, lo=0.1, hi=2.0, offsets=None):
    """Random valid spec: rates log-uniform in [lo, hi] with mean(k1) > mean(k2)."""
    while True:
        k = np.exp(rng.uniform(np.log(lo), np.log(hi), size=(3, n)))
        if k[0].mean() > k[1].mean():
            break
    if offsets is None:
        sup = -2 if n <= 4 else int(rng.choice([-2, -3]))
        offsets = (-1, sup)
    return SystemSpec(n, k[0], k[1], k[2], *offsets)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def five():
    return SystemSpec.uniform(5, 1.0, 0.5, 0.5)


@pytest.fixture
def logistic():
    return SystemSpec.uniform(1, 1.0, 0.5, 0.5)


def logistic_exact(t, e0=0.5):
    return 1.0 / (1.0 + ((1.0 - e0) / e0) * np.exp(-0.5 * np.asarray(t)))
