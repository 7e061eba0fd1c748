import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from branching_clt import catalog
from branching_clt.spectral import spectral_decompose

settings.register_profile(
    "default", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture(scope="session")
def yule():
    m = catalog.yule()
    return m, spectral_decompose(m)


@pytest.fixture(scope="session")
def critical_example():
    m = catalog.critical_example()
    return m, spectral_decompose(m)


@pytest.fixture(scope="session")
def models():
    """Catalog models with their decompositions, keyed by name."""
    out = {}
    for name, make in catalog.CATALOG.items():
        m = make()
        out[name] = (m, spectral_decompose(m))
    return out


def rel(a, b):
    a, b = np.asarray(a), np.asarray(b)
    return float(np.max(np.abs(a - b) / np.maximum(np.abs(b), 1e-300)))
