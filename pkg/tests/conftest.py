import numpy as np
import pytest
from hypothesis import HealthCheck, settings, strategies as st

from lindspec.models import ModelSpec

settings.register_profile(
    "default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def random_hermitian(rng, d):
    a = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    return 0.5 * (a + a.conj().T)


def random_density(rng, d, rank=None):
    rank = d if rank is None else rank
    x = rng.standard_normal((d, rank)) + 1j * rng.standard_normal((d, rank))
    rho = x @ x.conj().T
    return rho / np.trace(rho).real


def random_model(rng, d, n_jumps=2):
    """Generic Lindblad model; random jumps make the kernel one-dimensional."""
    h = random_hermitian(rng, d)
    jumps = []
    for _ in range(n_jumps):
        g = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(d)
        jumps.append((g, rng.uniform(0.2, 2.0)))
    return ModelSpec(h, tuple(jumps), d)


@st.composite
def models(draw, max_dim=10):
    d = draw(st.integers(2, max_dim))
    seed = draw(st.integers(0, 2**32 - 1))
    n_jumps = draw(st.integers(1, 3))
    return random_model(np.random.default_rng(seed), d, n_jumps)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
