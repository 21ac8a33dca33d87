import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

settings.register_profile(
    "default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


def spd_from(a: np.ndarray, eps: float = 0.1) -> np.ndarray:
    return a @ a.T + eps * np.eye(a.shape[0])


@st.composite
def spd_matrices(draw, d=None, min_d=1, max_d=3, eps=0.1):
    """A A^T + eps I with bounded entries."""
    if d is None:
        d = draw(st.integers(min_d, max_d))
    a = draw(arrays(np.float64, (d, d), elements=st.floats(-2, 2, allow_nan=False)))
    return spd_from(a, eps)


@st.composite
def psd_samples(draw, n, d, scale=1.0):
    """Stack of n rank-deficient-or-full PSD matrices B B^T, B of shape (d, d)."""
    b = draw(arrays(np.float64, (n, d, d), elements=st.floats(-1, 1, allow_nan=False)))
    return scale * (b @ np.swapaxes(b, 1, 2))


def random_spd(rng: np.random.Generator, d: int, eps: float = 0.2) -> np.ndarray:
    a = rng.standard_normal((d, d))
    return spd_from(a, eps)


def random_sample(rng: np.random.Generator, n: int, d: int, scale: float = 0.5) -> np.ndarray:
    b = rng.standard_normal((n, d, d))
    return scale * (b @ np.swapaxes(b, 1, 2))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
