import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from parabolic import SpectralOperator, TimeGrid

settings.register_profile(
    "default", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


@st.composite
def spectra(draw, min_dim=1, max_dim=6, injective=True):
    dim = draw(st.integers(min_dim, max_dim))
    lo = 0.1 if injective else 0.0
    vals = draw(arrays(float, dim, elements=st.floats(lo, 5.0)))
    return SpectralOperator.from_eigenvalues(vals)


@st.composite
def vectors_for(draw, dim):
    re = draw(arrays(float, dim, elements=finite))
    im = draw(arrays(float, dim, elements=finite))
    return re + 1j * im


def crandn(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def op4():
    return SpectralOperator.from_eigenvalues([0.5, 1.0, 2.0, 3.0])


@pytest.fixture
def window():
    return TimeGrid(-10.0, 10.0, 512, "full_line_window")


@pytest.fixture
def bounded():
    return TimeGrid(0.0, 1.0, 64)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
