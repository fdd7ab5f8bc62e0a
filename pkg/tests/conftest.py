import numpy as np
import pytest

from ekgsim.spectral import Grid


@pytest.fixture
def grid8():
    return Grid(8, 2.0 * np.pi, dt=0.05)


@pytest.fixture
def grid16():
    return Grid(16, 2.0 * np.pi, dt=0.05)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def random_real_field(grid, rng, amplitude=1.0, smooth=2.0):
    """Random real band-concentrated field (spectrally decaying)."""
    c = rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)
    c *= np.exp(-smooth * grid.xi_sq / np.max(grid.xi_sq))
    c = 0.5 * (c + grid.conj_flip(c))
    c[0, 0, 0] = c[0, 0, 0].real
    c = grid.zero_nyquist(c)
    peak = np.max(np.abs(grid.inverse(c).real))
    if peak > 0:
        c *= amplitude / peak
    return c
