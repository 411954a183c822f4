import numpy as np
import pytest

from emkirch import emcore, scene

# Microwave-in-vacuum regime used throughout: f0 = 2.4 GHz, lambda0 = 0.125 m,
# square aperture a = 20 lambda0 at range L = 100 lambda0.
LAM = 0.125
F0 = 2.4e9
APERTURE = 20 * LAM
RANGE_L = 100 * LAM


@pytest.fixture(scope="session")
def medium():
    return emcore.MediumParams()


@pytest.fixture(scope="session")
def k0(medium):
    return medium.wavenumber(2 * np.pi * F0)


@pytest.fixture(scope="session")
def toy_array():
    """3-element array with unequal weights, for brute-force comparisons."""
    positions = np.array([[0.11, -0.23], [-0.31, 0.05], [0.02, 0.4]])
    weights = np.array([0.7, 1.1, 0.9])
    return scene.ArrayGeometry("square", 1.0, positions, weights)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20260810)
