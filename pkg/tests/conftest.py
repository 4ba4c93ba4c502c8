import numpy as np
import pytest

from floqlab import DriveParams

# Delta = eps = 1, A = 2: the strongly driven reference set used throughout
STRONG = dict(delta=1.0, epsilon=1.0, amplitude=2.0)
ADIABATIC_OMEGA = 0.19
RESONANT_OMEGA = 0.194859


@pytest.fixture
def strong_cos():
    return DriveParams(**STRONG, omega0=ADIABATIC_OMEGA, form="cosine_y")


@pytest.fixture
def strong_sin():
    return DriveParams(**STRONG, omega0=ADIABATIC_OMEGA, form="sine_x")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
