import math

import numpy as np
import pytest

import resolimit as rl


@pytest.fixture(scope="session")
def ideal():
    return rl.make_ideal_lowpass(1.0)


@pytest.fixture(scope="session")
def triangular():
    return rl.make_triangular_lowpass(1.0)


@pytest.fixture(scope="session")
def circular():
    return rl.make_circular_lowpass(1.0)


@pytest.fixture(scope="session")
def ac_ideal(ideal):
    return rl.Autocorrelation(ideal)


@pytest.fixture(scope="session")
def ac_tri(triangular):
    return rl.Autocorrelation(triangular)


@pytest.fixture(scope="session")
def catalog():
    return [
        rl.make_ideal_lowpass(1.0),
        rl.make_triangular_lowpass(1.0),
        rl.make_circular_lowpass(1.0),
        rl.make_truncated_gaussian(0.5, 1.0),
        rl.make_pswf(2.0, 1.0),
    ]


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
