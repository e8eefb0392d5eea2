import numpy as np
import pytest

from heatgauss import SpectralDecomposition, assemble_form
from heatgauss.profiles import get_profile


def _decomp(name: str, n: int):
    profile = get_profile(name)
    form = assemble_form(profile.spec, profile.grid(n))
    return form, SpectralDecomposition.from_form(form)


@pytest.fixture(scope="session")
def laplace200():
    return _decomp("laplace-pi", 200)


@pytest.fixture(scope="session")
def laplace400():
    return _decomp("laplace-pi", 400)


@pytest.fixture(scope="session")
def beam200():
    return _decomp("beam-1", 200)


@pytest.fixture(scope="session")
def beam400():
    return _decomp("beam-1", 400)


@pytest.fixture()
def rng():
    return np.random.default_rng(42)
