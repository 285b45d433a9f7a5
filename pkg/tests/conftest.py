import pytest

from magcontour.geometry import gamma_frame
from magcontour.model_operators import default_constants
from magcontour.reduced_operators import minimize_band
from magcontour.surfaces import PRESETS


@pytest.fixture(scope="session")
def consts():
    return default_constants()


@pytest.fixture(scope="session")
def frames(consts):
    return {name: gamma_frame(PRESETS[name](), 256, constants=consts) for name in PRESETS}


@pytest.fixture(scope="session")
def egg_band(consts, frames):
    return minimize_band(frames["egg"], consts)
