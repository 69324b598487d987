import numpy as np
import pytest

from capsel import backends


def _backend_names():
    return backends.available()


@pytest.fixture(params=_backend_names())
def backend(request):
    """Run the test once per installed kernel backend."""
    previous = backends.active_name()
    backends.set_active(request.param)
    yield request.param
    backends.set_active(previous)


@pytest.fixture
def rng():
    return np.random.default_rng(20260808)
