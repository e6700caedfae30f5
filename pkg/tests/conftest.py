import numpy as np
import pytest

from resonator_mbqc.device import DeviceDefaults, build_lattice, ghz


@pytest.fixture
def ref_lattice():
    return build_lattice(2, (4, 4), ghz(6.6), ghz(7.0), DeviceDefaults())


@pytest.fixture
def ref_junction(ref_lattice):
    j = ref_lattice.junction((1, 1), (1, 2))
    left, right = ref_lattice.endpoints(j)
    return j, left, right


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
