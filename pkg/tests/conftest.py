import numpy as np
import pytest

from bergmod import bergman, modforms, quad, toeplitz


@pytest.fixture(scope="session")
def cache_dir(tmp_path_factory):
    return str(tmp_path_factory.mktemp("quadcache"))


@pytest.fixture(scope="session")
def rule_F4():
    return quad.fundamental_rule(4)


@pytest.fixture(scope="session")
def rule_F6():
    return quad.fundamental_rule(6)


@pytest.fixture(scope="session")
def delta200():
    return modforms.delta_qexp(200)


@pytest.fixture(scope="session")
def delta_e4_200(delta200):
    return delta200 * modforms.eisenstein_qexp(4, 200)


@pytest.fixture(scope="session")
def model_m4_n40():
    return bergman.BergmanModel(4, 40)


@pytest.fixture(scope="session")
def model_m6_n40():
    return bergman.BergmanModel(6, 40)


@pytest.fixture(scope="session")
def rule_disk_m6_n40(cache_dir):
    return toeplitz.assembly_rule(6, 4, 40, cache_dir)


@pytest.fixture(scope="session")
def pair_sym_12(delta200):
    return modforms.InvariantSymbol.from_pair(delta200, delta200)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240817)
