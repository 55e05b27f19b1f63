import numpy as np
import pytest

from periodic_parareal.cable import CoaxCableParams, build_coax_cable
from periodic_parareal.problem import build_dae_pair, build_scalar_test


@pytest.fixture
def rng():
    return np.random.default_rng(20190226)


@pytest.fixture
def dae():
    return build_dae_pair()


@pytest.fixture
def scalar():
    return build_scalar_test(1.0, 1.0, 1.0, 50.0)


@pytest.fixture(scope="session")
def small_cable_linear():
    return build_coax_cable(CoaxCableParams(n_r=40).linear())


@pytest.fixture(scope="session")
def small_cable():
    return build_coax_cable(CoaxCableParams(n_r=40))


def random_spd(rng, d, shift=1.0):
    A = rng.standard_normal((d, d))
    return A @ A.T + shift * np.eye(d)


def random_psd(rng, d, rank=None):
    rank = d if rank is None else rank
    B = rng.standard_normal((d, rank))
    return B @ B.T
