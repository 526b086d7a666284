import numpy as np
import pytest

from glaaseg.speckle import PHANTOMS, SpeckleSpec, apply_speckle, make_phantom, sample_speckle


def speckled(name, looks=2, seed=0):
    spec = PHANTOMS[name]
    clean, gt = make_phantom(spec)
    noise = sample_speckle(spec.width, spec.height, SpeckleSpec(looks, seed))
    return apply_speckle(clean, noise), gt


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def phantom1():
    return speckled("phantom1")


@pytest.fixture(scope="session")
def phantom2():
    return speckled("phantom2")


@pytest.fixture(scope="session")
def annulus():
    return speckled("annulus")
