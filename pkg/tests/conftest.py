import numpy as np
import pytest

from tweedie import NoiseSpec, PriorSpec
from tweedie.suites import MEAN_RULE_NOISES


@pytest.fixture
def three_atoms():
    return PriorSpec.atomic([-1.0, 0.0, 2.0], [0.3, 0.4, 0.3])


@pytest.fixture
def two_atoms():
    return PriorSpec.atomic([0.0, 1.0], [0.5, 0.5])


@pytest.fixture
def std_normal_prior():
    return PriorSpec.normal(0.0, 1.0)


@pytest.fixture(params=sorted(MEAN_RULE_NOISES))
def mean_family(request):
    return NoiseSpec(request.param, MEAN_RULE_NOISES[request.param][0])


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
