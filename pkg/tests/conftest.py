import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from qnetsem.library import library

settings.register_profile(
    'default', deadline=None, max_examples=40,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large],
)
settings.register_profile('ci', deadline=None, max_examples=200, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.getenv('HYPOTHESIS_PROFILE', 'default'))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def tp():
    return library('teleport')


@pytest.fixture
def direct():
    return library('direct_channel')
