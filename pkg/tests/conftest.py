import functools

import pytest

from pitchforge import fixtures
from pitchforge.spectral import DEFAULT_CONFIG


@functools.lru_cache(maxsize=None)
def vowel(f0: float, seconds: float = 1.0):
    return fixtures.vowel(f0, seconds)


@functools.lru_cache(maxsize=None)
def pulse(f0: float, seconds: float = 0.8):
    return fixtures.pulse_train(f0, seconds)


@functools.lru_cache(maxsize=None)
def sine(f0: float, seconds: float = 0.6):
    return fixtures.sine(f0, seconds)


@pytest.fixture(scope="session")
def cfg():
    return DEFAULT_CONFIG
