import warnings

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from cerml.experiments import FixtureConfig

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def small_split():
    """Four classes, quick enough for per-test training."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return FixtureConfig(classes=4, sets_per_class=5, samples_per_set=15, dim=8, separation=5.0, seed=3).make()


@pytest.fixture(scope="session")
def fixture_split():
    return FixtureConfig().make()


def random_orthonormal(rng, D, d):
    Q, _ = np.linalg.qr(rng.standard_normal((D, d)))
    return Q


def random_spd(rng, D, floor=0.1):
    A = rng.standard_normal((D, D))
    return A @ A.T / D + floor * np.eye(D)
