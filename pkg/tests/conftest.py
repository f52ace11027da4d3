import numpy as np
import pytest

from src.tdoa.services.scenarios import PRESET_COVARIANCE, PRESET_RECEIVERS, Scenario, get_preset


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def scenario1():
    return get_preset("scenario1")


@pytest.fixture
def scenario2():
    return get_preset("scenario2")


@pytest.fixture
def noise_free_scenario():
    """Точные измерения, C из пресета используется только как весовая матрица."""
    return Scenario(
        name="noise-free",
        receivers=PRESET_RECEIVERS,
        true_position=(40.0, 80.0),
        covariance=PRESET_COVARIANCE,
        noise_free=True,
    )


@pytest.fixture
def short_scenario(scenario1):
    return scenario1.with_overrides(iterations=10)
