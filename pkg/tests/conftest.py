import numpy as np
import pytest

from ilvs import (build_training_set, collect_suite, default_scenario,
                  desired_features, goal_interaction_pinv, train_compensation_model)


@pytest.fixture(scope="session")
def scenario():
    return default_scenario()


@pytest.fixture(scope="session")
def desired(scenario):
    return desired_features(scenario)


@pytest.fixture(scope="session")
def lpinv(scenario):
    return goal_interaction_pinv(scenario)


@pytest.fixture(scope="session")
def suite(scenario):
    return collect_suite(scenario)


@pytest.fixture(scope="session")
def training_set(suite):
    return build_training_set(suite)


@pytest.fixture(scope="session")
def model(training_set):
    return train_compensation_model(training_set, n_components=11, random_state=0)


@pytest.fixture
def rng():
    return np.random.default_rng(123)
