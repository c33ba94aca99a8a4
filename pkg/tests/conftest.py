"""Shared fixtures: the frozen dataset, a trained model, attack environments.

Training and the sensitivity sweep dominate suite time, so both are
session-scoped and shared between the unit tests and the acceptance
module.
"""

from __future__ import annotations

import numpy as np
import pytest

from paychain.datagen import GeneratorConfig, generate
from paychain.detector import TrainParams, train
from paychain.detector.metrics import best_f1_threshold
from paychain.explain import draw_background
from paychain.harness import bootstrap, run_sensitivity
from paychain.workflow import Role


@pytest.fixture(scope="session")
def frozen_data():
    return generate(GeneratorConfig())


@pytest.fixture(scope="session")
def default_model(frozen_data):
    return train(frozen_data.dataset, TrainParams(), seed=0)


@pytest.fixture(scope="session")
def default_background(frozen_data):
    return draw_background(frozen_data.dataset.features, size=100, seed=7)


@pytest.fixture(scope="session")
def default_threshold(frozen_data, default_model) -> float:
    threshold, _ = best_f1_threshold(frozen_data.dataset.labels, default_model.predict(frozen_data.dataset.features))
    return threshold


@pytest.fixture(scope="session")
def env_factory(frozen_data, default_model, default_threshold):
    """Simulation environments that reuse the session-trained model."""

    def make(seed: int = 0, **kwargs):
        kwargs.setdefault("extra_actors", {"dana": (Role.MANAGER, Role.FINANCE)})
        return bootstrap(
            seed,
            model=default_model,
            training_features=frozen_data.dataset.features,
            decision_threshold=default_threshold,
            **kwargs,
        )

    return make


@pytest.fixture(scope="session")
def sensitivity_report():
    """The acceptance-rate sweep {0.1%, 0.5%, 5%}; shared, computed once."""
    return run_sensitivity((0.001, 0.005, 0.05), seed=0, n_rows=20_000)


@pytest.fixture()
def rng():
    return np.random.default_rng(0)
