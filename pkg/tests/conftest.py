from __future__ import annotations

import pytest

from nicdiag.config import PipelineConfig
from nicdiag.diagnosis.states import FAILURE_TYPES, StateLabel
from nicdiag.features.patterns import train_pattern_model
from nicdiag.features.shapes import generate_shape_corpus
from nicdiag.pipeline import DiagnosisPipeline
from nicdiag.simulator.cluster import generate_cluster
from nicdiag.simulator.corpus import generate_corpus
from nicdiag.simulator.profiles import get_profile


@pytest.fixture
def topology():
    return generate_cluster(4, 1)


@pytest.fixture(scope="session")
def pattern_model():
    return train_pattern_model(generate_shape_corpus(40, seed=11), seed=11, epochs=20)


def _small_config() -> PipelineConfig:
    config = PipelineConfig(seed=3)
    config.forest.n_trees = 25
    config.pattern.examples_per_class = 40
    config.pattern.epochs = 20
    return config


@pytest.fixture
def small_config() -> PipelineConfig:
    return _small_config()


@pytest.fixture(scope="session")
def small_corpus():
    counts = {ftype: 4 for ftype in FAILURE_TYPES}
    counts[StateLabel.NORMAL] = 6
    return generate_corpus(generate_cluster(4, 1), [get_profile("wrf")], counts, seed=5)


@pytest.fixture(scope="session")
def trained_bundle(small_corpus, pattern_model):
    return DiagnosisPipeline(_small_config()).train(small_corpus, pattern_model=pattern_model)
