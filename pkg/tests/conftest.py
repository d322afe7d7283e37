import dataclasses

import pytest

from gamerank.harness import ExperimentConfig
from gamerank.synthgen import SynthConfig


@pytest.fixture()
def small_config():
    """Three agents, tiny populations: fast full-pipeline runs."""
    return ExperimentConfig(
        synth=SynthConfig(lambdas=(0.001, 0.01, 0.1), per_agent_count=30),
        mean_range_grid=(0.0, 1.0),
        seeds=(0, 1),
        detectors=("payout", "random", "knn", "ecod", "s_learner", "t_learner", "s_ipw", "psm"),
        top_m=2,
    )


@pytest.fixture()
def tiny_config(small_config):
    return dataclasses.replace(
        small_config,
        mean_range_grid=(0.0,),
        seeds=(42,),
        detectors=("payout", "random"),
    )
