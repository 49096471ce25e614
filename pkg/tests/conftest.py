import numpy as np
import pytest

from calm import systems
from calm.config import TrainConfig
from calm.presets import benchmark_noise


@pytest.fixture(scope="session")
def pendulum_gmm():
    return benchmark_noise("pendulum2")


@pytest.fixture(scope="session")
def pendulum_model(pendulum_gmm):
    return systems.make_system("pendulum", pendulum_gmm)


@pytest.fixture
def tiny_config(pendulum_gmm):
    """Smallest config that still exercises every code path."""
    return TrainConfig(
        system="pendulum", gmm=pendulum_gmm, comm_lambda=10.0, seed=3,
        horizon=12, outer_iters=1, ppo_epochs=2, rollouts_per_epoch=3,
        estimator_epochs=2, estimator_rollouts=2, baseline_ppo_epochs=2,
        hidden_sizes=(8,),
    )


def random_mlp(layer_sizes, rng):
    """Gaussian-weight MLP for gradient tests (wider range than init_mlp)."""
    from calm import nn

    weights = [rng.normal(0.0, 0.6, (layer_sizes[i + 1], layer_sizes[i]))
               for i in range(len(layer_sizes) - 1)]
    biases = [rng.normal(0.0, 0.2, layer_sizes[i + 1])
              for i in range(len(layer_sizes) - 1)]
    return nn.MlpParams(tuple(layer_sizes), weights, biases)
