import numpy as np
import pytest

from privout import NetworkTopology, TrainingConfig, make_synthetic, train
from privout.training import init_params


@pytest.fixture(scope="session")
def blob2():
    """Linearly separable binary blobs."""
    return make_synthetic(classes=2, rows=200, features=4, separation=6.0, seed=11)


@pytest.fixture(scope="session")
def blob2_model(blob2):
    topology = NetworkTopology.dense(4, 8, 2)
    config = TrainingConfig(epochs=100, batch_size=100, seed=7)
    return train(blob2, topology, config)


def random_params(topology, seed):
    return init_params(topology, np.random.default_rng(seed))
