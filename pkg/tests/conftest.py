import numpy as np
import pytest

from hybrid_lde.channel import assemble_channel, draw_clusters
from hybrid_lde.model import SystemConfig, make_observation_model


def draw(config, seed):
    """Observation model, clusters, channel and a follow-on generator for one seeded scenario."""
    rng = np.random.default_rng(seed)
    model = make_observation_model(config, rng)
    clusters = draw_clusters(config, rng)
    return model, clusters, assemble_channel(clusters, config), rng


@pytest.fixture
def small():
    config = SystemConfig(n_nodes=4, n_tx=5, n_rx=6, q=3, n_obs=2, n_clusters=5)
    return (config,) + draw(config, 2024)
