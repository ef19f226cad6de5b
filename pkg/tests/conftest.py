import numpy as np
import pytest

from dockgame import engine
from dockgame.data import SynthSpec, generate_complex
from dockgame.graph import GraphConfig
from dockgame.losses import LossWeights
from dockgame.nets import tiny_config


@pytest.fixture(scope="session")
def net_cfg():
    return tiny_config()


@pytest.fixture(scope="session")
def graph_cfg():
    return GraphConfig()


@pytest.fixture(scope="session")
def weights():
    return LossWeights()


@pytest.fixture()
def players(net_cfg):
    return engine.init_players(net_cfg, 0)


@pytest.fixture(scope="session")
def record():
    return generate_complex(SynthSpec(seed=3), 0)


@pytest.fixture(scope="session")
def small_record():
    return generate_complex(
        SynthSpec(atoms_min=4, atoms_max=6, residues_min=10, residues_max=12,
                  pocket_min=4, pocket_max=5, seed=9), 0)


@pytest.fixture()
def rng():
    return np.random.default_rng(0)
