import numpy as np
import pytest

from models import NetworkConfig, RNMConfig
from services import gen_dataset


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def tiny_network():
    """One stage of one block: fast enough to train for a few steps in a test"""
    return NetworkConfig(widths=(8,), blocks_per_stage=1, k=3, r1=1, r2=4, r3=4,
                         rnm=RNMConfig(r=0.005))


@pytest.fixture(scope='session')
def shapes_dir(tmp_path_factory):
    """16 images of side 32; read-only for the tests that share it"""
    out = tmp_path_factory.mktemp('shapes')
    gen_dataset(out, n_per_class=4, side=32, seed=0, val_fraction=0.25)
    return out
