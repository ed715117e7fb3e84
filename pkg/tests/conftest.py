import logging

import numpy as np
import pytest

from splitvae.core import RngStream
from splitvae.settings import Settings, TrainConfig


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run slow statistical tests")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture(autouse=True)
def _quiet_logs(caplog):
    caplog.set_level(logging.WARNING)


@pytest.fixture
def rng():
    return RngStream(1234, 7)


@pytest.fixture
def unit_data():
    """Normalized 40 x 8 data with some cross-feature structure."""
    gen = np.random.default_rng(5)
    base = gen.uniform(0.2, 0.8, (40, 1))
    return np.clip(base + 0.1 * gen.standard_normal((40, 8)), 0.0, 1.0)


@pytest.fixture
def small_cfg():
    return TrainConfig(
        epochs=3,
        batch_size=8,
        seed=3,
        gen_seed=4,
        latent_dim=2,
        embed_dim=3,
        silos="uniform:2",
        edge_hidden=(6,),
        server_hidden=(8,),
        runs=2,
        synth_nodes=2,
        synth_steps=4,
        synth_samples=60,
        lr_edge_enc=0.5,
        lr_edge_dec=0.5,
        lr_server_enc=0.5,
        lr_server_dec=0.5,
    )


@pytest.fixture
def settings(tmp_path):
    return Settings(base_dir=tmp_path, out_dir=tmp_path / "runs", log_level="WARNING", collective_timeout=10.0, threaded=True)
