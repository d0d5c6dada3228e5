"""
Pytest configuration and fixtures for feecast tests.
"""

import numpy as np
import pytest

from feecast.config import (
    CvConfig,
    GbmConfig,
    HybridConfig,
    PipelineConfig,
    SarimaxConfig,
    T2VConfig,
)
from feecast.synthetic import synth_dataset


@pytest.fixture(scope="session")
def synth_small():
    """Two and a half synthetic days; enough for the default lag of 144."""
    return synth_dataset(400, seed=1)


@pytest.fixture
def csv_path(tmp_path, synth_small):
    from feecast.dataset import save_dataset

    path = tmp_path / "fees.csv"
    save_dataset(synth_small, path)
    return path


@pytest.fixture
def fast_sarimax():
    """Low-order model without seasonal terms so fits stay quick."""
    return SarimaxConfig(p=1, d=0, q=0, P=0, D=0, Q=0, s=1, max_iter=200, restarts=0)


@pytest.fixture
def fast_gbm():
    return GbmConfig(n_trees=30, max_depth=3, learning_rate=0.1, min_samples_leaf=10, patience=10)


@pytest.fixture
def fast_t2v():
    return T2VConfig(embedding_dim=4, hidden=[8], max_epochs=2, batch_size=32, horizon=12, season=12)


@pytest.fixture
def fast_config(fast_sarimax, fast_gbm, fast_t2v):
    """Pipeline config sized for a few hundred rows."""
    return PipelineConfig(
        sarimax=fast_sarimax,
        gbm=fast_gbm,
        t2v=fast_t2v,
        hybrid=HybridConfig(ema_window=24, rolling_window=12, lags=[1, 2, 24], season=24),
        cv=CvConfig(initial=200, step=24, horizon=24, folds=3, test_len=24),
    )


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
