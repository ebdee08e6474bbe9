import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def dense_model(model):
    """Materialize M_k = W^(c) (W^(r))^T for verification."""
    if model.k == 0:
        return np.zeros((model.nrows, model.ncols))
    return model.Wc @ model.Wr.T


def random_rank_r(n, r, seed):
    g = np.random.default_rng(seed)
    return g.standard_normal((n, r)) @ g.standard_normal((r, n))
