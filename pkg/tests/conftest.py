import numpy as np
import pytest

from imufs import Hyperparams, chunkify, init_solver, mask_incomplete
from imufs.synth import planted_dataset


def make_stream(n=60, dims=(8, 10), noise=(4, 5), K=3, ratio=0.5, n_chunks=3, seed=0):
    ds, informative = planted_dataset(n, list(dims), K, list(noise), seed)
    ds = mask_incomplete(ds, ratio, seed)
    return ds, chunkify(ds, n_chunks, seed), informative


@pytest.fixture
def small_stream():
    return make_stream()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def hp():
    return Hyperparams(K=3, max_iters=60)


@pytest.fixture
def fresh_state(small_stream, hp):
    ds, _, _ = small_stream
    return init_solver(ds.views, hp, seed=0)
