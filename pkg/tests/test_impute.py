import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from imufs.dataset import MultiViewChunk
from imufs.impute import ColdStartError, ImputeState, impute_chunk, reset


def chunk_of(cols, mask, index=1):
    x = np.array(cols, dtype=float).T
    m = np.array(mask, dtype=bool)
    x[:, ~m] = 0.0
    return MultiViewChunk(index, (x,), (m,))


def test_fully_observed_chunk_passes_through():
    c = chunk_of([[1, 2], [3, 4], [5, 6]], [True] * 3)
    out, state, (w,) = impute_chunk(ImputeState.empty([2]), c)
    assert np.array_equal(out.data[0], c.data[0])
    assert np.all(w == 1.0)
    assert state.total_seen == 3 and state.observed_count == (3,)


def test_single_observation_mean():
    c = chunk_of([[4, 7], [0, 0]], [True, False])
    out, _, (w,) = impute_chunk(ImputeState.empty([2]), c)
    assert np.array_equal(out.data[0][:, 1], [4, 7])
    assert w[1] == 0.5


def test_hand_example_two_thirds_two_quarters():
    c = chunk_of([[1, 3], [3, 1], [0, 0], [0, 0]], [True, True, False, False])
    out, state, (w,) = impute_chunk(ImputeState.empty([2]), c)
    assert np.array_equal(out.data[0][:, 2], [2, 2])
    assert np.array_equal(out.data[0][:, 3], [2, 2])
    assert np.allclose(w, [1, 1, 2 / 3, 2 / 4])


def test_accumulation_is_global_across_chunks():
    s0 = ImputeState.empty([2])
    _, s1, _ = impute_chunk(s0, chunk_of([[1, 3], [3, 1]], [True, True], 1))
    out, s2, (w,) = impute_chunk(s1, chunk_of([[0, 0], [0, 0]], [False, False], 2))
    assert np.array_equal(out.data[0], [[2, 2], [2, 2]])
    assert np.allclose(w, [2 / 3, 2 / 4])
    assert s2.total_seen == 4 and s2.observed_count == (2,)


def test_cold_start_raises_and_fallback():
    c = chunk_of([[0, 0], [1, 1]], [False, True])
    with pytest.raises(ColdStartError):
        impute_chunk(ImputeState.empty([2]), c)
    out, _, (w,) = impute_chunk(ImputeState.empty([2]), c, cold_start_weight=1e-9)
    assert np.array_equal(out.data[0][:, 0], [0, 0])
    assert w[0] == 1e-9 and w[1] == 1.0


def test_reset():
    _, s, _ = impute_chunk(ImputeState.empty([2]), chunk_of([[1, 3]], [True]))
    r = reset(s)
    assert r.total_seen == 0 and r.observed_count == (0,)
    assert all(np.all(a == 0) for a in r.running_sum)
    assert reset(r).equals(r)
    _, _, (w,) = impute_chunk(r, chunk_of([[1, 1], [2, 2]], [True, True]))
    assert np.all(w == 1)


def test_input_state_not_mutated():
    s0 = ImputeState.empty([2])
    _, s1, _ = impute_chunk(s0, chunk_of([[1, 3]], [True]))
    impute_chunk(s1, chunk_of([[5, 5]], [True], 2))
    assert np.array_equal(s1.running_sum[0], [1, 3])
    assert s0.total_seen == 0


@st.composite
def streams(draw):
    d = draw(st.integers(1, 4))
    sizes = draw(st.lists(st.integers(1, 6), min_size=1, max_size=5))
    seed = draw(st.integers(0, 2 ** 31))
    rng = np.random.default_rng(seed)
    chunks = []
    first = True
    for i, n in enumerate(sizes):
        x = rng.uniform(0, 10, size=(d, n))
        m = rng.random(n) < 0.6
        if first:
            m[0] = True
            first = False
        x[:, ~m] = 0.0
        chunks.append(MultiViewChunk(i + 1, (x,), (m,)))
    return d, chunks


@settings(max_examples=200, deadline=None)
@given(streams())
def test_stream_properties(stream):
    d, chunks = stream
    state = ImputeState.empty([d])
    seen = []
    prev_count, prev_total = 0, 0
    fills = []
    for c in chunks:
        out, new, (w,) = impute_chunk(state, c)
        x, m = c.data[0], c.mask[0]
        for j in range(c.n_instances):
            if m[j]:
                assert w[j] == 1.0
                seen.append(x[:, j])
            else:
                lo, hi = np.min(seen, axis=0), np.max(seen, axis=0)
                col = out.data[0][:, j]
                assert np.all(col >= lo - 1e-12) and np.all(col <= hi + 1e-12)
                assert 0 < w[j] < 1
        assert new.observed_count[0] >= prev_count and new.total_seen > prev_total
        assert new.observed_count[0] <= new.total_seen
        prev_count, prev_total = new.observed_count[0], new.total_seen
        fills.append(out.data[0])
        state = new
    # replay is bit-identical
    state = ImputeState.empty([d])
    for c, f in zip(chunks, fills):
        out, state, _ = impute_chunk(state, c)
        assert np.array_equal(out.data[0], f)
