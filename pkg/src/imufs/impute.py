"""Streaming mean imputation and per-instance confidence weights.

A missing view-instance is replaced by the running mean of every instance
observed in that view so far (across all chunks), and receives the weight
``observed_count / total_seen`` at the moment it arrives. Observed
instances get weight 1.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .dataset import MultiViewChunk


class ColdStartError(RuntimeError):
    """A view has a missing instance before any observation of that view."""

    def __init__(self, view):
        super().__init__(f"view {view}: missing instance before any observation (cold start)")
        self.view = view


@dataclass(frozen=True)
class ImputeState:
    running_sum: tuple
    observed_count: tuple
    total_seen: int = 0

    @classmethod
    def empty(cls, dims):
        return cls(tuple(np.zeros(d) for d in dims), tuple(0 for _ in dims), 0)

    @property
    def dims(self):
        return [s.shape[0] for s in self.running_sum]

    def equals(self, other):
        return (self.total_seen == other.total_seen
                and self.observed_count == other.observed_count
                and all(np.array_equal(a, b) for a, b in zip(self.running_sum, other.running_sum)))


def reset(state: ImputeState) -> ImputeState:
    return ImputeState.empty(state.dims)


def impute_chunk(state: ImputeState, chunk: MultiViewChunk, cold_start_weight=None):
    """Fill the placeholders of ``chunk`` in stream order.

    Returns ``(filled_chunk, new_state, weights)`` where ``weights[v]`` is the
    diagonal of the view's weight matrix. If ``cold_start_weight`` is given, a
    missing instance in a never-observed view is filled with zeros and gets
    that weight instead of raising :class:`ColdStartError`.
    """
    n = chunk.n_instances
    filled, weights, sums, counts = [], [], [], []
    for v, (x, m) in enumerate(zip(chunk.data, chunk.mask)):
        s = state.running_sum[v].copy()
        c = state.observed_count[v]
        out = np.array(x, dtype=float)
        w = np.ones(n)
        for j in range(n):
            seen = state.total_seen + j + 1
            if m[j]:
                s += out[:, j]
                c += 1
            elif c == 0:
                if cold_start_weight is None:
                    raise ColdStartError(v)
                out[:, j] = 0.0
                w[j] = cold_start_weight
            else:
                out[:, j] = s / c
                w[j] = c / seen
        filled.append(out)
        weights.append(w)
        sums.append(s)
        counts.append(c)
    new_state = ImputeState(tuple(sums), tuple(counts), state.total_seen + n)
    for a in filled:
        a.setflags(write=False)
    filled_chunk = replace(chunk, data=tuple(filled))
    return filled_chunk, new_state, weights
