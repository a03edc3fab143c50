"""Batch oracles and the naive recompute baseline.

Used by the test suite and the benchmark command only. The accumulator
oracle re-derives the sums with explicit dense diagonal matrices instead of
sharing code with the incremental path.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
from threadpoolctl import threadpool_limits

from .dataset import chunks_from_order
from .solver import init_solver, process_chunk, update_alpha


@dataclass
class BatchTrace:
    """Per-chunk snapshots of what the incremental path folded."""

    U: list = field(default_factory=list)
    wt: list = field(default_factory=list)
    X: list = field(default_factory=list)
    V: list = field(default_factory=list)
    timings: list = field(default_factory=list)

    def record(self, report, state_after, elapsed=None):
        ws = report.workspace
        if ws is None:
            raise ValueError("report was produced without its workspace")
        self.U.append([u.copy() for u in ws.U])
        self.wt.append([w ** 2 for w in ws.recon_weights])
        self.X.append([np.array(x) for x in ws.X])
        self.V.append([v.copy() for v in state_after.V])
        if elapsed is not None:
            self.timings.append(elapsed)

    def __len__(self):
        return len(self.U)


def batch_accumulators(trace: BatchTrace):
    """Per view ``(R, Q, loss)`` summed directly over every recorded chunk."""
    if len(trace) == 0:
        raise ValueError("empty trace")
    n_v = len(trace.U[0])
    out = []
    for v in range(n_v):
        R = Q = None
        loss = 0.0
        for t in range(len(trace)):
            U, X, V = trace.U[t][v], trace.X[t][v], trace.V[t][v]
            Wt = np.diag(trace.wt[t][v])
            W = np.diag(np.sqrt(trace.wt[t][v]))
            r = U.T @ Wt @ U
            q = X @ Wt @ U
            R = r if R is None else R + r
            Q = q if Q is None else Q + q
            loss += np.linalg.norm((X - V @ U.T) @ W, "fro") ** 2
        out.append((R, Q, loss))
    return out


def run_traced(views, chunks, hp, seed):
    """Incremental run that also records a :class:`BatchTrace`."""
    state = init_solver(views, hp, seed)
    trace = BatchTrace()
    for chunk in chunks:
        t0 = time.perf_counter()
        state, report = process_chunk(state, chunk, hp)
        trace.record(report, state, time.perf_counter() - t0)
    return state, trace


def recompute_from_scratch(views, chunks, hp, seed):
    """Naive baseline: restart from t=1 every time a chunk is appended.

    Returns the state after the last restart and the total elapsed seconds.
    """
    elapsed = 0.0
    state = None
    for i in range(1, len(chunks) + 1):
        t0 = time.perf_counter()
        state = init_solver(views, hp, seed)
        for chunk in chunks[:i]:
            state, _ = process_chunk(state, chunk, hp)
        elapsed += time.perf_counter() - t0
    return state, elapsed


def grid_check_alpha(losses, lam, n_grid=10_000):
    """Gap between the closed-form view weights and a dense simplex grid.

    Two views only: the grid walks ``alpha_1`` over ``n_grid`` points of [0, 1].
    """
    losses = np.asarray(losses, dtype=float)
    if losses.shape != (2,):
        raise ValueError("grid check is defined for exactly two views")
    a = np.linspace(0.0, 1.0, n_grid)
    grid = a ** lam * losses[0] + (1.0 - a) ** lam * losses[1]
    closed = update_alpha(losses, lam)
    f_closed = float(np.sum(closed ** lam * losses))
    return abs(f_closed - float(grid.min()))


# ---------------------------------------------------------------- speedup benchmark

BENCH_COLUMNS = ("workload", "method", "chunks", "elapsed_ms", "IncS")


def speedup_workloads(ds, seed, ratios=(0.1, 0.2, 0.3, 0.4, 0.5), n_chunks=5, initial=0.5):
    """Yield ``(ratio, chunks)``: an initial chunk plus ``n_chunks`` insertions.

    Half the instances (seeded) form the initial data; ``ratio * N``
    instances from the other half arrive in ``n_chunks`` near-equal chunks.
    """
    n = ds.n_instances
    perm = np.random.default_rng(seed).permutation(n)
    n_init = int(round(initial * n))
    rest = perm[n_init:]
    for ratio in ratios:
        n_ins = int(round(ratio * n))
        if n_ins > rest.size:
            raise ValueError(f"insert ratio {ratio} needs {n_ins} instances, only {rest.size} remain")
        if n_ins < n_chunks:
            raise ValueError(f"insert ratio {ratio} gives fewer instances than chunks")
        groups = [perm[:n_init]] + np.array_split(rest[:n_ins], n_chunks)
        yield ratio, chunks_from_order(ds, groups)


def time_incremental(views, chunks, hp, seed):
    t0 = time.perf_counter()
    state = init_solver(views, hp, seed)
    for chunk in chunks:
        state, _ = process_chunk(state, chunk, hp)
    return state, time.perf_counter() - t0


def time_naive(views, chunks, hp, seed):
    """Recompute from scratch at every insertion (the initial chunk is given)."""
    elapsed = 0.0
    state = None
    for i in range(2, len(chunks) + 1):
        t0 = time.perf_counter()
        state = init_solver(views, hp, seed)
        for chunk in chunks[:i]:
            state, _ = process_chunk(state, chunk, hp)
        elapsed += time.perf_counter() - t0
    return state, elapsed


def speedup_benchmark(ds, hp, seed, ratios=(0.1, 0.2, 0.3, 0.4, 0.5), n_chunks=5, name="data"):
    """Rows of ``BENCH_COLUMNS``, two per insertion ratio."""
    rows = []
    with threadpool_limits(1):
        for ratio, chunks in speedup_workloads(ds, seed, ratios, n_chunks):
            _, t_inc = time_incremental(ds.views, chunks, hp, seed)
            _, t_naive = time_naive(ds.views, chunks, hp, seed)
            incs = t_naive / t_inc
            workload = f"{name}:insert={ratio:.1f}"
            rows.append({"workload": workload, "method": "incremental", "chunks": n_chunks,
                         "elapsed_ms": 1e3 * t_inc, "IncS": incs})
            rows.append({"workload": workload, "method": "recompute", "chunks": n_chunks,
                         "elapsed_ms": 1e3 * t_naive, "IncS": incs})
    return rows
