"""Incremental incomplete multi-view unsupervised feature selection.

One latent feature matrix ``V[v]`` (``d_v x K``) per view is learned from a
stream of chunks. Each chunk gets its own clustering indicators ``U[v]``
(``N_t x K``), a consensus indicator ``Ustar`` and per-view Laplacians; the
chunk is optimized by alternating multiplicative updates of ``V`` and ``U``
and closed-form updates of ``Ustar`` and the view weights ``alpha``. Once a
chunk converges its contribution is folded into running accumulators

    R[v] += U^T W~ U        Q[v] += X W~ U        (W~ = W W^T, diagonal)

so later chunks update ``V`` against the whole history without revisiting it.
Features are ranked by the row norms of ``V``.
"""

from __future__ import annotations

import json
import logging
import math
import warnings
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from .dataset import MultiViewChunk, ViewSpec
from .graph import SimilarityGraph, build_graph
from .impute import ImputeState, impute_chunk
from .metrics import kmeans

log = logging.getLogger(__name__)

I2MUFS = "I2MUFS"
C_I2MUFS = "C_I2MUFS"
VARIANTS = (I2MUFS, C_I2MUFS)

CHECKPOINT_FORMAT = "imufs-checkpoint"
CHECKPOINT_VERSION = 1


class DivergenceError(FloatingPointError):
    pass


PerView = Union[float, Sequence[float]]


@dataclass(frozen=True)
class Hyperparams:
    K: int = 3
    lam: float = 3.0
    beta: PerView = 0.1
    theta: PerView = 0.1
    eta: PerView = 0.1
    xi: PerView = 1e5
    eps: float = 1e-9
    max_iters: int = 200
    rel_tol: float = 1e-5
    graph_k: int = 5
    variant: str = I2MUFS

    def __post_init__(self):
        if self.K < 2:
            raise ValueError(f"K must be >= 2, got {self.K}")
        if not self.lam > 1:
            raise ValueError(f"lambda must be > 1, got {self.lam}")
        if self.lam < 2:
            warnings.warn(f"lambda={self.lam} is below the usual grid start of 2", stacklevel=3)
        for name in ("beta", "theta", "eta"):
            if np.any(np.asarray(getattr(self, name)) < 0):
                raise ValueError(f"{name} must be non-negative")
        if np.any(np.asarray(self.xi) <= 0):
            raise ValueError("xi must be positive")
        if self.eps <= 0:
            raise ValueError("eps must be positive")
        if self.max_iters < 1 or self.rel_tol <= 0 or self.graph_k < 1:
            raise ValueError("max_iters, rel_tol and graph_k must be positive")
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant!r}")

    def per_view(self, name, n_views) -> np.ndarray:
        value = np.asarray(getattr(self, name), dtype=float)
        if value.ndim == 0:
            return np.full(n_views, float(value))
        if value.shape != (n_views,):
            raise ValueError(f"{name}: expected {n_views} per-view values, got {value.shape}")
        return value

    def replace(self, **changes):
        kw = {f.name: getattr(self, f.name) for f in fields(self)}
        kw.update(changes)
        return Hyperparams(**kw)

    def to_dict(self):
        out = {}
        for f in fields(self):
            value = getattr(self, f.name)
            out[f.name] = list(value) if isinstance(value, (tuple, list, np.ndarray)) else value
        return out


@dataclass
class SolverState:
    V: list
    R: list
    Q: list
    loss_acc: np.ndarray
    # sum of tr(X W~ X^T) over folded chunks; lets the history's
    # reconstruction error be evaluated at the current V
    xx_acc: np.ndarray
    alpha: np.ndarray
    impute_state: ImputeState
    chunks_seen: int = 0
    seed: int = 0

    @property
    def n_views(self):
        return len(self.V)

    @property
    def dims(self):
        return [v.shape[0] for v in self.V]

    def copy(self):
        return SolverState(
            V=[v.copy() for v in self.V],
            R=[r.copy() for r in self.R],
            Q=[q.copy() for q in self.Q],
            loss_acc=self.loss_acc.copy(),
            xx_acc=self.xx_acc.copy(),
            alpha=self.alpha.copy(),
            impute_state=self.impute_state,
            chunks_seen=self.chunks_seen,
            seed=self.seed,
        )

    def history_loss(self, view, V=None):
        """Weighted reconstruction error of all folded chunks at ``V``."""
        V = self.V[view] if V is None else V
        R, Q = self.R[view], self.Q[view]
        return float(self.xx_acc[view] - 2.0 * np.sum(V * Q) + np.sum((V.T @ V) * R))


@dataclass
class ChunkWorkspace:
    X: list
    U: list
    Ustar: np.ndarray
    weights: list
    # diagonal used inside the reconstruction term: ``weights`` for the
    # full model, the 0/1 observation indicator for the C variant
    recon_weights: list
    graphs: list
    objective_trace: list = field(default_factory=list)

    @property
    def n_instances(self):
        return self.Ustar.shape[0]


@dataclass
class ChunkReport:
    chunk_index: int
    objective_trace: list
    iterations: int
    converged: bool
    alpha: np.ndarray
    workspace: Optional[ChunkWorkspace] = None


# ---------------------------------------------------------------- setup

def init_solver(views: Sequence[ViewSpec], hp: Hyperparams, seed: int) -> SolverState:
    dims = [v.dim for v in views]
    if hp.K > min(dims):
        warnings.warn(f"K={hp.K} exceeds the smallest view dimension {min(dims)}", stacklevel=2)
    rng = np.random.default_rng(seed)
    # 1 - U[0, 1) is uniform on (0, 1]; strictly positive entries keep the
    # multiplicative updates live
    V = [(1.0 - rng.random((d, hp.K))) * 1e-2 for d in dims]
    n_v = len(dims)
    return SolverState(
        V=V,
        R=[np.zeros((hp.K, hp.K)) for _ in dims],
        Q=[np.zeros((d, hp.K)) for d in dims],
        loss_acc=np.zeros(n_v),
        xx_acc=np.zeros(n_v),
        alpha=np.full(n_v, 1.0 / n_v),
        impute_state=ImputeState.empty(dims),
        chunks_seen=0,
        seed=int(seed),
    )


def init_indicator(X, K, seed, smoothing=0.2):
    """Strictly positive warm start for U: smoothed one-hot k-means labels."""
    n = X.shape[1]
    labels = kmeans(X, min(K, n), seed=seed, restarts=1).assignments
    U = np.full((n, K), smoothing)
    U[np.arange(n), labels] += 1.0
    return U / np.linalg.norm(U, axis=0)


def _recon_coef(state, hp, view):
    if hp.variant == C_I2MUFS:
        return 1.0
    return float(state.alpha[view] ** hp.lam)


def _check_finite(a, what):
    if not np.all(np.isfinite(a)):
        raise DivergenceError(f"non-finite values in {what}")
    return a


def staged_accumulators(state, ws, view):
    """R and Q including the current chunk at its current U iterate."""
    U, X = ws.U[view], ws.X[view]
    wt = ws.recon_weights[view] ** 2
    WU = wt[:, None] * U
    return state.R[view] + U.T @ WU, state.Q[view] + X @ WU


# ---------------------------------------------------------------- block updates

def update_V(state: SolverState, ws: ChunkWorkspace, view: int, hp: Hyperparams) -> np.ndarray:
    """Multiplicative update of ``V[view]`` against history plus current chunk."""
    V = state.V[view]
    R, Q = staged_accumulators(state, ws, view)
    c = _recon_coef(state, hp, view)
    eta = hp.per_view("eta", state.n_views)[view]
    h = 1.0 / (np.linalg.norm(V, axis=1) + hp.eps)
    num = 2.0 * c * Q
    den = 2.0 * c * (V @ R) + eta * h[:, None] * V
    np.maximum(den, hp.eps, out=den)
    return _check_finite(V * np.sqrt(num / den), f"V[{view}]")


def split_graph_term(theta, L):
    Z = theta * L
    absZ = np.abs(Z)
    return 0.5 * (absZ + Z), 0.5 * (absZ - Z)


def update_U(state: SolverState, ws: ChunkWorkspace, view: int, hp: Hyperparams) -> np.ndarray:
    """Multiplicative update of the chunk indicator ``U[view]``.

    Descends the reconstruction, consensus and graph terms plus the soft
    orthogonality penalty ``xi * ||U^T U - I||_F^2``.
    """
    n_v = state.n_views
    U, X, V = ws.U[view], ws.X[view], state.V[view]
    c = _recon_coef(state, hp, view)
    beta = hp.per_view("beta", n_v)[view]
    theta = hp.per_view("theta", n_v)[view]
    xi = hp.per_view("xi", n_v)[view]
    rw = ws.recon_weights[view][:, None] ** 2
    cw = ws.weights[view][:, None] ** 2
    Zp, Zm = split_graph_term(theta, ws.graphs[view].L)

    G = c * rw * (X.T @ V) + beta * cw * ws.Ustar + 2.0 * xi * U + Zm @ U
    P = c * rw * (U @ (V.T @ V)) + beta * cw * U + Zp @ U + 2.0 * xi * (U @ (U.T @ U))
    np.maximum(P, hp.eps, out=P)
    return _check_finite(U * np.sqrt(G / P), f"U[{view}]")


def update_Ustar(ws: ChunkWorkspace, hp: Hyperparams) -> np.ndarray:
    """Closed-form consensus indicator: per-row weighted average of the views' U."""
    n_v = len(ws.U)
    beta = hp.per_view("beta", n_v)
    num = np.zeros_like(ws.U[0])
    den = np.zeros(ws.U[0].shape[0])
    # fixed view order keeps the reduction deterministic
    for v in range(n_v):
        wt = beta[v] * ws.weights[v] ** 2
        num += wt[:, None] * ws.U[v]
        den += wt
    if np.any(den <= 0):
        raise ValueError("degenerate consensus: a row has zero total weight (all beta = 0?)")
    return num / den[:, None]


def update_alpha(losses, lam: float, eps: float = 1e-9) -> np.ndarray:
    """View weights minimising ``sum_v alpha_v**lam * losses_v`` on the simplex."""
    if not lam > 1:
        raise ValueError(f"lambda must be > 1, got {lam}")
    L = np.maximum(np.asarray(losses, dtype=float), eps)
    # log domain: the exponent 1/(1-lam) can overflow for tiny losses
    logp = np.log(L) / (1.0 - lam)
    p = np.exp(logp - logp.max())
    return p / p.sum()


# ---------------------------------------------------------------- objective

def chunk_recon_loss(X, V, U, w):
    """``||(X - V U^T) diag(w)||_F^2``."""
    E = (X - V @ U.T) * w[None, :]
    return float(np.sum(E * E))


def l21_norm(V):
    return float(np.sum(np.linalg.norm(V, axis=1)))


def view_losses(state, ws):
    """Reconstruction error per view over history and the current chunk."""
    return np.array([
        state.history_loss(v) + chunk_recon_loss(ws.X[v], state.V[v], ws.U[v], ws.recon_weights[v])
        for v in range(state.n_views)
    ])


def objective(state: SolverState, ws: ChunkWorkspace, hp: Hyperparams,
              orthogonality: bool = False) -> float:
    """Model objective at the current iterates.

    Sums, per view, the (alpha-weighted) reconstruction error of the current
    chunk and of every folded chunk at the current ``V``, the consensus and
    graph terms of the current chunk and the l2,1 penalty on ``V``. With
    ``orthogonality`` the soft penalty ``xi ||U^T U - I||_F^2`` minimised by
    the U update is added as well.
    """
    n_v = state.n_views
    beta, theta = hp.per_view("beta", n_v), hp.per_view("theta", n_v)
    eta, xi = hp.per_view("eta", n_v), hp.per_view("xi", n_v)
    K = ws.Ustar.shape[1]
    total = 0.0
    for v in range(n_v):
        U, V, w = ws.U[v], state.V[v], ws.weights[v]
        recon = state.history_loss(v) + chunk_recon_loss(ws.X[v], V, U, ws.recon_weights[v])
        D = (U - ws.Ustar) * w[:, None]
        total += _recon_coef(state, hp, v) * recon
        total += beta[v] * float(np.sum(D * D))
        total += theta[v] * float(np.sum(U * (ws.graphs[v].L @ U)))
        total += eta[v] * l21_norm(V)
        if orthogonality:
            O = U.T @ U - np.eye(K)
            total += xi[v] * float(np.sum(O * O))
    if not math.isfinite(total):
        raise DivergenceError("objective is not finite")
    return total


def orthogonality_gap(U):
    return float(np.linalg.norm(U.T @ U - np.eye(U.shape[1])))


# ---------------------------------------------------------------- driver

def _chunk_graph(X, k):
    n = X.shape[1]
    if n < 2:
        return SimilarityGraph.from_similarity(np.zeros((n, n)))
    return build_graph(X, k=min(k, n - 1))


def prepare_chunk(state: SolverState, chunk: MultiViewChunk, hp: Hyperparams):
    """Impute, weight, build graphs and warm-start U for one chunk."""
    if chunk.n_views != state.n_views:
        raise ValueError(f"chunk has {chunk.n_views} views, solver has {state.n_views}")
    for v, (x, d) in enumerate(zip(chunk.data, state.dims)):
        if x.shape[0] != d:
            raise ValueError(f"view {v}: chunk has {x.shape[0]} features, solver has {d}")
    filled, imp_state, weights = impute_chunk(state.impute_state, chunk, cold_start_weight=hp.eps)
    X = [np.asarray(x) for x in filled.data]
    if hp.variant == C_I2MUFS:
        recon_weights = [m.astype(float) for m in chunk.mask]
    else:
        recon_weights = weights
    position = state.chunks_seen + 1
    U = [init_indicator(X[v], hp.K, seed=[state.seed, position, v]) for v in range(len(X))]
    graphs = [_chunk_graph(x, hp.graph_k) for x in X]
    ws = ChunkWorkspace(X=X, U=U, Ustar=np.zeros_like(U[0]), weights=weights,
                        recon_weights=recon_weights, graphs=graphs)
    ws.Ustar = update_Ustar(ws, hp)
    return ws, imp_state


def fold_chunk(state: SolverState, ws: ChunkWorkspace):
    """Add the converged chunk to the running accumulators (in place)."""
    for v in range(state.n_views):
        U, X = ws.U[v], ws.X[v]
        wt = ws.recon_weights[v] ** 2
        WU = wt[:, None] * U
        state.R[v] = state.R[v] + U.T @ WU
        state.Q[v] = state.Q[v] + X @ WU
        state.loss_acc[v] += chunk_recon_loss(X, state.V[v], U, ws.recon_weights[v])
        state.xx_acc[v] += float(np.sum(X * X * wt[None, :]))
    state.chunks_seen += 1


def process_chunk(state: SolverState, chunk: MultiViewChunk, hp: Hyperparams, on_iteration=None):
    """Optimize one chunk and fold it into the state.

    Returns ``(new_state, report)``; the input state is not modified. The
    recorded objective includes the orthogonality penalty, which is the
    quantity the updates are guaranteed not to increase.
    ``on_iteration(state, ws, iteration)`` is called after every sweep.
    """
    state = state.copy()
    ws, imp_state = prepare_chunk(state, chunk, hp)
    n_v = state.n_views
    prev = None
    converged = False
    it = 0
    for it in range(1, hp.max_iters + 1):
        for v in range(n_v):
            state.V[v] = update_V(state, ws, v, hp)
            ws.U[v] = update_U(state, ws, v, hp)
        ws.Ustar = update_Ustar(ws, hp)
        if hp.variant == I2MUFS:
            state.alpha = update_alpha(view_losses(state, ws), hp.lam, hp.eps)
        f = objective(state, ws, hp, orthogonality=True)
        ws.objective_trace.append(f)
        if on_iteration is not None:
            on_iteration(state, ws, it)
        if prev is not None and abs(prev - f) <= hp.rel_tol * max(abs(prev), hp.eps):
            converged = True
            break
        prev = f
    fold_chunk(state, ws)
    state.impute_state = imp_state
    log.debug("chunk %d: %d iterations, converged=%s, alpha=%s",
              chunk.chunk_index, it, converged, state.alpha)
    report = ChunkReport(chunk.chunk_index, list(ws.objective_trace), it, converged,
                         state.alpha.copy(), ws)
    return state, report


def process_chunk_variant_c(state: SolverState, chunk: MultiViewChunk, hp: Hyperparams,
                            on_iteration=None):
    """Ablation: binary observation weights, unweighted reconstruction term."""
    return process_chunk(state, chunk, hp.replace(variant=C_I2MUFS), on_iteration)


def run_stream(state: SolverState, chunks, hp: Hyperparams, keep_workspaces=False):
    reports = []
    for chunk in chunks:
        state, report = process_chunk(state, chunk, hp)
        if not keep_workspaces:
            report.workspace = None
        reports.append(report)
    return state, reports


# ---------------------------------------------------------------- selection

def rank_features(state: SolverState):
    """Per view, ``(feature_index, score)`` sorted by descending row norm of V."""
    ranking = []
    for V in state.V:
        scores = np.linalg.norm(V, axis=1)
        order = np.lexsort((np.arange(scores.size), -scores))
        ranking.append([(int(i), float(scores[i])) for i in order])
    return ranking


def select_features(ranking, ratio: float):
    """Top ``ceil(ratio * d_v)`` feature indices per view, in rank order."""
    if not 0 < ratio <= 1:
        raise ValueError(f"feature ratio must be in (0, 1], got {ratio}")
    out = []
    for view_rank in ranking:
        # guard against ratio * d landing a hair above an integer
        n = min(len(view_rank), math.ceil(round(ratio * len(view_rank), 9)))
        out.append(np.array([i for i, _ in view_rank[:n]], dtype=int))
    return out


# ---------------------------------------------------------------- checkpoints

def _pack(a):
    a = np.asarray(a, dtype=float)
    return {"shape": list(a.shape), "data": a.ravel(order="C").tolist()}


def _unpack(d):
    return np.array(d["data"], dtype=float).reshape(d["shape"], order="C")


def state_to_dict(state: SolverState) -> dict:
    imp = state.impute_state
    return {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "seed": state.seed,
        "chunks_seen": state.chunks_seen,
        "dims": state.dims,
        "V": [_pack(a) for a in state.V],
        "R": [_pack(a) for a in state.R],
        "Q": [_pack(a) for a in state.Q],
        "loss_acc": _pack(state.loss_acc),
        "xx_acc": _pack(state.xx_acc),
        "alpha": _pack(state.alpha),
        "impute": {
            "running_sum": [_pack(a) for a in imp.running_sum],
            "observed_count": list(imp.observed_count),
            "total_seen": imp.total_seen,
        },
    }


def state_from_dict(d: dict) -> SolverState:
    if d.get("format") != CHECKPOINT_FORMAT:
        raise ValueError("not a solver checkpoint")
    if d.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {d.get('version')}")
    imp = d["impute"]
    return SolverState(
        V=[_unpack(a) for a in d["V"]],
        R=[_unpack(a) for a in d["R"]],
        Q=[_unpack(a) for a in d["Q"]],
        loss_acc=_unpack(d["loss_acc"]),
        xx_acc=_unpack(d["xx_acc"]),
        alpha=_unpack(d["alpha"]),
        impute_state=ImputeState(tuple(_unpack(a) for a in imp["running_sum"]),
                                 tuple(int(c) for c in imp["observed_count"]),
                                 int(imp["total_seen"])),
        chunks_seen=int(d["chunks_seen"]),
        seed=int(d["seed"]),
    )


def save_checkpoint(state: SolverState, path, meta=None):
    """Write ``state`` as JSON. Floats use shortest round-trip repr, so a
    reload is bit-identical."""
    payload = state_to_dict(state)
    if meta is not None:
        payload["meta"] = meta
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "w") as f:
        json.dump(payload, f)
    tmp.replace(path)
    return path


def load_checkpoint(path):
    with open(path) as f:
        payload = json.load(f)
    return state_from_dict(payload), payload.get("meta")


def states_equal(a: SolverState, b: SolverState) -> bool:
    same = lambda xs, ys: len(xs) == len(ys) and all(np.array_equal(x, y) for x, y in zip(xs, ys))
    return (same(a.V, b.V) and same(a.R, b.R) and same(a.Q, b.Q)
            and np.array_equal(a.loss_acc, b.loss_acc) and np.array_equal(a.xx_acc, b.xx_acc)
            and np.array_equal(a.alpha, b.alpha) and a.chunks_seen == b.chunks_seen
            and a.seed == b.seed and a.impute_state.equals(b.impute_state))
