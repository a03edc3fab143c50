"""Multi-view datasets: loading, incompleteness masking and chunking into a stream.

Matrices are stored feature-major: each view is a ``d_v x N`` array whose
columns are instances. Instances missing from a view keep a zero-filled
placeholder column and ``mask[v][j] = False``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np


class DatasetError(ValueError):
    pass


@dataclass(frozen=True)
class ViewSpec:
    view_id: int
    dim: int
    name: str = ""

    def __post_init__(self):
        if self.dim < 1:
            raise DatasetError(f"view {self.view_id}: dim must be >= 1, got {self.dim}")


def _check_views(views: Sequence[ViewSpec]):
    if not views:
        raise DatasetError("at least one view is required")
    ids = [v.view_id for v in views]
    if ids != list(range(len(views))):
        raise DatasetError(f"view ids must be contiguous 0..{len(views) - 1}, got {ids}")


def _readonly(a):
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class MultiViewDataset:
    views: tuple
    data: tuple
    mask: tuple
    labels: Optional[np.ndarray] = None

    def __post_init__(self):
        _check_views(self.views)
        if len(self.data) != len(self.views) or len(self.mask) != len(self.views):
            raise DatasetError("data/mask must have one entry per view")
        n = self.data[0].shape[1]
        for spec, x, m in zip(self.views, self.data, self.mask):
            if x.ndim != 2 or x.shape[0] != spec.dim:
                raise DatasetError(
                    f"view {spec.view_id}: expected {spec.dim} feature rows, got shape {x.shape}")
            if x.shape[1] != n:
                raise DatasetError(
                    f"instance count mismatch: view 0 has {n}, view {spec.view_id} has {x.shape[1]}")
            if m.shape != (n,):
                raise DatasetError(f"view {spec.view_id}: mask length {m.shape} != {n}")
            if not np.all(np.isfinite(x)):
                raise DatasetError(f"view {spec.view_id}: non-finite entry")
            if np.any(x < 0):
                raise DatasetError(f"view {spec.view_id}: negative entry")
        if n < 1:
            raise DatasetError("dataset has no instances")
        present = np.any(np.vstack(self.mask), axis=0)
        if not present.all():
            j = int(np.flatnonzero(~present)[0])
            raise DatasetError(f"instance {j} is absent from all views")
        if self.labels is not None and self.labels.shape != (n,):
            raise DatasetError(f"labels length {self.labels.shape} != {n}")

    @classmethod
    def from_arrays(cls, data, mask=None, labels=None, names=None):
        """Build a validated dataset from per-view ``d_v x N`` arrays.

        Columns where ``mask`` is false are zeroed.
        """
        data = [np.array(x, dtype=float) for x in data]
        if mask is None:
            mask = [np.ones(x.shape[1], dtype=bool) for x in data]
        mask = [np.array(m, dtype=bool) for m in mask]
        names = names or [f"view{v}" for v in range(len(data))]
        views = tuple(ViewSpec(v, x.shape[0], names[v]) for v, x in enumerate(data))
        for x, m in zip(data, mask):
            if m.shape == (x.shape[1],):
                x[:, ~m] = 0.0
        if labels is not None:
            labels = np.asarray(labels, dtype=int).copy()
            _readonly(labels)
        return cls(views, tuple(_readonly(x) for x in data), tuple(_readonly(m) for m in mask), labels)

    @property
    def n_views(self):
        return len(self.views)

    @property
    def n_instances(self):
        return self.data[0].shape[1]

    def subset(self, idx):
        idx = np.asarray(idx, dtype=int)
        labels = None if self.labels is None else self.labels[idx]
        return MultiViewDataset.from_arrays(
            [x[:, idx] for x in self.data], [m[idx] for m in self.mask], labels,
            [v.name for v in self.views])


@dataclass(frozen=True)
class MultiViewChunk:
    chunk_index: int
    data: tuple
    mask: tuple
    labels: Optional[np.ndarray] = None
    instance_ids: Optional[np.ndarray] = field(default=None, compare=False)

    def __post_init__(self):
        if self.chunk_index < 1:
            raise DatasetError("chunk_index starts at 1")
        n = self.data[0].shape[1]
        if n < 1:
            raise DatasetError("empty chunk")
        for x, m in zip(self.data, self.mask):
            if x.shape[1] != n or m.shape != (n,):
                raise DatasetError("chunk views disagree on instance count")

    @property
    def n_instances(self):
        return self.data[0].shape[1]

    @property
    def n_views(self):
        return len(self.data)


# ---------------------------------------------------------------- I/O

def _read_matrix(path):
    path = Path(path)
    if not path.exists():
        raise DatasetError(f"missing file: {path}")
    a = np.loadtxt(path, delimiter=",", ndmin=2, dtype=float)
    return a


def load_dataset(manifest_path) -> MultiViewDataset:
    """Load a dataset described by a JSON manifest.

    Manifest fields: ``views`` (list of ``{name, dim, csv_path}``), optional
    ``labels_csv`` and ``mask_csv``, and ``n_instances``. Relative paths are
    resolved against the manifest's directory.
    """
    manifest_path = Path(manifest_path)
    if not manifest_path.exists():
        raise DatasetError(f"missing file: {manifest_path}")
    with open(manifest_path) as f:
        manifest = json.load(f)
    root = manifest_path.parent

    data, names = [], []
    for v, entry in enumerate(manifest["views"]):
        x = _read_matrix(root / entry["csv_path"])
        dim = int(entry.get("dim", x.shape[0]))
        if x.shape[0] != dim:
            raise DatasetError(f"view {v}: manifest dim {dim} but file has {x.shape[0]} rows")
        data.append(x)
        names.append(entry.get("name", f"view{v}"))
    counts = [x.shape[1] for x in data]
    if len(set(counts)) != 1:
        raise DatasetError(f"instance count mismatch across views: {counts}")
    n = counts[0]
    if "n_instances" in manifest and int(manifest["n_instances"]) != n:
        raise DatasetError(f"instance count mismatch: manifest says {manifest['n_instances']}, files have {n}")

    mask = None
    if manifest.get("mask_csv"):
        m = _read_matrix(root / manifest["mask_csv"])
        if m.shape != (len(data), n):
            raise DatasetError(f"mask shape {m.shape} != ({len(data)}, {n})")
        if not np.isin(m, (0, 1)).all():
            raise DatasetError("mask entries must be 0 or 1")
        mask = [row.astype(bool) for row in m]

    labels = None
    if manifest.get("labels_csv"):
        labels = np.loadtxt(root / manifest["labels_csv"], dtype=int, ndmin=1)
    return MultiViewDataset.from_arrays(data, mask, labels, names)


def save_dataset(ds: MultiViewDataset, directory, stem="data") -> Path:
    """Write ``ds`` as manifest + CSV files; returns the manifest path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    views = []
    for spec, x in zip(ds.views, ds.data):
        fname = f"{stem}_view{spec.view_id}.csv"
        # 17 significant digits keep the round trip bit-exact
        np.savetxt(directory / fname, x, delimiter=",", fmt="%.17g")
        views.append({"name": spec.name, "dim": spec.dim, "csv_path": fname})
    manifest = {"views": views, "n_instances": ds.n_instances}
    if not all(m.all() for m in ds.mask):
        np.savetxt(directory / f"{stem}_mask.csv", np.vstack(ds.mask).astype(int),
                   delimiter=",", fmt="%d")
        manifest["mask_csv"] = f"{stem}_mask.csv"
    if ds.labels is not None:
        np.savetxt(directory / f"{stem}_labels.csv", ds.labels, fmt="%d")
        manifest["labels_csv"] = f"{stem}_labels.csv"
    path = directory / f"{stem}.json"
    with open(path, "w") as f:
        json.dump(manifest, f, indent=2)
    return path


# ---------------------------------------------------------------- protocol

def mask_incomplete(ds: MultiViewDataset, ratio: float, seed: int) -> MultiViewDataset:
    """Make ``floor(ratio * N)`` instances view-incomplete.

    Each selected instance loses a uniformly drawn nonempty strict subset of
    the views it is currently present in, so it stays present somewhere.
    Instances present in a single view cannot lose anything and are never
    selected.
    """
    if not 0.0 <= ratio < 1.0:
        raise DatasetError(f"ratio must lie in [0, 1), got {ratio}")
    if ds.n_views == 1 and ratio > 0:
        raise DatasetError("cannot mask a single-view dataset without emptying instances")
    n_sel = int(np.floor(ratio * ds.n_instances))
    if n_sel == 0:
        return ds

    rng = np.random.default_rng(seed)
    mask = np.vstack(ds.mask).copy()
    present = mask.sum(axis=0)
    eligible = np.flatnonzero(present >= 2)
    if eligible.size < n_sel:
        raise DatasetError(
            f"only {eligible.size} instances are present in >= 2 views, need {n_sel}")
    chosen = np.sort(rng.choice(eligible, size=n_sel, replace=False))
    for j in chosen:
        views = np.flatnonzero(mask[:, j])
        # nonempty strict subset: size in [1, |views| - 1]
        size = rng.integers(1, views.size)
        drop = rng.choice(views, size=size, replace=False)
        mask[drop, j] = False
    return MultiViewDataset.from_arrays(
        [x.copy() for x in ds.data], list(mask), ds.labels, [v.name for v in ds.views])


def chunkify(ds: MultiViewDataset, n_chunks: int, seed: int) -> list:
    """Shuffle instances (seeded) and split them into ``n_chunks`` near-equal chunks."""
    n = ds.n_instances
    if n_chunks < 1 or n_chunks > n:
        raise DatasetError(f"n_chunks must be in [1, {n}], got {n_chunks}")
    perm = np.random.default_rng(seed).permutation(n)
    return chunks_from_order(ds, np.array_split(perm, n_chunks))


def chunks_from_order(ds: MultiViewDataset, index_groups) -> list:
    chunks = []
    for t, idx in enumerate(index_groups, start=1):
        idx = np.asarray(idx, dtype=int)
        labels = None if ds.labels is None else _readonly(ds.labels[idx].copy())
        chunks.append(MultiViewChunk(
            chunk_index=t,
            data=tuple(_readonly(x[:, idx].copy()) for x in ds.data),
            mask=tuple(_readonly(m[idx].copy()) for m in ds.mask),
            labels=labels,
            instance_ids=_readonly(idx.copy()),
        ))
    return chunks
