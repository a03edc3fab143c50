"""Planted-subspace synthetic multi-view data."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .dataset import MultiViewDataset, save_dataset


def planted_dataset(n, dims, K, noise_features, seed, spread=1.0, cluster_std=0.1, background=0.1):
    """Gaussian clusters in an informative block per view plus uniform-noise rows.

    View ``v`` has ``dims[v]`` informative rows. Each informative row is
    raised to ``spread`` for one cluster (assigned round-robin, so every
    cluster owns features) and sits at ``background * spread`` for the
    others; Gaussian noise of std ``cluster_std * spread`` is added and the
    result clipped at zero. The ``noise_features[v]`` trailing rows are
    uniform on ``[0, 2 m]`` with ``m`` the expected mean of an informative
    row, so noise rows carry the same average energy but no cluster signal.

    Returns ``(dataset, informative)`` where ``informative[v]`` lists the
    planted row indices of view ``v``.
    """
    if n < K or K < 1:
        raise ValueError(f"need n >= K >= 1, got n={n}, K={K}")
    if np.isscalar(noise_features):
        noise_features = [int(noise_features)] * len(dims)
    if len(noise_features) != len(dims):
        raise ValueError("one noise count per view is required")
    if any(d < 0 for d in dims) or any(z < 0 for z in noise_features):
        raise ValueError("feature counts must be non-negative")
    if any(d + z < 1 for d, z in zip(dims, noise_features)):
        raise ValueError("every view needs at least one feature")

    rng = np.random.default_rng(seed)
    labels = np.concatenate([np.arange(K), rng.integers(0, K, size=n - K)])
    rng.shuffle(labels)
    mean_level = spread * (1.0 + (K - 1) * background) / K
    data, informative = [], []
    for d, z in zip(dims, noise_features):
        owner = (np.arange(d) + rng.integers(K)) % K
        centres = np.full((d, K), background * spread)
        centres[np.arange(d), owner] = spread
        inf = centres[:, labels] + rng.normal(0.0, cluster_std * spread, size=(d, n))
        noise = rng.uniform(0.0, 2.0 * mean_level, size=(z, n))
        data.append(np.maximum(np.vstack([inf, noise]), 0.0))
        informative.append(list(range(d)))
    return MultiViewDataset.from_arrays(data, labels=labels), informative


def write_planted(directory, n, dims, K, noise_features, seed, **kw):
    """Write a planted dataset plus ``planted.json`` listing informative rows."""
    ds, informative = planted_dataset(n, dims, K, noise_features, seed, **kw)
    manifest = save_dataset(ds, directory)
    with open(Path(directory) / "planted.json", "w") as f:
        json.dump({"informative": informative, "seed": seed, "K": K}, f, indent=2)
    return manifest


def recovery_precision(selected, informative):
    """Fraction of selected features (pooled over views) that were planted."""
    hits = total = 0
    for idx, planted in zip(selected, informative):
        planted = set(planted)
        hits += sum(int(i) in planted for i in idx)
        total += len(idx)
    return hits / total if total else 0.0
