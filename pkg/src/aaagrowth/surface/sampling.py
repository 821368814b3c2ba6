"""Farthest point subsampling and nearest-coarse-vertex clustering."""

from __future__ import annotations

import numpy as np
from scipy.spatial import cKDTree


def farthest_point_sample(points: np.ndarray, ratio: float, seed: int = 0,
                          start: int | None = None) -> np.ndarray:
    """Greedy max-min farthest point subsampling.

    Returns m = max(1, round(ratio * n)) vertex indices.  The first index is
    drawn deterministically from `seed` (or taken from `start`, which callers
    can derive from the geometry to make the selection stable under vertex
    re-indexing); later picks maximize the minimum Euclidean distance to
    already-selected points, ties broken by lowest index (argmax returns the
    first maximum).
    """
    points = np.asarray(points, dtype=np.float64)
    n = len(points)
    if n == 0:
        raise ValueError("empty point set")
    if not (0.0 < ratio <= 1.0):
        raise ValueError("ratio must be in (0, 1]")
    m = max(1, int(round(ratio * n)))
    rng = np.random.default_rng(seed)
    selected = np.empty(m, dtype=np.int64)
    selected[0] = rng.integers(n) if start is None else int(start)
    dists = np.linalg.norm(points - points[selected[0]], axis=1)
    for i in range(1, m):
        idx = int(np.argmax(dists))
        selected[i] = idx
        dists = np.minimum(dists, np.linalg.norm(points - points[idx], axis=1))
    return selected


def cluster_assign(points: np.ndarray, coarse_indices: np.ndarray) -> np.ndarray:
    """Assign each point to its nearest coarse vertex.

    Returns an (n,) array of positions into `coarse_indices`.  Ties go to the
    coarse vertex with the lowest position (and hence lowest vertex index for
    FPS output ordering); every coarse vertex is assigned to itself.
    """
    points = np.asarray(points, dtype=np.float64)
    coarse_indices = np.asarray(coarse_indices, dtype=np.int64)
    if len(coarse_indices) == 0:
        raise ValueError("coarse_indices must be nonempty")
    coarse = points[coarse_indices]
    # squared distances; resolve near-ties deterministically by lowest position
    d2 = ((points[:, None, :] - coarse[None, :, :]) ** 2).sum(axis=2) \
        if len(points) * len(coarse) <= 4_000_000 else None
    if d2 is None:
        tree = cKDTree(coarse)
        assign = tree.query(points)[1].astype(np.int64)
    else:
        assign = np.argmin(d2, axis=1).astype(np.int64)
    assign[coarse_indices] = np.arange(len(coarse_indices))
    return assign
