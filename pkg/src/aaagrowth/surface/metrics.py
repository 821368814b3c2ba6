"""Point-set distance metrics and small trajectory measures."""

from __future__ import annotations

import numpy as np
from scipy.spatial import cKDTree


def _nearest_distances(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Distance from each point of p to its nearest neighbour in q."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if len(p) == 0 or len(q) == 0:
        raise ValueError("empty point set")
    return cKDTree(q).query(p)[0]


def chamfer(p: np.ndarray, q: np.ndarray) -> float:
    """Symmetric Chamfer distance: mean nearest-neighbour distance both ways."""
    return float(_nearest_distances(p, q).mean() + _nearest_distances(q, p).mean())


def hd95(p: np.ndarray, q: np.ndarray) -> float:
    """95th percentile Hausdorff distance.

    Max of the two directed 95th percentiles; percentile by linear
    interpolation between order statistics.
    """
    d_pq = np.percentile(_nearest_distances(p, q), 95)
    d_qp = np.percentile(_nearest_distances(q, p), 95)
    return float(max(d_pq, d_qp))


def rgvd(pred_growth: float, ref_growth: float) -> float:
    """Relative growth volume difference; negative means underestimation."""
    if ref_growth == 0:
        raise ValueError("reference growth is zero; RGVD undefined")
    return float((pred_growth - ref_growth) / ref_growth)


def arc_length(trajectory: np.ndarray) -> float:
    """Total polyline length of an ordered point trajectory."""
    trajectory = np.asarray(trajectory, dtype=np.float64)
    if len(trajectory) < 2:
        raise ValueError("trajectory needs at least 2 points")
    return float(np.linalg.norm(np.diff(trajectory, axis=0), axis=1).sum())
