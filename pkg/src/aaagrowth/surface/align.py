"""Rigid alignment of centerlines via iterative closest point with Kabsch fits."""

from __future__ import annotations

import numpy as np
from scipy.spatial import cKDTree

from ..ga.algebra import RigidMotion
from .mesh import Centerline


def _quaternion_from_matrix(R: np.ndarray) -> np.ndarray:
    """Unit quaternion (scalar first) from a proper rotation matrix."""
    t = np.trace(R)
    if t > 0:
        s = np.sqrt(t + 1.0) * 2
        q = np.array([0.25 * s, (R[2, 1] - R[1, 2]) / s,
                      (R[0, 2] - R[2, 0]) / s, (R[1, 0] - R[0, 1]) / s])
    else:
        i = int(np.argmax(np.diag(R)))
        j, k = (i + 1) % 3, (i + 2) % 3
        s = np.sqrt(R[i, i] - R[j, j] - R[k, k] + 1.0) * 2
        q = np.empty(4)
        q[0] = (R[k, j] - R[j, k]) / s
        q[1 + i] = 0.25 * s
        q[1 + j] = (R[j, i] + R[i, j]) / s
        q[1 + k] = (R[k, i] + R[i, k]) / s
    return q / np.linalg.norm(q)


def kabsch_fit(source: np.ndarray, target: np.ndarray) -> RigidMotion:
    """Least-squares rigid motion mapping `source` points onto `target` points
    (one-to-one correspondence).  Raises on rank-deficient configurations."""
    source = np.asarray(source, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    mu_s = source.mean(axis=0)
    mu_t = target.mean(axis=0)
    H = (source - mu_s).T @ (target - mu_t)
    U, S, Vt = np.linalg.svd(H)
    scale = max(S[0], 1e-30)
    if S[1] / scale < 1e-9:
        raise ValueError("rank-deficient fit: source points are collinear")
    D = np.diag([1.0, 1.0, np.sign(np.linalg.det(Vt.T @ U.T))])
    R = Vt.T @ D @ U.T
    t = mu_t - R @ mu_s
    return RigidMotion(_quaternion_from_matrix(R), t)


def icp_align(source: Centerline, target: Centerline,
              max_iterations: int = 100, tol: float = 1e-6) -> RigidMotion:
    """Rigid motion mapping the source centerline onto the target.

    Alternates nearest-point correspondence with Kabsch fits until the RMS
    change drops below `tol` mm.  The RMS is monotone non-increasing.
    """
    src = np.asarray(source.points, dtype=np.float64)
    tgt = np.asarray(target.points, dtype=np.float64)
    if len(src) < 3 or len(tgt) < 3:
        raise ValueError("centerlines need at least 3 points for ICP")
    tree = cKDTree(tgt)
    # start from centroid alignment so the first correspondences are sane
    motion = RigidMotion(np.array([1.0, 0.0, 0.0, 0.0]),
                         tgt.mean(axis=0) - src.mean(axis=0))
    prev_rms = np.inf
    for _ in range(max_iterations):
        moved = motion.apply_to_points(src)
        dists, idx = tree.query(moved)
        rms = float(np.sqrt((dists**2).mean()))
        if abs(prev_rms - rms) < tol:
            break
        prev_rms = rms
        motion = kabsch_fit(src, tgt[idx])
    return motion
