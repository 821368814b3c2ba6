"""Geodesic distance fields via the heat method.

Short-time heat diffusion with the cotangent Laplacian, gradient
normalization, and Poisson recovery of the distance field.  The diffusion
time is (mean edge length)^2.
"""

from __future__ import annotations

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components
from scipy.sparse.linalg import spsolve

from .mesh import TriMesh


def _cotangent_laplacian(mesh: TriMesh):
    """(L, M): cot Laplacian (PSD, positive diagonal) and lumped mass vector."""
    v, f = mesh.vertices, mesh.faces
    n = mesh.n_vertices
    i0, i1, i2 = f[:, 0], f[:, 1], f[:, 2]
    e0 = v[i2] - v[i1]  # edge opposite vertex 0, etc.
    e1 = v[i0] - v[i2]
    e2 = v[i1] - v[i0]
    areas = 0.5 * np.linalg.norm(np.cross(e2, -e1), axis=1)
    areas = np.maximum(areas, 1e-30)
    # cot of the angle at each corner: (e_a . e_b) / (2 * area)
    cot0 = np.einsum("ij,ij->i", -e1, e2) / (2 * areas)
    cot1 = np.einsum("ij,ij->i", -e2, e0) / (2 * areas)
    cot2 = np.einsum("ij,ij->i", -e0, e1) / (2 * areas)
    rows = np.concatenate([i1, i2, i2, i0, i0, i1])
    cols = np.concatenate([i2, i1, i0, i2, i1, i0])
    vals = 0.5 * np.concatenate([cot0, cot0, cot1, cot1, cot2, cot2])
    W = csr_matrix((vals, (rows, cols)), shape=(n, n))
    diag = np.asarray(W.sum(axis=1)).ravel()
    L = csr_matrix((diag, (np.arange(n), np.arange(n))), shape=(n, n)) - W
    mass = np.zeros(n)
    for k in range(3):
        np.add.at(mass, f[:, k], areas / 3.0)
    return L, mass


def heat_geodesic(mesh: TriMesh, sources) -> np.ndarray:
    """Geodesic distance (mm) from the source vertex set to every vertex."""
    sources = np.atleast_1d(np.asarray(sources, dtype=np.int64))
    if sources.size == 0:
        raise ValueError("empty source set")
    v, f = mesh.vertices, mesh.faces
    n = mesh.n_vertices

    L, mass = _cotangent_laplacian(mesh)

    adjacency = csr_matrix(
        (np.ones(3 * len(f)),
         (np.concatenate([f[:, 0], f[:, 1], f[:, 2]]),
          np.concatenate([f[:, 1], f[:, 2], f[:, 0]]))), shape=(n, n))
    n_comp, labels = connected_components(adjacency, directed=False)
    if n_comp > 1:
        reachable = set(labels[sources])
        orphaned = np.flatnonzero(~np.isin(labels, list(reachable)))
        if orphaned.size:
            raise ValueError(
                f"vertices unreachable from sources: {orphaned.tolist()[:20]}"
                + ("..." if orphaned.size > 20 else ""))

    t = mesh.mean_edge_length() ** 2
    M = csr_matrix((mass, (np.arange(n), np.arange(n))), shape=(n, n))
    delta = np.zeros(n)
    delta[sources] = 1.0
    u = spsolve((M + t * L).tocsc(), delta)

    # per-face gradient of u, then normalized negative gradient
    i0, i1, i2 = f[:, 0], f[:, 1], f[:, 2]
    e0 = v[i2] - v[i1]
    e1 = v[i0] - v[i2]
    e2 = v[i1] - v[i0]
    normal = np.cross(e2, -e1)
    dbl_area = np.linalg.norm(normal, axis=1)
    normal /= np.maximum(dbl_area, 1e-30)[:, None]
    grad = (u[i0, None] * np.cross(normal, e0)
            + u[i1, None] * np.cross(normal, e1)
            + u[i2, None] * np.cross(normal, e2)) / np.maximum(dbl_area, 1e-30)[:, None]
    g_norm = np.linalg.norm(grad, axis=1)
    X = -grad / np.maximum(g_norm, 1e-30)[:, None]

    # integrated divergence at vertices
    areas = 0.5 * dbl_area
    areas = np.maximum(areas, 1e-30)
    cot0 = np.einsum("ij,ij->i", -e1, e2) / (2 * areas)
    cot1 = np.einsum("ij,ij->i", -e2, e0) / (2 * areas)
    cot2 = np.einsum("ij,ij->i", -e0, e1) / (2 * areas)
    div = np.zeros(n)
    # at vertex 0 of each face the incident edges are e2 (to v1) and -e1 (to v2)
    np.add.at(div, i0, 0.5 * (cot2 * np.einsum("ij,ij->i", e2, X)
                              + cot1 * np.einsum("ij,ij->i", -e1, X)))
    np.add.at(div, i1, 0.5 * (cot0 * np.einsum("ij,ij->i", e0, X)
                              + cot2 * np.einsum("ij,ij->i", -e2, X)))
    np.add.at(div, i2, 0.5 * (cot1 * np.einsum("ij,ij->i", e1, X)
                              + cot0 * np.einsum("ij,ij->i", -e0, X)))

    # Poisson solve (L is the positive-semidefinite operator, i.e. -laplacian,
    # so the right-hand side divergence is negated); a tiny Tikhonov term
    # fixes the constant nullspace
    reg = csr_matrix((np.full(n, 1e-10), (np.arange(n), np.arange(n))), shape=(n, n))
    phi = spsolve((L + reg).tocsc(), -div)
    phi -= phi[sources].min()
    phi[sources] = 0.0
    return np.maximum(phi, 0.0)
