"""Shared fixtures: analytic meshes with known measurements."""

import numpy as np
import pytest

from aaagrowth.surface.mesh import REGION_CODE, Centerline, TriMesh, VascularModel


def tube_mesh(radius=10.0, length=100.0, n_rings=34, n_around=24,
              bulge=None, caps=False, noise=0.0, seed=0):
    """Open (or capped) tube along z with an optional Gaussian bulge.

    bulge: (amplitude, center_arclength, sigma).
    """
    s = np.linspace(0.0, length, n_rings)
    theta = np.arange(n_around) / n_around * 2 * np.pi
    r = np.full(n_rings, float(radius))
    if bulge is not None:
        a, s0, w = bulge
        r = radius + a * np.exp(-((s - s0) ** 2) / (2 * w**2))
    verts = np.empty((n_rings * n_around, 3))
    verts[:, 0] = np.outer(r, np.cos(theta)).ravel()
    verts[:, 1] = np.outer(r, np.sin(theta)).ravel()
    verts[:, 2] = np.repeat(s, n_around)
    faces = []
    for i in range(n_rings - 1):
        for j in range(n_around):
            a0 = i * n_around + j
            a1 = i * n_around + (j + 1) % n_around
            faces.append([a0, a1, a1 + n_around])
            faces.append([a0, a1 + n_around, a0 + n_around])
    if caps:
        c0, c1 = len(verts), len(verts) + 1
        verts = np.vstack([verts, [0.0, 0.0, 0.0], [0.0, 0.0, length]])
        top = (n_rings - 1) * n_around
        for j in range(n_around):
            faces.append([c0, (j + 1) % n_around, j])
            faces.append([c1, top + j, top + (j + 1) % n_around])
    verts = np.asarray(verts)
    if noise:
        rng = np.random.default_rng(seed)
        verts = verts + rng.normal(0.0, noise, size=verts.shape)
    return TriMesh(verts, np.asarray(faces))


def tube_model(mesh=None, infrarenal=(30.0, 70.0), length=100.0, **kwargs):
    """VascularModel wrapper with a straight centerline and region labels."""
    if mesh is None:
        mesh = tube_mesh(length=length, **kwargs)
    if mesh.region is None:
        mesh.region = np.full(mesh.n_vertices, REGION_CODE["aorta"], np.uint8)
    n = max(2, int(length // 4) + 1)
    pts = np.column_stack([np.zeros(n), np.zeros(n), np.linspace(1.0, length - 1.0, n)])
    return VascularModel(mesh=mesh, lumen_mesh=None,
                         centerline=Centerline(pts, infrarenal),
                         features={}, time=0.0)


def icosphere(subdivisions=3, radius=1.0):
    """Subdivided icosahedron; near-uniform triangulation of the sphere."""
    phi = (1 + np.sqrt(5)) / 2
    verts = np.array([
        [-1, phi, 0], [1, phi, 0], [-1, -phi, 0], [1, -phi, 0],
        [0, -1, phi], [0, 1, phi], [0, -1, -phi], [0, 1, -phi],
        [phi, 0, -1], [phi, 0, 1], [-phi, 0, -1], [-phi, 0, 1],
    ], dtype=np.float64)
    verts /= np.linalg.norm(verts, axis=1, keepdims=True)
    faces = np.array([
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ])
    for _ in range(subdivisions):
        cache = {}
        verts_list = list(verts)

        def midpoint(i, j):
            key = (min(i, j), max(i, j))
            if key not in cache:
                m = verts_list[i] + verts_list[j]
                m /= np.linalg.norm(m)
                cache[key] = len(verts_list)
                verts_list.append(m)
            return cache[key]

        new_faces = []
        for a, b, c in faces:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            new_faces += [[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]
        verts = np.asarray(verts_list)
        faces = np.asarray(new_faces)
    return TriMesh(verts * radius, faces)


def random_motions(n, seed=0):
    from aaagrowth.ga.algebra import RigidMotion
    rng = np.random.default_rng(seed)
    return [RigidMotion.random(rng) for _ in range(n)]


@pytest.fixture(scope="session")
def unit_icosphere():
    return icosphere(subdivisions=3)
