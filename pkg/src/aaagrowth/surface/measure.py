"""Surface measurements: wall distances, inscribed radii, diameters, volumes."""

from __future__ import annotations

import warnings

import numpy as np
from scipy.spatial import cKDTree

from .mesh import Centerline, TriMesh, VascularModel


def _closest_point_on_triangles(points: np.ndarray, a: np.ndarray, b: np.ndarray,
                                c: np.ndarray) -> np.ndarray:
    """Closest point on each triangle (a[i], b[i], c[i]) to points[i].

    Vectorized barycentric-region walk (Ericson, Real-Time Collision
    Detection, 5.1.5).
    """
    ab = b - a
    ac = c - a
    ap = points - a
    d1 = np.einsum("ij,ij->i", ab, ap)
    d2 = np.einsum("ij,ij->i", ac, ap)
    bp = points - b
    d3 = np.einsum("ij,ij->i", ab, bp)
    d4 = np.einsum("ij,ij->i", ac, bp)
    cp = points - c
    d5 = np.einsum("ij,ij->i", ab, cp)
    d6 = np.einsum("ij,ij->i", ac, cp)

    vc = d1 * d4 - d3 * d2
    vb = d5 * d2 - d1 * d6
    va = d3 * d6 - d5 * d4

    out = np.empty_like(points)
    done = np.zeros(len(points), dtype=bool)

    def settle(mask, value):
        nonlocal done
        mask = mask & ~done
        out[mask] = value[mask]
        done = done | mask

    settle((d1 <= 0) & (d2 <= 0), a)
    settle((d3 >= 0) & (d4 <= d3), b)
    with np.errstate(divide="ignore", invalid="ignore"):
        t_ab = d1 / (d1 - d3)
        settle((vc <= 0) & (d1 >= 0) & (d3 <= 0), a + t_ab[:, None] * ab)
        settle((d6 >= 0) & (d5 <= d6), c)
        t_ac = d2 / (d2 - d6)
        settle((vb <= 0) & (d2 >= 0) & (d6 <= 0), a + t_ac[:, None] * ac)
        t_bc = (d4 - d3) / ((d4 - d3) + (d5 - d6))
        settle((va <= 0) & (d4 - d3 >= 0) & (d5 - d6 >= 0),
               b + t_bc[:, None] * (c - b))
        denom = va + vb + vc
        v = vb / denom
        w = vc / denom
        settle(np.ones(len(points), dtype=bool), a + v[:, None] * ab + w[:, None] * ac)
    return out


def closest_surface_points(points: np.ndarray, target: TriMesh) -> np.ndarray:
    """Exact nearest point on the target surface for each query point."""
    points = np.asarray(points, dtype=np.float64)
    tv, tf = target.vertices, target.faces
    if len(tf) == 0:
        raise ValueError("target mesh has no faces")
    vertex_tree = cKDTree(tv)
    ub, nearest_vertex = vertex_tree.query(points)
    edge_vecs = np.concatenate([
        tv[tf[:, 1]] - tv[tf[:, 0]],
        tv[tf[:, 2]] - tv[tf[:, 1]],
        tv[tf[:, 0]] - tv[tf[:, 2]],
    ])
    max_edge = float(np.linalg.norm(edge_vecs, axis=1).max())

    # a triangle can beat the vertex upper bound only if one of its vertices
    # lies within ub + max_edge of the query point
    incident: list[list[int]] = [[] for _ in range(len(tv))]
    for fi, face in enumerate(tf):
        for vi in face:
            incident[vi].append(fi)

    result = np.empty_like(points)
    candidates_per_point = vertex_tree.query_ball_point(points, ub + max_edge + 1e-12)
    for i, vert_ids in enumerate(candidates_per_point):
        face_ids = sorted({fi for vi in vert_ids for fi in incident[vi]})
        if not face_ids:
            result[i] = tv[nearest_vertex[i]]
            continue
        fids = np.asarray(face_ids)
        p = np.broadcast_to(points[i], (len(fids), 3))
        closest = _closest_point_on_triangles(
            p, tv[tf[fids, 0]], tv[tf[fids, 1]], tv[tf[fids, 2]])
        d = np.linalg.norm(closest - points[i], axis=1)
        result[i] = closest[np.argmin(d)]
    return result


def closest_surface_distance(source: TriMesh, target: TriMesh,
                             mode: str = "triangle") -> np.ndarray:
    """Per-vertex distance from `source` vertices to the `target` surface.

    mode "triangle" (default) measures to the closest point on the target
    triangles; mode "vertex" keeps the closest-vertex variant for fidelity
    comparisons.
    """
    return point_surface_distance(source.vertices, target, mode)


def point_surface_distance(points: np.ndarray, target: TriMesh,
                           mode: str = "triangle") -> np.ndarray:
    points = np.asarray(points, dtype=np.float64)
    if mode == "vertex":
        return cKDTree(target.vertices).query(points)[0]
    if mode != "triangle":
        raise ValueError(f"unknown mode: {mode}")
    closest = closest_surface_points(points, target)
    return np.linalg.norm(points - closest, axis=1)


def local_radius(model: VascularModel) -> np.ndarray:
    """Inscribed-sphere radius per centerline point, projected to vertices."""
    if model.centerline is None:
        raise ValueError("model has no centerline")
    cl = model.centerline
    mesh = model.mesh
    closest = closest_surface_points(cl.points, mesh)
    radii = np.linalg.norm(cl.points - closest, axis=1)
    # inside check: the offset from the centerline point to the wall should
    # point along the outward normal at the closest surface point
    tree = cKDTree(mesh.vertices)
    nearest_vertex = tree.query(closest)[1]
    normals = mesh.normals()[nearest_vertex]
    outward = np.einsum("ij,ij->i", closest - cl.points, normals)
    if np.any(outward < -1e-6 * np.maximum(radii, 1.0)):
        raise ValueError("centerline outside mesh")
    nearest_cl = cKDTree(cl.points).query(mesh.vertices)[1]
    return radii[nearest_cl]


def _cross_section(mesh: TriMesh, origin: np.ndarray, normal: np.ndarray):
    """Intersection loops of the mesh with a plane.

    Returns a list of (k, 3) point arrays, one per connected loop/curve.
    """
    v, f = mesh.vertices, mesh.faces
    sd = (v - origin) @ normal
    side = sd > 0
    crossing = (side[f[:, 0]] != side[f[:, 1]]) | (side[f[:, 1]] != side[f[:, 2]])
    if not np.any(crossing):
        return []

    def edge_key(i, j):
        return (i, j) if i < j else (j, i)

    edge_points: dict[tuple[int, int], np.ndarray] = {}
    segments: list[tuple[tuple[int, int], tuple[int, int]]] = []
    for face in f[crossing]:
        cut_edges = []
        for i, j in ((face[0], face[1]), (face[1], face[2]), (face[2], face[0])):
            if side[i] != side[j]:
                key = edge_key(int(i), int(j))
                if key not in edge_points:
                    t = sd[i] / (sd[i] - sd[j])
                    edge_points[key] = (1 - t) * v[i] + t * v[j]
                cut_edges.append(key)
        if len(cut_edges) == 2:
            segments.append((cut_edges[0], cut_edges[1]))

    # union-find over cut edges to group segments into loops
    parent = {k: k for k in edge_points}

    def find(k):
        while parent[k] != k:
            parent[k] = parent[parent[k]]
            k = parent[k]
        return k

    for a, b in segments:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[ra] = rb

    groups: dict[tuple[int, int], list[np.ndarray]] = {}
    for key, pt in edge_points.items():
        groups.setdefault(find(key), []).append(pt)
    return [np.array(pts) for pts in groups.values()]


def max_diameter(model: VascularModel, sample_spacing: float = 2.0):
    """Diameter profile orthogonal to the centerline and the infrarenal max.

    At each centerline sample, the mesh is cut with the plane orthogonal to
    the local tangent; the loop whose centroid is nearest the centerline
    point is measured by its maximal pairwise point distance.  Returns
    (arclengths, diameters, max over the infrarenal range).
    """
    if model.centerline is None:
        raise ValueError("model has no centerline")
    cl = model.centerline
    n_samples = max(2, int(np.ceil(cl.length / sample_spacing)) + 1)
    arcs = np.linspace(0.0, cl.length, n_samples)
    diameters = np.full(n_samples, np.nan)
    for i, s in enumerate(arcs):
        origin = cl.point_at(s)
        normal = cl.tangent_at(s)
        loops = _cross_section(model.mesh, origin, normal)
        if not loops:
            warnings.warn(f"cross-section empty at arclength {s:.2f} mm; skipped")
            continue
        centroids = np.array([loop.mean(axis=0) for loop in loops])
        loop = loops[int(np.argmin(np.linalg.norm(centroids - origin, axis=1)))]
        d2 = ((loop[:, None, :] - loop[None, :, :]) ** 2).sum(axis=2)
        diameters[i] = np.sqrt(d2.max())
    a, b = cl.infrarenal_range
    in_range = (arcs >= a) & (arcs <= b) & np.isfinite(diameters)
    if not np.any(in_range):
        raise ValueError("no valid cross-sections in the infrarenal range")
    return arcs, diameters, float(np.nanmax(diameters[in_range]))


def _clip_half_space(vertices: np.ndarray, faces: np.ndarray,
                     origin: np.ndarray, normal: np.ndarray):
    """Keep the part of the surface with <normal, x - origin> <= 0.

    Triangles crossing the plane are cut; each cut boundary loop is capped by
    a triangle fan oriented outward (along +normal).  Returns (vertices,
    faces).
    """
    sd = (vertices - origin) @ normal
    keep = sd <= 0.0
    verts = [v for v in vertices]
    edge_cache: dict[tuple[int, int], int] = {}

    def cut_point(i, j):
        key = (i, j) if i < j else (j, i)
        if key not in edge_cache:
            t = sd[i] / (sd[i] - sd[j])
            verts.append((1 - t) * vertices[i] + t * vertices[j])
            edge_cache[key] = len(verts) - 1
        return edge_cache[key]

    new_faces: list[tuple[int, int, int]] = []
    boundary: list[tuple[int, int]] = []  # directed cut segments
    for face in faces:
        inside = [int(i) for i in face if keep[i]]
        if len(inside) == 3:
            new_faces.append(tuple(int(i) for i in face))
            continue
        if len(inside) == 0:
            continue
        a, b, c = (int(i) for i in face)
        ks = (keep[a], keep[b], keep[c])
        # rotate so the odd vertex is first
        for _ in range(3):
            if (ks[0] != ks[1]) and (ks[0] != ks[2]):
                break
            a, b, c = b, c, a
            ks = (keep[a], keep[b], keep[c])
        pab = cut_point(a, b)
        pac = cut_point(a, c)
        if ks[0]:  # one vertex kept
            new_faces.append((a, pab, pac))
            boundary.append((pab, pac))
        else:  # two vertices kept
            new_faces.append((b, c, pac))
            new_faces.append((b, pac, pab))
            boundary.append((pac, pab))

    verts = np.array(verts)
    # assemble boundary loops and cap them
    next_of = {}
    for p, q in boundary:
        next_of[p] = q
    visited = set()
    for start in list(next_of):
        if start in visited:
            continue
        loop = [start]
        visited.add(start)
        cur = next_of.get(start)
        while cur is not None and cur != start and cur not in visited:
            loop.append(cur)
            visited.add(cur)
            cur = next_of.get(cur)
        if cur != start or len(loop) < 3:
            continue
        center = verts[loop].mean(axis=0)
        verts = np.vstack([verts, center])
        ci = len(verts) - 1
        for k in range(len(loop)):
            p, q = loop[k], loop[(k + 1) % len(loop)]
            tri_normal = np.cross(verts[p] - verts[ci], verts[q] - verts[ci])
            if tri_normal @ normal >= 0:
                new_faces.append((ci, p, q))
            else:
                new_faces.append((ci, q, p))
    return verts, np.array(new_faces, dtype=np.int64)


def region_volume(model: VascularModel) -> float:
    """Volume (mm^3) of the infrarenal section, capped at its two bounding
    cross-section planes, via the divergence theorem."""
    if model.centerline is None:
        raise ValueError("model has no centerline")
    cl = model.centerline
    a, b = cl.infrarenal_range
    verts, faces = model.mesh.vertices, model.mesh.faces
    verts, faces = _clip_half_space(verts, faces, cl.point_at(b), cl.tangent_at(b))
    verts, faces = _clip_half_space(verts, faces, cl.point_at(a), -cl.tangent_at(a))
    if len(faces) == 0:
        raise ValueError("infrarenal clip produced an empty surface")

    # closedness check: every edge must be shared by exactly two faces
    e = np.concatenate([faces[:, [0, 1]], faces[:, [1, 2]], faces[:, [2, 0]]])
    e_sorted = np.sort(e, axis=1)
    _, counts = np.unique(e_sorted, axis=0, return_counts=True)
    if np.any(counts != 2):
        raise ValueError("open boundary after capping")

    volume = np.einsum(
        "ij,ij->i", verts[faces[:, 0]],
        np.cross(verts[faces[:, 1]], verts[faces[:, 2]])).sum() / 6.0
    if volume < 0:
        raise ValueError("negative volume: inconsistent face orientation")
    return float(volume)
