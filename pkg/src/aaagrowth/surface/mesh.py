"""Triangle mesh data model, vascular model container, and file I/O (PLY,
centerline JSON)."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

# Region label codes stored in the PLY uchar "region" property.
REGIONS = ("inlet", "aorta", "infrarenal", "iliac", "renal")
REGION_CODE = {name: i for i, name in enumerate(REGIONS)}

# Per-vertex scalar features carried by a VascularModel, in PLY property order.
FEATURE_NAMES = (
    "thickness", "radius", "geo_inlet", "geo_outlet", "tawss", "osi", "hist_growth",
)


@dataclass
class TriMesh:
    """Triangulated surface; vertices in mm.

    vertex_normals are unit, area-weighted; computed lazily when absent.
    region holds REGION_CODE labels per vertex.
    """

    vertices: np.ndarray
    faces: np.ndarray
    vertex_normals: np.ndarray | None = None
    region: np.ndarray | None = None

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=np.float64)
        self.faces = np.asarray(self.faces, dtype=np.int64)
        if self.faces.size and self.faces.max() >= len(self.vertices):
            raise ValueError("face indices out of range")
        if self.region is not None:
            self.region = np.asarray(self.region, dtype=np.uint8)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    def face_normals_areas(self) -> tuple[np.ndarray, np.ndarray]:
        v = self.vertices
        f = self.faces
        cross = np.cross(v[f[:, 1]] - v[f[:, 0]], v[f[:, 2]] - v[f[:, 0]])
        norms = np.linalg.norm(cross, axis=1)
        areas = 0.5 * norms
        normals = cross / np.maximum(norms, 1e-30)[:, None]
        return normals, areas

    def compute_vertex_normals(self) -> np.ndarray:
        """Area-weighted average of incident face normals, unit length."""
        normals, areas = self.face_normals_areas()
        weighted = normals * areas[:, None]
        acc = np.zeros_like(self.vertices)
        for k in range(3):
            np.add.at(acc, self.faces[:, k], weighted)
        lengths = np.linalg.norm(acc, axis=1)
        if np.any(lengths < 1e-30):
            raise ValueError("isolated vertex: no incident faces")
        out = acc / lengths[:, None]
        self.vertex_normals = out
        return out

    def normals(self) -> np.ndarray:
        if self.vertex_normals is None:
            self.compute_vertex_normals()
        return self.vertex_normals

    def mean_edge_length(self) -> float:
        v, f = self.vertices, self.faces
        e = np.concatenate([
            v[f[:, 1]] - v[f[:, 0]],
            v[f[:, 2]] - v[f[:, 1]],
            v[f[:, 0]] - v[f[:, 2]],
        ])
        return float(np.linalg.norm(e, axis=1).mean())

    def edges(self) -> np.ndarray:
        """Unique undirected edges as sorted index pairs, shape (k, 2)."""
        f = self.faces
        e = np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]])
        e.sort(axis=1)
        return np.unique(e, axis=0)

    def with_vertices(self, vertices: np.ndarray) -> "TriMesh":
        """Same connectivity and labels, new vertex positions."""
        return TriMesh(np.asarray(vertices, dtype=np.float64), self.faces.copy(),
                       None, None if self.region is None else self.region.copy())

    def region_mask(self, name: str) -> np.ndarray:
        """Vertices in the named region; "aorta" includes the infrarenal part."""
        if self.region is None:
            raise ValueError("mesh has no region labels")
        if name == "aorta":
            return (self.region == REGION_CODE["aorta"]) | \
                   (self.region == REGION_CODE["infrarenal"])
        return self.region == REGION_CODE[name]


def tangent_plane(mesh: TriMesh, vertex: int) -> tuple[np.ndarray, float]:
    """(unit normal, offset) of the local tangent plane at a vertex.

    Normal is the area-weighted average of incident face normals; the offset
    is <normal, position>, so the plane is {x : <normal, x> = offset}.
    """
    normal = mesh.normals()[vertex]
    return normal, float(normal @ mesh.vertices[vertex])


def tangent_planes(mesh: TriMesh) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized tangent planes for all vertices: (normals (n,3), offsets (n,))."""
    normals = mesh.normals()
    return normals, np.einsum("ij,ij->i", normals, mesh.vertices)


@dataclass
class Centerline:
    """Ordered polyline through the lumen, inlet to bifurcation, in mm."""

    points: np.ndarray
    infrarenal_range: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.float64)
        if len(self.points) < 2:
            raise ValueError("centerline needs at least 2 points")
        steps = np.linalg.norm(np.diff(self.points, axis=0), axis=1)
        if np.any(steps <= 0):
            raise ValueError("centerline arclength must be strictly increasing")
        self.arclength = np.concatenate([[0.0], np.cumsum(steps)])
        a, b = self.infrarenal_range
        if not (0.0 <= a < b <= self.arclength[-1] + 1e-9):
            raise ValueError("infrarenal range outside centerline span")

    @property
    def length(self) -> float:
        return float(self.arclength[-1])

    def point_at(self, s: float) -> np.ndarray:
        """Linear interpolation by arclength."""
        s = np.clip(s, 0.0, self.length)
        i = np.searchsorted(self.arclength, s, side="right") - 1
        i = min(i, len(self.points) - 2)
        t = (s - self.arclength[i]) / (self.arclength[i + 1] - self.arclength[i])
        return (1 - t) * self.points[i] + t * self.points[i + 1]

    def tangent_at(self, s: float) -> np.ndarray:
        i = np.searchsorted(self.arclength, np.clip(s, 0, self.length), side="right") - 1
        i = min(max(i, 0), len(self.points) - 2)
        d = self.points[i + 1] - self.points[i]
        return d / np.linalg.norm(d)

    def transformed(self, motion) -> "Centerline":
        return Centerline(motion.apply_to_points(self.points), self.infrarenal_range)


@dataclass
class VascularModel:
    """Outer-wall mesh plus lumen, centerline, per-vertex features, timestamp."""

    mesh: TriMesh
    lumen_mesh: TriMesh | None = None
    centerline: Centerline | None = None
    features: dict[str, np.ndarray] = field(default_factory=dict)
    time: float = 0.0

    def require_features(self, names=FEATURE_NAMES) -> None:
        n = self.mesh.n_vertices
        for name in names:
            if name not in self.features:
                raise ValueError(f"missing feature field: {name}")
            if len(self.features[name]) != n:
                raise ValueError(f"feature {name} length mismatch")


# -- PLY I/O --------------------------------------------------------------------

_PLY_TYPES = {
    "float": ("<f4", 4), "float32": ("<f4", 4),
    "double": ("<f8", 8), "float64": ("<f8", 8),
    "uchar": ("u1", 1), "uint8": ("u1", 1),
    "int": ("<i4", 4), "int32": ("<i4", 4),
    "uint": ("<u4", 4), "uint32": ("<u4", 4),
}


def save_ply(path, mesh: TriMesh, features: dict[str, np.ndarray] | None = None,
             binary: bool = True) -> None:
    """Write a PLY file with x,y,z,nx,ny,nz, optional feature floats, and the
    uchar region property when the mesh is labeled."""
    features = features or {}
    normals = mesh.normals()
    props = [("x", "double"), ("y", "double"), ("z", "double"),
             ("nx", "double"), ("ny", "double"), ("nz", "double")]
    columns = [mesh.vertices[:, 0], mesh.vertices[:, 1], mesh.vertices[:, 2],
               normals[:, 0], normals[:, 1], normals[:, 2]]
    for name in FEATURE_NAMES:
        if name in features:
            props.append((name, "float"))
            columns.append(np.asarray(features[name], dtype=np.float64))
    if mesh.region is not None:
        props.append(("region", "uchar"))
        columns.append(mesh.region)

    fmt = "binary_little_endian" if binary else "ascii"
    header = ["ply", f"format {fmt} 1.0",
              f"element vertex {mesh.n_vertices}"]
    header += [f"property {typ} {name}" for name, typ in props]
    header += [f"element face {len(mesh.faces)}",
               "property list uchar int vertex_indices", "end_header"]

    with open(path, "wb") as f:
        f.write(("\n".join(header) + "\n").encode("ascii"))
        if binary:
            dtype = np.dtype([(name, _PLY_TYPES[typ][0]) for name, typ in props])
            table = np.empty(mesh.n_vertices, dtype=dtype)
            for (name, _), col in zip(props, columns):
                table[name] = col
            f.write(table.tobytes())
            face_dtype = np.dtype([("count", "u1"), ("idx", "<i4", (3,))])
            faces = np.empty(len(mesh.faces), dtype=face_dtype)
            faces["count"] = 3
            faces["idx"] = mesh.faces
            f.write(faces.tobytes())
        else:
            for row in zip(*columns):
                parts = []
                for (name, typ), val in zip(props, row):
                    parts.append(str(int(val)) if typ == "uchar" else repr(float(val)))
                f.write((" ".join(parts) + "\n").encode("ascii"))
            for face in mesh.faces:
                f.write(f"3 {face[0]} {face[1]} {face[2]}\n".encode("ascii"))


def load_ply(path) -> tuple[TriMesh, dict[str, np.ndarray]]:
    """Read PLY (ascii or binary little-endian); returns (mesh, features)."""
    raw = Path(path).read_bytes()
    end = raw.find(b"end_header\n")
    if not raw.startswith(b"ply") or end < 0:
        raise ValueError(f"not a PLY file: {path}")
    header = raw[:end].decode("ascii").splitlines()
    body = raw[end + len(b"end_header\n"):]

    fmt = None
    elements = []  # (name, count, [(prop_name, prop_type) or ("list", ...)])
    for line in header[1:]:
        tokens = line.split()
        if not tokens:
            continue
        if tokens[0] == "format":
            fmt = tokens[1]
        elif tokens[0] == "element":
            elements.append((tokens[1], int(tokens[2]), []))
        elif tokens[0] == "property":
            if tokens[1] == "list":
                elements[-1][2].append(("list", tokens[2], tokens[3], tokens[4]))
            else:
                elements[-1][2].append((tokens[2], tokens[1]))
    if fmt not in ("ascii", "binary_little_endian"):
        raise ValueError(f"unsupported PLY format: {fmt}")

    vertex_data: dict[str, np.ndarray] = {}
    faces = None
    if fmt == "binary_little_endian":
        offset = 0
        for name, count, props in elements:
            if name == "vertex":
                dtype = np.dtype([(p, _PLY_TYPES[t][0]) for p, t in props])
                table = np.frombuffer(body, dtype=dtype, count=count, offset=offset)
                offset += dtype.itemsize * count
                for p, _ in props:
                    vertex_data[p] = table[p].astype(np.float64)
            elif name == "face":
                face_dtype = np.dtype([("count", "u1"), ("idx", "<i4", (3,))])
                table = np.frombuffer(body, dtype=face_dtype, count=count, offset=offset)
                offset += face_dtype.itemsize * count
                faces = table["idx"].astype(np.int64)
    else:
        lines = body.decode("ascii").splitlines()
        cursor = 0
        for name, count, props in elements:
            chunk = lines[cursor:cursor + count]
            cursor += count
            if name == "vertex":
                grid = np.array([[float(x) for x in line.split()] for line in chunk])
                for j, (p, _) in enumerate(props):
                    vertex_data[p] = grid[:, j]
            elif name == "face":
                faces = np.array([[int(x) for x in line.split()[1:4]] for line in chunk],
                                 dtype=np.int64)

    vertices = np.stack([vertex_data["x"], vertex_data["y"], vertex_data["z"]], axis=1)
    normals = None
    if "nx" in vertex_data:
        normals = np.stack([vertex_data["nx"], vertex_data["ny"], vertex_data["nz"]],
                           axis=1)
    region = vertex_data["region"].astype(np.uint8) if "region" in vertex_data else None
    mesh = TriMesh(vertices, faces, normals, region)
    features = {name: vertex_data[name] for name in FEATURE_NAMES
                if name in vertex_data}
    return mesh, features


# -- centerline JSON --------------------------------------------------------------


def save_centerline(path, centerline: Centerline) -> None:
    payload = {
        "points": [[float(x) for x in p] for p in centerline.points],
        "infrarenal": [float(centerline.infrarenal_range[0]),
                       float(centerline.infrarenal_range[1])],
    }
    Path(path).write_text(json.dumps(payload, indent=None, separators=(",", ":")))


def load_centerline(path) -> Centerline:
    payload = json.loads(Path(path).read_text())
    return Centerline(np.array(payload["points"], dtype=np.float64),
                      tuple(payload["infrarenal"]))
