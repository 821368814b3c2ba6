"""Synthetic longitudinal aneurysm cohorts with analytic ground truth.

Each patient is an open tube (straight vessel along z) with a Gaussian bulge
whose amplitude follows a prescribed growth schedule.  All seven per-vertex
surface scalars are computed analytically; the hemodynamic channels are
analytic surrogates (stored under the standard property names `tawss`/`osi`).
Units: mm and years throughout.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .surface.mesh import Centerline, REGION_CODE, TriMesh, VascularModel
from .temporal import PatientTimeline


@dataclass(frozen=True)
class PatientSpec:
    """Everything needed to regenerate one patient bit-for-bit."""

    seed: int
    base_radius: float = 9.0
    vessel_length: float = 96.0
    bulge_center: float = 48.0     # arclength of the bulge apex (mm)
    bulge_width: float = 12.0      # Gaussian sigma (mm)
    schedule: str = "logistic"     # "linear" | "logistic"
    # linear: a(t) = amplitude + growth_rate * (t - t_ref)
    amplitude: float = 6.0
    growth_rate: float = 1.0       # mm / year
    # logistic: a(t) = logistic_max / (1 + exp(-logistic_rate (t - logistic_mid)))
    logistic_max: float = 12.0
    logistic_rate: float = 1.0
    logistic_mid: float = -2.0
    t_ref: float = 0.0
    snapshot_times: tuple[float, ...] = (-1.0, 0.0, 1.5)
    noise: float = 0.02            # mm, per-vertex Gaussian
    edge_length: float = 3.0       # target mesh resolution (mm)
    wall_thickness: float = 1.5    # baseline wall + ILT thickness (mm)
    thickness_coeff: float = 0.35  # extra thickness per mm of bulge height

    def __post_init__(self):
        if self.schedule not in ("linear", "logistic"):
            raise ValueError(f"unknown schedule: {self.schedule!r}")
        if len(self.snapshot_times) < 3:
            raise ValueError("need at least 3 snapshot times")
        if np.any(np.diff(self.snapshot_times) <= 0):
            raise ValueError("snapshot times must be strictly increasing")


def amplitude_at(spec: PatientSpec, t: float) -> float:
    """Bulge amplitude (mm) under the patient's growth schedule."""
    if spec.schedule == "linear":
        return spec.amplitude + spec.growth_rate * (t - spec.t_ref)
    z = -spec.logistic_rate * (t - spec.logistic_mid)
    return spec.logistic_max / (1.0 + np.exp(z))


def _grid(spec: PatientSpec) -> tuple[np.ndarray, np.ndarray]:
    """(arclengths per ring, angles per ring vertex) of the fixed tube grid."""
    n_s = int(round(spec.vessel_length / spec.edge_length)) + 1
    n_theta = max(8, int(round(2 * np.pi * spec.base_radius / spec.edge_length)))
    s = np.linspace(0.0, spec.vessel_length, n_s)
    theta = np.arange(n_theta) / n_theta * 2 * np.pi
    return s, theta


def _radius_profile(spec: PatientSpec, s: np.ndarray, t: float) -> np.ndarray:
    bump = np.exp(-((s - spec.bulge_center) ** 2) / (2 * spec.bulge_width**2))
    return spec.base_radius + amplitude_at(spec, t) * bump


def _bulge_height(spec: PatientSpec, s: np.ndarray, t: float) -> np.ndarray:
    return _radius_profile(spec, s, t) - spec.base_radius


def _tube_vertices(s, theta, r) -> np.ndarray:
    """(n_s * n_theta, 3) open-tube vertices, ring-major ordering."""
    cos, sin = np.cos(theta), np.sin(theta)
    v = np.empty((len(s) * len(theta), 3))
    v[:, 0] = np.outer(r, cos).ravel()
    v[:, 1] = np.outer(r, sin).ravel()
    v[:, 2] = np.repeat(s, len(theta))
    return v


def _tube_faces(n_s: int, n_theta: int) -> np.ndarray:
    i = np.arange(n_s - 1)[:, None]
    j = np.arange(n_theta)[None, :]
    a0 = (i * n_theta + j).ravel()
    a1 = (i * n_theta + (j + 1) % n_theta).ravel()
    b0, b1 = a0 + n_theta, a1 + n_theta
    # outward orientation (counter-clockwise seen from outside)
    return np.concatenate([np.stack([a0, a1, b1], axis=1),
                           np.stack([a0, b1, b0], axis=1)])


def infrarenal_range(spec: PatientSpec) -> tuple[float, float]:
    """Arclength window of the aneurysmal segment (contains the bulge)."""
    lo = max(0.15 * spec.vessel_length, spec.bulge_center - 2.2 * spec.bulge_width)
    hi = min(0.9 * spec.vessel_length, spec.bulge_center + 2.2 * spec.bulge_width)
    return (lo, hi)


def _region_labels(spec: PatientSpec, s: np.ndarray, n_theta: int) -> np.ndarray:
    L = spec.vessel_length
    lo, hi = infrarenal_range(spec)
    ring = np.full(len(s), REGION_CODE["aorta"], dtype=np.uint8)
    ring[s <= 0.05 * L] = REGION_CODE["inlet"]
    ring[(s > 0.05 * L) & (s <= 0.12 * L)] = REGION_CODE["renal"]
    ring[(s >= lo) & (s <= hi)] = REGION_CODE["infrarenal"]
    ring[s >= 0.92 * L] = REGION_CODE["iliac"]
    return np.repeat(ring, n_theta)


def _meridian_arclength(s: np.ndarray, r: np.ndarray) -> np.ndarray:
    """Cumulative along-wall distance from the inlet for each ring."""
    seg = np.sqrt(np.diff(s) ** 2 + np.diff(r) ** 2)
    return np.concatenate([[0.0], np.cumsum(seg)])


def generate_model(spec: PatientSpec, t: float,
                   snapshot_index: int | None = None) -> VascularModel:
    """One snapshot: outer wall + lumen meshes, centerline, and the seven
    analytic surface scalars.  Deterministic in (spec, t, snapshot_index)."""
    s, theta = _grid(spec)
    n_s, n_theta = len(s), len(theta)
    r = _radius_profile(spec, s, t)
    bulge = _bulge_height(spec, s, t)
    thickness_ring = spec.wall_thickness + spec.thickness_coeff * bulge

    verts = _tube_vertices(s, theta, r)
    faces = _tube_faces(n_s, n_theta)
    if spec.noise > 0:
        idx = snapshot_index if snapshot_index is not None else 0
        rng = np.random.default_rng(np.random.SeedSequence((spec.seed, 977, idx)))
        radial = verts.copy()
        radial[:, 2] = 0.0
        radial /= np.linalg.norm(radial, axis=1, keepdims=True)
        verts = verts + radial * rng.normal(0.0, spec.noise, size=(len(verts), 1))
    mesh = TriMesh(verts, faces,
                   region=_region_labels(spec, s, n_theta))

    lumen = TriMesh(_tube_vertices(s, theta, r - thickness_ring), faces.copy())

    geo_inlet_ring = _meridian_arclength(s, r)
    geo_outlet_ring = geo_inlet_ring[-1] - geo_inlet_ring

    per_ring = {
        "thickness": thickness_ring,
        "radius": r,
        "geo_inlet": geo_inlet_ring,
        "geo_outlet": geo_outlet_ring,
        # analytic hemodynamic surrogates (tawss/osi stand-ins)
        "tawss": 2.0 * (spec.base_radius / r) ** 2,
        "osi": 0.5 * (1.0 - np.exp(-bulge / 3.0)),
        "hist_growth": r - _radius_profile(spec, s, t - 0.5),
    }
    features = {k: np.repeat(v, n_theta) for k, v in per_ring.items()}

    n_cl = max(2, int(round(spec.vessel_length / 4.0)) + 1)
    cl_s = np.linspace(1.0, spec.vessel_length - 1.0, n_cl)
    cl_points = np.column_stack([np.zeros(n_cl), np.zeros(n_cl), cl_s])
    centerline = Centerline(cl_points, infrarenal_range(spec))

    return VascularModel(mesh=mesh, lumen_mesh=lumen, centerline=centerline,
                         features=features, time=float(t))


def generate_patient(spec: PatientSpec) -> PatientTimeline:
    """Full longitudinal timeline for one synthetic patient."""
    models = [generate_model(spec, t, i)
              for i, t in enumerate(spec.snapshot_times)]
    return PatientTimeline(models, patient_id=f"synth-{spec.seed:04d}",
                           meta={"spec": spec})


def analytic_deformation(spec: PatientSpec, t: float, dt: float) -> np.ndarray:
    """Exact per-vertex displacement of the noiseless wall from t to t + dt.

    Vertex ordering matches generate_model; the finite difference of two
    generated snapshots agrees with this up to the mesh noise level.
    """
    s, theta = _grid(spec)
    dr = _radius_profile(spec, s, t + dt) - _radius_profile(spec, s, t)
    cos, sin = np.cos(theta), np.sin(theta)
    disp = np.empty((len(s) * len(theta), 3))
    disp[:, 0] = np.outer(dr, cos).ravel()
    disp[:, 1] = np.outer(dr, sin).ravel()
    disp[:, 2] = 0.0
    return disp


def default_cohort(n_train: int = 16, n_holdout: int = 4,
                   seed: int = 0) -> tuple[list[PatientSpec], list[PatientSpec]]:
    """Desk-scale cohort: shared decelerating growth law, varied anatomy.

    Every patient follows the same logistic schedule shape (so growth is
    predictable from the observable bulge geometry) but differs in bulge
    position, width, baseline amplitude, and scan times.
    """
    rng = np.random.default_rng(seed)
    specs = []
    for i in range(n_train + n_holdout):
        t_pre = float(rng.uniform(0.7, 1.3))
        t_post = float(rng.uniform(1.5, 2.5))
        extra = ()
        if i % 3 == 0:  # some patients have a fourth scan
            extra = (float(rng.uniform(0.4, 0.7) * t_post),)
        times = tuple(sorted((-t_pre, 0.0, *extra, t_post)))
        specs.append(PatientSpec(
            seed=1000 + i,
            bulge_center=float(rng.uniform(40.0, 56.0)),
            bulge_width=float(rng.uniform(9.0, 14.0)),
            schedule="logistic",
            logistic_max=float(rng.uniform(10.0, 14.0)),
            logistic_rate=1.0,
            logistic_mid=-2.0,
            snapshot_times=times,
        ))
    return specs[:n_train], specs[n_train:]
