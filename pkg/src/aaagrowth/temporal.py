"""Per-patient continuous growth: periodic-activation velocity field, RK4
integration of the deformation ODE, fitting from irregular snapshots, shape
interpolation, and the historic-growth feature."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from . import autodiff as ad
from .autodiff import Tensor
from .checkpoint import load_checkpoint, save_checkpoint
from .surface.measure import point_surface_distance
from .surface.mesh import TriMesh, VascularModel


def chamfer_loss(p: Tensor, q: np.ndarray) -> Tensor:
    """Differentiable symmetric Chamfer distance between a point Tensor and a
    fixed target cloud.  Nearest-neighbour indices are treated as constants of
    the current iterate."""
    q = np.asarray(q, dtype=np.float64)
    idx_pq = cKDTree(q).query(p.data)[1]
    idx_qp = cKDTree(p.data).query(q)[1]
    d_pq = ad.norm(p - Tensor(q[idx_pq]), axis=-1).mean()
    d_qp = ad.norm(ad.gather(p, idx_qp) - Tensor(q), axis=-1).mean()
    return d_pq + d_qp


class VelocityFieldNet:
    """Coordinate MLP f(x, t) -> velocity (mm/year) with sine activations.

    Inputs are normalized internally: positions to the scene box, time to
    [-1, 1] over the fitted span.
    """

    def __init__(self, widths, omega0: float, center: np.ndarray, scale: float,
                 t_span: tuple[float, float], rng: np.random.Generator | None = None):
        self.widths = tuple(widths)
        self.omega0 = float(omega0)
        self.center = np.asarray(center, dtype=np.float64)
        self.scale = float(scale)
        self.t_span = (float(t_span[0]), float(t_span[1]))
        self.layers: list[tuple[Tensor, Tensor]] = []
        if rng is None:
            rng = np.random.default_rng(0)
        dims = [4, *self.widths, 3]
        for li in range(len(dims) - 1):
            fan_in = dims[li]
            if li == 0:
                w = rng.uniform(-1.0 / fan_in, 1.0 / fan_in, size=(fan_in, dims[li + 1]))
            else:
                bound = np.sqrt(6.0 / fan_in) / self.omega0
                w = rng.uniform(-bound, bound, size=(fan_in, dims[li + 1]))
            if li == len(dims) - 2:
                w = w * 1e-2  # start near the identity deformation
            b = np.zeros(dims[li + 1])
            self.layers.append((Tensor(w, requires_grad=True),
                                Tensor(b, requires_grad=True)))

    def params(self) -> list[Tensor]:
        return [t for pair in self.layers for t in pair]

    def _normalize_t(self, t: float) -> float:
        lo, hi = self.t_span
        if hi <= lo:
            return 0.0
        return 2.0 * (t - lo) / (hi - lo) - 1.0

    def __call__(self, x, t: float):
        """Velocity at positions x (n, 3) and scalar time t (years)."""
        is_tensor = isinstance(x, Tensor)
        xt = x if is_tensor else Tensor(np.asarray(x, dtype=np.float64))
        xn = (xt - Tensor(self.center)) * (1.0 / self.scale)
        tn = np.full((xt.shape[0], 1), self._normalize_t(t))
        h = ad.concatenate([xn, Tensor(tn)], axis=1)
        for li, (w, b) in enumerate(self.layers):
            h = h @ w + b
            if li < len(self.layers) - 1:
                h = (h * self.omega0).sin()
        return h if is_tensor else h.data

    # -- serialization -----------------------------------------------------------

    def state_arrays(self) -> dict[str, np.ndarray]:
        out = {
            "meta.widths": np.array(self.widths, dtype=np.float64),
            "meta.omega0": np.array(self.omega0),
            "meta.center": self.center,
            "meta.scale": np.array(self.scale),
            "meta.t_span": np.array(self.t_span),
        }
        for i, (w, b) in enumerate(self.layers):
            out[f"layer{i}.w"] = w.data
            out[f"layer{i}.b"] = b.data
        return out

    def save(self, path) -> None:
        save_checkpoint(path, self.state_arrays())

    @classmethod
    def load(cls, path) -> "VelocityFieldNet":
        arrays = load_checkpoint(path)
        net = cls(widths=[int(w) for w in arrays["meta.widths"]],
                  omega0=float(arrays["meta.omega0"].ravel()[0]),
                  center=arrays["meta.center"],
                  scale=float(arrays["meta.scale"].ravel()[0]),
                  t_span=tuple(arrays["meta.t_span"]))
        for i in range(len(net.layers)):
            net.layers[i] = (Tensor(arrays[f"layer{i}.w"], requires_grad=True),
                             Tensor(arrays[f"layer{i}.b"], requires_grad=True))
        return net


def integrate(net: VelocityFieldNet, points, t_start: float, t_end: float,
              steps: int):
    """Fixed-step RK4 solution of dx/dt = f(x, t) from t_start to t_end.

    Accepts a numpy array or a Tensor (for differentiable unrolls); reverse
    integration (t_end < t_start) is allowed for look-backs.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    x = points if isinstance(points, Tensor) else Tensor(np.asarray(points, dtype=np.float64))
    h = (t_end - t_start) / steps
    t = t_start
    for _ in range(steps):
        k1 = net(x, t)
        k2 = net(x + k1 * (h / 2), t + h / 2)
        k3 = net(x + k2 * (h / 2), t + h / 2)
        k4 = net(x + k3 * h, t + h)
        x = x + (k1 + 2.0 * k2 + 2.0 * k3 + k4) * (h / 6.0)
        t += h
        if not np.all(np.isfinite(x.data)):
            raise FloatingPointError("trajectory diverged")
    return x if isinstance(points, Tensor) else x.data


@dataclass
class PatientTimeline:
    """Ordered longitudinal snapshots of one patient; times in years with the
    second scan at t = 0 by convention."""

    models: list[VascularModel]
    fitted_field: VelocityFieldNet | None = None
    patient_id: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        times = self.times
        if len(times) < 3:
            raise ValueError("timeline needs at least 3 snapshots")
        if np.any(np.diff(times) <= 0):
            raise ValueError("snapshot times must be strictly increasing")

    @property
    def times(self) -> np.ndarray:
        return np.array([m.time for m in self.models])

    def model_at(self, t: float) -> VascularModel:
        times = self.times
        i = int(np.argmin(np.abs(times - t)))
        if abs(times[i] - t) > 1e-9:
            raise KeyError(f"no snapshot at t={t}")
        return self.models[i]


@dataclass
class FitConfig:
    """Velocity-field optimization settings (Adam on the Chamfer loss)."""

    epochs: int = 500
    learning_rate: float = 3e-3
    steps_per_year: int = 16
    hidden: tuple[int, ...] = (128, 128, 128)
    omega0: float = 10.0
    seed: int = 0
    chamfer_ceiling: float | None = None  # mm; warn if the final loss exceeds it


def fit(timeline: PatientTimeline, config: FitConfig | None = None) -> VelocityFieldNet:
    """Fit the continuous growth field to a patient timeline.

    Minimizes the summed Chamfer distance between the advected baseline
    vertices and each later snapshot.  Returns the net (also stored on
    timeline.fitted_field) with a per-epoch `loss_log` attribute.
    """
    config = config or FitConfig()
    times = timeline.times
    all_pts = np.concatenate([m.mesh.vertices for m in timeline.models])
    center = 0.5 * (all_pts.min(axis=0) + all_pts.max(axis=0))
    scale = max(float(np.abs(all_pts - center).max()), 1e-9)
    rng = np.random.default_rng(config.seed)
    net = VelocityFieldNet(config.hidden, config.omega0, center, scale,
                           (times[0], times[-1]), rng)
    base = timeline.models[0].mesh.vertices
    targets = [m.mesh.vertices for m in timeline.models[1:]]
    segment_steps = [max(1, int(round(config.steps_per_year * (tb - ta))))
                     for ta, tb in zip(times[:-1], times[1:])]

    optimizer = ad.Adam(net.params(), lr=config.learning_rate)
    loss_log: list[float] = []
    for _ in range(config.epochs):
        optimizer.zero_grad()
        x = Tensor(base)
        loss = None
        for k, target in enumerate(targets):
            x = integrate(net, x, times[k], times[k + 1], segment_steps[k])
            term = chamfer_loss(x, target)
            loss = term if loss is None else loss + term
        if not np.isfinite(loss.data):
            raise FloatingPointError("velocity-field fit diverged (NaN loss)")
        loss.backward()
        optimizer.step()
        loss_log.append(float(loss.data))
    net.loss_log = loss_log
    if config.chamfer_ceiling is not None and loss_log[-1] > config.chamfer_ceiling:
        warnings.warn(
            f"final training Chamfer {loss_log[-1]:.3f} mm exceeds ceiling "
            f"{config.chamfer_ceiling:.3f} mm")
    timeline.fitted_field = net
    return net


def interpolate_shape(timeline: PatientTimeline, t: float,
                      steps_per_year: int = 16) -> TriMesh:
    """Baseline mesh advected to time t; connectivity of the first snapshot."""
    if timeline.fitted_field is None:
        raise ValueError("timeline has no fitted field")
    times = timeline.times
    if t < times[0] - 1e-9 or t > times[-1] + 1e-9:
        raise ValueError("extrapolation not supported")
    base = timeline.models[0].mesh
    if abs(t - times[0]) < 1e-12:
        return base.with_vertices(base.vertices.copy())
    steps = max(1, int(round(steps_per_year * abs(t - times[0]))))
    with ad.no_grad():
        moved = integrate(timeline.fitted_field, base.vertices, times[0], t, steps)
    return base.with_vertices(moved)


def historic_growth(timeline: PatientTimeline, t: float,
                    lookback: float = 0.5) -> np.ndarray:
    """Per-vertex growth magnitude over the past `lookback` years at snapshot
    time t: distance from the snapshot surface to the interpolated earlier
    surface."""
    times = timeline.times
    if t - lookback < times[0] - 1e-9:
        raise ValueError("lookback reaches before the first snapshot")
    current = timeline.model_at(t)
    past = interpolate_shape(timeline, t - lookback)
    return point_surface_distance(current.mesh.vertices, past)
