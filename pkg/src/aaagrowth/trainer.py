"""Temporal-augmentation training loop, baselines, ensembling,
threshold-crossing rollout, and the evaluation harness."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .model import GrowthModel, ModelConfig, compute_standardization
from .surface.measure import max_diameter, region_volume
from .surface.mesh import TriMesh, VascularModel
from .surface.metrics import chamfer, hd95, rgvd
from .temporal import PatientTimeline, chamfer_loss, integrate, interpolate_shape


@dataclass
class TrainConfig:
    """Optimization settings for the growth predictor."""

    learning_rate: float = 3e-4
    batch_size: int = 4
    epochs: int = 2000
    t_min: float = 0.5
    t_max: float = 2.0
    loss_region: str = "aorta"
    eval_region: str = "infrarenal"
    seed: int = 0
    augment: bool = True  # False: train only on observed consecutive pairs
    steps_per_year: int = 16  # for interpolated targets

    def __post_init__(self):
        if min(self.learning_rate, self.batch_size, self.epochs) <= 0:
            raise ValueError("rates and counts must be positive")
        if self.t_min >= self.t_max:
            raise ValueError("t_min must be less than t_max")


@dataclass
class MetricsReport:
    """Per-case growth-prediction metrics plus aggregates.

    Aggregates are medians and interquartile ranges (25th-75th percentile,
    linear interpolation) over the rows, recomputable via `aggregate`.
    """

    rows: list[dict] = field(default_factory=list)

    METRICS = ("chamfer", "hd95", "diameter_error", "rgvd")

    def aggregate(self) -> dict[str, dict[str, float]]:
        out = {}
        for name in self.METRICS:
            values = np.array([row[name] for row in self.rows])
            q25, q50, q75 = np.percentile(values, [25, 50, 75])
            out[name] = {"median": float(q50), "iqr": float(q75 - q25),
                         "q25": float(q25), "q75": float(q75)}
        return out


def sample_training_pair(timeline: PatientTimeline, rng: np.random.Generator,
                         t_min: float = 0.5, t_max: float = 2.0,
                         steps_per_year: int = 16):
    """One temporally augmented supervision triple (input model, dt, target).

    The input is always an observed snapshot drawn uniformly from the middle
    times {t_1 .. t_{m-2}} (never the first scan, whose historic growth is
    unavailable, and never an interpolated shape); dt ~ U[t_min, t_max]
    clipped so t + dt stays inside the observed span; the target is the
    fitted-field interpolation at t + dt.
    """
    if timeline.fitted_field is None:
        raise ValueError("timeline has no fitted field")
    times = timeline.times
    eligible = [i for i in range(1, len(times) - 1)
                if times[-1] - times[i] >= t_min]
    if not eligible:
        raise ValueError("timeline too short")
    i = eligible[int(rng.integers(len(eligible)))]
    t = times[i]
    span = times[-1] - t
    dt = min(float(rng.uniform(t_min, t_max)), span)
    target = interpolate_shape(timeline, t + dt, steps_per_year)
    return timeline.models[i], dt, target


def _observed_pairs(timeline: PatientTimeline):
    """Consecutive observed (input, dt, target model) triples, skipping the
    first gap (no historic growth at the first scan)."""
    times = timeline.times
    return [(timeline.models[i], times[i + 1] - times[i], timeline.models[i + 1])
            for i in range(1, len(times) - 1)]


def _region_chamfer(gm: GrowthModel, model: VascularModel, dt: float,
                    target: TriMesh, region: str) -> Tensor:
    disp = gm.forward(model, dt)
    src_mask = model.mesh.region_mask(region)
    tgt_mask = target.region_mask(region) if target.region is not None else \
        np.ones(target.n_vertices, dtype=bool)
    moved = Tensor(model.mesh.vertices[src_mask]) + ad.gather(disp, np.flatnonzero(src_mask))
    return chamfer_loss(moved, target.vertices[tgt_mask])


def train(dataset: list[PatientTimeline], cfg: TrainConfig | None = None,
          model_config: ModelConfig | None = None,
          validation_hook=None) -> GrowthModel:
    """Train the growth predictor with temporal augmentation.

    One epoch draws one supervision pair per timeline (shuffled), stepping
    Adam every `batch_size` pairs on the mean region-restricted Chamfer loss.
    The fitted temporal fields are frozen throughout.  Deterministic under
    cfg.seed; the returned model carries a per-epoch `loss_log`.
    """
    cfg = cfg or TrainConfig()
    if any(tl.fitted_field is None for tl in dataset):
        raise ValueError("all timelines must have fitted temporal fields")
    model_config = model_config or ModelConfig(
        t_min=cfg.t_min, t_max=cfg.t_max, seed=cfg.seed)
    rng = np.random.default_rng(cfg.seed)

    inputs_pool = [tl.models[i] for tl in dataset
                   for i in range(1, len(tl.models) - 1)]
    stats = compute_standardization(
        inputs_pool, np.linspace(cfg.t_min, cfg.t_max, 16))
    gm = GrowthModel(model_config, stats=stats,
                     rng=np.random.default_rng(model_config.seed))

    optimizer = ad.Adam(gm.params(), lr=cfg.learning_rate)
    loss_log: list[float] = []
    for epoch in range(cfg.epochs):
        order = rng.permutation(len(dataset))
        epoch_losses = []
        for start in range(0, len(order), cfg.batch_size):
            optimizer.zero_grad()
            batch = order[start:start + cfg.batch_size]
            loss = None
            for k in batch:
                tl = dataset[k]
                if cfg.augment:
                    inp, dt, target = sample_training_pair(
                        tl, rng, cfg.t_min, cfg.t_max, cfg.steps_per_year)
                else:
                    pairs = _observed_pairs(tl)
                    inp, dt, tgt_model = pairs[int(rng.integers(len(pairs)))]
                    target = tgt_model.mesh
                term = _region_chamfer(gm, inp, dt, target, cfg.loss_region)
                loss = term if loss is None else loss + term
            loss = loss * (1.0 / len(batch))
            if not np.isfinite(loss.data):
                raise FloatingPointError(
                    f"NaN loss at epoch {epoch}, batch starting {start}; "
                    f"last finite epoch losses: {loss_log[-3:]}")
            loss.backward()
            optimizer.step()
            epoch_losses.append(float(loss.data))
        loss_log.append(float(np.mean(epoch_losses)))
        if validation_hook is not None:
            validation_hook(epoch, gm, loss_log[-1])
    gm.loss_log = loss_log
    return gm


def baseline_zero(model: VascularModel, dt: float) -> np.ndarray:
    """No-growth baseline: the zero deformation field."""
    return np.zeros((model.mesh.n_vertices, 3))


def baseline_hist(timeline: PatientTimeline, t: float, dt: float,
                  steps_per_year: int = 16) -> np.ndarray:
    """Linear extrapolation of the past six months of growth.

    Vertex correspondence comes from advecting the snapshot's vertices half a
    year backwards along the fitted field; the resulting per-vertex
    displacement is scaled by dt / 0.5.
    """
    if timeline.fitted_field is None:
        raise ValueError("timeline has no fitted field")
    times = timeline.times
    if t - 0.5 < times[0] - 1e-9:
        raise ValueError("insufficient history for the six-month lookback")
    current = timeline.model_at(t).mesh.vertices
    steps = max(1, int(round(steps_per_year * 0.5)))
    with ad.no_grad():
        past = integrate(timeline.fitted_field, current, t, t - 0.5, steps)
    return (dt / 0.5) * (current - past)


def ensemble_predict(models: list[GrowthModel], model: VascularModel,
                     dt: float) -> np.ndarray:
    """Average the orientation and the magnitude across ensemble members.

    Per vertex: mean of unit directions (zero vectors contribute zero),
    renormalized, scaled by the mean magnitude.
    """
    if not models:
        raise ValueError("empty ensemble")
    fields = np.stack([gm.predict(model, dt) for gm in models])
    mags = np.linalg.norm(fields, axis=2)
    safe = np.maximum(mags, 1e-300)[..., None]
    units = np.where(mags[..., None] > 0, fields / safe, 0.0)
    mean_dir = units.mean(axis=0)
    dir_norm = np.linalg.norm(mean_dir, axis=1, keepdims=True)
    mean_dir = np.where(dir_norm > 1e-12, mean_dir / np.maximum(dir_norm, 1e-300), 0.0)
    return mean_dir * mags.mean(axis=0)[:, None]


def _deformed_model(model: VascularModel, disp: np.ndarray) -> VascularModel:
    return VascularModel(mesh=model.mesh.with_vertices(model.mesh.vertices + disp),
                         lumen_mesh=model.lumen_mesh, centerline=model.centerline,
                         features=model.features, time=model.time)


def predict_threshold_crossing(gm: GrowthModel, model: VascularModel,
                               threshold: float = 55.0, horizon: float = 2.0,
                               step_months: int = 1):
    """(crosses, month): first month within the horizon at which the predicted
    maximum diameter reaches the threshold.

    Each step re-conditions on the original input with a larger dt (the
    conditioning sweep matches the training distribution); predictions are
    not fed back autoregressively.
    """
    d0 = max_diameter(model)[2]
    if d0 >= threshold:
        raise ValueError(f"input already exceeds threshold: {d0:.2f} mm")
    for month in range(step_months, int(round(horizon * 12)) + 1, step_months):
        disp = gm.predict(model, month / 12.0)
        d = max_diameter(_deformed_model(model, disp))[2]
        if d >= threshold:
            return True, month
    return False, None


def trajectory_arc_length(gm: GrowthModel, model: VascularModel,
                          months: int = 24) -> np.ndarray:
    """Per-vertex arc length of the rollout trajectory over monthly dt steps."""
    prev = np.zeros((model.mesh.n_vertices, 3))
    total = np.zeros(model.mesh.n_vertices)
    for month in range(1, months + 1):
        disp = gm.predict(model, month / 12.0)
        total += np.linalg.norm(disp - prev, axis=1)
        prev = disp
    return total


def evaluate(predictor, dataset: list[PatientTimeline],
             eval_region: str = "infrarenal") -> MetricsReport:
    """Growth-prediction metrics over consecutive observed pairs.

    `predictor` maps (input model, dt) to a deformation field.  The first gap
    of each timeline is excluded (no historic growth at the first scan).
    Reports hd95 (mm), diameter error (mm), and relative growth-volume
    deviation on the evaluation region.
    """
    report = MetricsReport()
    for tl in dataset:
        for inp, dt, target in _observed_pairs(tl):
            disp = predictor(inp, dt)
            pred = _deformed_model(inp, disp)
            mask_p = pred.mesh.region_mask(eval_region)
            mask_t = target.mesh.region_mask(eval_region)
            row = {
                "patient": tl.patient_id,
                "t": float(inp.time),
                "dt": float(dt),
                "chamfer": chamfer(pred.mesh.vertices[mask_p],
                                   target.mesh.vertices[mask_t]),
                "hd95": hd95(pred.mesh.vertices[mask_p],
                             target.mesh.vertices[mask_t]),
                "diameter_error": abs(max_diameter(pred)[2]
                                      - max_diameter(target)[2]),
                "rgvd": rgvd(region_volume(pred) - region_volume(inp),
                             region_volume(target) - region_volume(inp)),
            }
            report.rows.append(row)
    return report
