"""The growth predictor: per-vertex feature embedding into G(3,0,1),
message-passing tokenization to a coarse vertex set, geometric transformer
blocks, learned inverse-distance interpolation back to full resolution, and a
Euclidean vector readout.

The whole pipeline is SE(3)-equivariant: rigid motion of the input surface
rotates the predicted per-vertex displacement vectors (translations cancel on
vectors), which the test suite checks property-style.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .checkpoint import load_checkpoint, save_checkpoint
from .ga import algebra
from .ga.layers import EquiLinear, EquiMLP, GATrBlock, equi_linear
from .surface.mesh import FEATURE_NAMES, TriMesh, VascularModel, tangent_planes
from .surface.sampling import cluster_assign, farthest_point_sample

#: scalar channels in embedding order; delta-t occupies the slot after these
SCALAR_CHANNELS = FEATURE_NAMES  # 4 morphological, 2 hemodynamic, 1 historic
N_CHANNELS = len(SCALAR_CHANNELS) + 2  # + delta-t scalar + tangent plane


@dataclass
class ModelConfig:
    """Architecture and conditioning-range settings."""

    downsample_ratio: float = 0.05
    blocks: int = 2
    heads: int = 4
    hidden_channels: int = 8
    msg_hidden: int = 16
    final_hidden: int = 16
    t_min: float = 0.5
    t_max: float = 2.0
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.downsample_ratio <= 1.0:
            raise ValueError("downsample_ratio must be in (0, 1]")
        if self.t_min >= self.t_max:
            raise ValueError("t_min must be less than t_max")
        if min(self.blocks, self.heads, self.hidden_channels) < 1:
            raise ValueError("counts must be >= 1")

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def default_standardization() -> dict[str, tuple[float, float]]:
    return {name: (0.0, 1.0) for name in (*SCALAR_CHANNELS, "dt")}


def compute_standardization(models, dts) -> dict[str, tuple[float, float]]:
    """Per-feature mean/std over a training split, for freezing into the
    checkpoint.  `dts` is the pool of conditioning intervals (years)."""
    stats = {}
    for name in SCALAR_CHANNELS:
        values = np.concatenate([np.asarray(m.features[name], dtype=np.float64)
                                 for m in models])
        stats[name] = (float(values.mean()), float(max(values.std(), 1e-9)))
    dts = np.asarray(dts, dtype=np.float64)
    stats["dt"] = (float(dts.mean()), float(max(dts.std(), 1e-9)))
    return stats


def build_features(model: VascularModel, dt: float,
                   stats: dict[str, tuple[float, float]] | None = None) -> np.ndarray:
    """Per-vertex multivector features, shape (n, 9, 16).

    Channels: the seven standardized surface scalars, the standardized
    conditioning interval (years), and the oriented tangent plane.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    model.require_features()
    stats = stats or default_standardization()
    n = model.mesh.n_vertices
    x = np.zeros((n, N_CHANNELS, 16))
    for c, name in enumerate(SCALAR_CHANNELS):
        mu, sd = stats[name]
        x[:, c, 0] = (np.asarray(model.features[name], dtype=np.float64) - mu) / sd
    mu, sd = stats["dt"]
    x[:, len(SCALAR_CHANNELS), 0] = (dt - mu) / sd
    normals, offsets = tangent_planes(model.mesh)
    x[:, -1, :] = algebra.embed_plane(normals, offsets)
    return x


def tokenize(x0, vertices: np.ndarray, ratio: float, seed: int, message_fn):
    """Pool fine-vertex features to a coarse token set by learned messages.

    Each fine vertex v sends m = message_fn(concat(x0(v), translation(p - v)))
    to its coarse anchor p (farthest-point sample + nearest-anchor clusters);
    a token is the mean of its cluster's messages.

    Returns (tokens, coarse_indices, clusters).
    """
    x0 = Tensor._lift(x0)
    vertices = np.asarray(vertices, dtype=np.float64)
    # geometry-derived start vertex (farthest from the centroid) keeps the
    # coarse set stable under vertex re-indexing
    start = int(np.argmax(np.linalg.norm(vertices - vertices.mean(axis=0), axis=1)))
    coarse = farthest_point_sample(vertices, ratio, seed, start=start)
    clusters = cluster_assign(vertices, coarse)
    rel = vertices[coarse][clusters] - vertices  # p - v per fine vertex
    rel_mv = algebra.embed_translation(rel)[:, None, :]
    messages = message_fn(ad.concatenate([x0, Tensor(rel_mv)], axis=1))
    tokens = ad.segment_mean(messages, clusters, len(coarse))
    return tokens, coarse, clusters


def interpolation_weights(fine_positions: np.ndarray,
                          coarse_positions: np.ndarray,
                          k: int = 3) -> np.ndarray:
    """(n, m) inverse-distance weights over the k nearest coarse vertices.

    Rows sum to 1; a fine vertex coinciding with a coarse vertex copies it
    exactly (limit of 1/distance weighting).
    """
    from scipy.spatial import cKDTree

    fine = np.asarray(fine_positions, dtype=np.float64)
    coarse = np.asarray(coarse_positions, dtype=np.float64)
    m = len(coarse)
    k = min(k, m)
    dist, idx = cKDTree(coarse).query(fine, k=k)
    dist = np.atleast_2d(dist.reshape(len(fine), k))
    idx = np.atleast_2d(idx.reshape(len(fine), k))
    weights = np.zeros((len(fine), m))
    coincident = dist[:, 0] < 1e-12
    lam = 1.0 / np.maximum(dist, 1e-300)
    lam /= lam.sum(axis=1, keepdims=True)
    rows = np.repeat(np.arange(len(fine)), k)
    np.add.at(weights, (rows, idx.ravel()), lam.ravel())
    weights[coincident] = 0.0
    weights[coincident, idx[coincident, 0]] = 1.0
    return weights


def interpolate_up(coarse_out, fine_positions, coarse_positions):
    """Distribute coarse multivector outputs back to every fine vertex."""
    w = interpolation_weights(fine_positions, coarse_positions)
    return ad.einsum("nm,mcq->ncq", Tensor(w), Tensor._lift(coarse_out))


class GrowthModel:
    """g: (vascular model, interval dt) -> per-vertex displacement (mm)."""

    def __init__(self, config: ModelConfig,
                 stats: dict[str, tuple[float, float]] | None = None,
                 rng: np.random.Generator | None = None,
                 zero_readout: bool = False):
        self.config = config
        self.stats = stats or default_standardization()
        rng = rng if rng is not None else np.random.default_rng(config.seed)
        ch = config.hidden_channels
        self.msg_mlp = EquiMLP.random(rng, N_CHANNELS + 1, config.msg_hidden, ch)
        self.blocks = [GATrBlock.random(rng, ch, config.heads, zero_out=True)
                       for _ in range(config.blocks)]
        self.final_mlp = EquiMLP.random(rng, ch + N_CHANNELS, config.final_hidden, ch)
        if zero_readout:
            w = np.zeros((1, ch))
        else:
            w = rng.normal(0.0, 0.1 / np.sqrt(ch), size=(1, ch))
        self.readout = Tensor(w, requires_grad=True)

    # -- parameters --------------------------------------------------------------

    def named_params(self) -> dict[str, Tensor]:
        out = {}
        out.update(self.msg_mlp.named_params("msg_mlp"))
        for i, block in enumerate(self.blocks):
            out.update(block.named_params(f"block{i}"))
        out.update(self.final_mlp.named_params("final_mlp"))
        out["readout.weights"] = self.readout
        return out

    def params(self) -> list[Tensor]:
        return list(self.named_params().values())

    # -- forward -----------------------------------------------------------------

    def forward(self, model: VascularModel, dt: float) -> Tensor:
        """Differentiable displacement field, shape (n, 3)."""
        x0 = Tensor(build_features(model, dt, self.stats))
        vertices = model.mesh.vertices
        tokens, coarse, _ = tokenize(x0, vertices, self.config.downsample_ratio,
                                     self.config.seed, self.msg_mlp)
        h = tokens
        for block in self.blocks:
            h = block(h)
        up = interpolate_up(h, vertices, vertices[coarse])
        y = self.final_mlp(ad.concatenate([up, x0], axis=1))
        # translation-bivector readout: mix the (translation-invariant)
        # Euclidean vector slots into the e0 bivector slots of one output
        # channel and decode tau = 2 x_{0i}; realized directly on the vector
        # slots, which is the same map
        vec = y[:, :, 2:5]
        ch = self.config.hidden_channels
        return ad.einsum("ncv,c->nv", vec, self.readout.reshape(ch)) * 2.0

    def predict(self, model: VascularModel, dt: float) -> np.ndarray:
        """Displacement field as a plain array; warns outside [t_min, t_max]."""
        if not self.config.t_min <= dt <= self.config.t_max:
            warnings.warn(f"dt={dt} years is outside the conditioning range "
                          f"[{self.config.t_min}, {self.config.t_max}]")
        with ad.no_grad():
            return self.forward(model, dt).data

    def predict_mesh(self, model: VascularModel, dt: float) -> TriMesh:
        """Deformed surface: vertices advanced by dt, connectivity unchanged."""
        return model.mesh.with_vertices(
            model.mesh.vertices + self.predict(model, dt))

    # -- serialization -----------------------------------------------------------

    def save(self, path) -> None:
        path = Path(path)
        arrays = {name: p.data for name, p in self.named_params().items()}
        stat_names = sorted(self.stats)
        arrays["stats.values"] = np.array([self.stats[k] for k in stat_names])
        save_checkpoint(path, arrays)
        sidecar = {"config": self.config.to_dict(), "stat_names": stat_names}
        path.with_suffix(path.suffix + ".json").write_text(
            json.dumps(sidecar, indent=2))

    @classmethod
    def load(cls, path) -> "GrowthModel":
        path = Path(path)
        sidecar = json.loads(path.with_suffix(path.suffix + ".json").read_text())
        config = ModelConfig(**sidecar["config"])
        arrays = load_checkpoint(path)
        values = arrays.pop("stats.values")
        stats = {k: (float(mu), float(sd))
                 for k, (mu, sd) in zip(sidecar["stat_names"], values)}
        gm = cls(config, stats=stats)
        params = gm.named_params()
        if set(params) != set(arrays):
            raise ValueError("checkpoint does not match model architecture")
        for name, p in params.items():
            if p.data.shape != arrays[name].shape:
                raise ValueError(f"shape mismatch for parameter {name}")
            p.data = arrays[name].astype(np.float64)
        return gm


def predict(gm: GrowthModel, model: VascularModel, dt: float) -> np.ndarray:
    """Functional alias for GrowthModel.predict."""
    return gm.predict(model, dt)
