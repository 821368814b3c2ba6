"""Growth predictor: feature embedding, tokenization, interpolation,
end-to-end equivariance, determinism, and gradients."""

import numpy as np
import pytest

import aaagrowth.autodiff as ad
from aaagrowth.autodiff import Tensor
from aaagrowth.ga.algebra import RigidMotion, apply_motion
from aaagrowth.ga.layers import EquiLinear, apply_motion_tensor, identity_weights
from aaagrowth.model import (GrowthModel, ModelConfig, N_CHANNELS,
                             SCALAR_CHANNELS, build_features,
                             compute_standardization, interpolate_up,
                             interpolation_weights, tokenize)
from aaagrowth.surface.mesh import FEATURE_NAMES, TriMesh, VascularModel
from aaagrowth.temporal import chamfer_loss

from conftest import tube_mesh


def _vascular(n_rings=12, n_around=10, seed=0, noise=0.05):
    """Generic (noisy, tie-free) tube with random feature fields."""
    mesh = tube_mesh(n_rings=n_rings, n_around=n_around, noise=noise, seed=seed)
    rng = np.random.default_rng(seed + 100)
    features = {name: rng.random(mesh.n_vertices) for name in FEATURE_NAMES}
    return VascularModel(mesh=mesh, lumen_mesh=None, centerline=None,
                         features=features, time=0.0)


def _moved(model, motion):
    mesh = TriMesh(motion.apply_to_points(model.mesh.vertices),
                   model.mesh.faces.copy())
    return VascularModel(mesh=mesh, lumen_mesh=None, centerline=None,
                         features=model.features, time=model.time)


class TestBuildFeatures:
    def test_channel_structure(self):
        model = _vascular()
        n = model.mesh.n_vertices
        model.features = {name: np.zeros(n) for name in FEATURE_NAMES}
        x = build_features(model, dt=1.0)
        assert x.shape == (n, 9, 16)
        assert np.all(x[:, :7] == 0)  # zero scalars stay zero (default stats)
        np.testing.assert_allclose(x[:, 7, 0], 1.0)  # dt scalar channel
        assert np.all(x[:, 7, 1:] == 0)
        assert np.any(x[:, 8, 1:5] != 0)  # plane channel only
        assert np.all(x[:, 8, 5:] == 0) and np.all(x[:, 8, 0] == 0)

    def test_standardization_applied(self):
        model = _vascular(seed=1)
        stats = {name: (0.5, 2.0) for name in (*SCALAR_CHANNELS, "dt")}
        x = build_features(model, dt=1.5, stats=stats)
        expected = (model.features["thickness"] - 0.5) / 2.0
        np.testing.assert_allclose(x[:, 0, 0], expected)
        np.testing.assert_allclose(x[:, 7, 0], (1.5 - 0.5) / 2.0)

    def test_motion_touches_only_plane_channel(self):
        model = _vascular(seed=2)
        motion = RigidMotion.random(np.random.default_rng(0))
        x = build_features(model, 1.0)
        x_moved = build_features(_moved(model, motion), 1.0)
        np.testing.assert_allclose(x_moved[:, :8], x[:, :8], atol=0)
        np.testing.assert_allclose(x_moved[:, 8],
                                   apply_motion(motion, x[:, 8]), atol=1e-9)

    def test_missing_feature_raises(self):
        model = _vascular(seed=3)
        del model.features["osi"]
        with pytest.raises(ValueError, match="osi"):
            build_features(model, 1.0)

    def test_nonpositive_dt_raises(self):
        with pytest.raises(ValueError, match="dt"):
            build_features(_vascular(), 0.0)

    def test_compute_standardization(self):
        models = [_vascular(seed=s) for s in (4, 5)]
        stats = compute_standardization(models, [0.5, 1.0, 2.0])
        pooled = np.concatenate([m.features["radius"] for m in models])
        assert stats["radius"][0] == pytest.approx(pooled.mean())
        assert stats["radius"][1] == pytest.approx(pooled.std())
        assert stats["dt"][0] == pytest.approx(np.mean([0.5, 1.0, 2.0]))


class TestTokenize:
    def test_cluster_partition(self):
        model = _vascular(seed=6)
        x = build_features(model, 1.0)
        gm = GrowthModel(ModelConfig(downsample_ratio=0.1, seed=0))
        tokens, coarse, clusters = tokenize(x, model.mesh.vertices, 0.1, 0,
                                            gm.msg_mlp)
        assert tokens.shape == (len(coarse), gm.config.hidden_channels, 16)
        assert np.bincount(clusters, minlength=len(coarse)).sum() == len(x)

    def test_identity_message_map_at_full_resolution(self):
        """ratio 1: clusters are singletons, the relative position is the
        zero translation (scalar 1), and an identity message map returns the
        input features unchanged."""
        model = _vascular(seed=7)
        x = build_features(model, 1.0)
        weights = np.concatenate([identity_weights(N_CHANNELS),
                                  np.zeros((N_CHANNELS, 1, 9))], axis=1)
        tokens, coarse, _ = tokenize(x, model.mesh.vertices, 1.0, 0,
                                     EquiLinear(weights))
        np.testing.assert_array_equal(tokens.data, x[coarse])

    def test_equivariance(self):
        model = _vascular(seed=8)
        x = build_features(model, 1.0)
        gm = GrowthModel(ModelConfig(downsample_ratio=0.1, seed=0))
        tokens, coarse, _ = tokenize(x, model.mesh.vertices, 0.1, 0, gm.msg_mlp)
        rng = np.random.default_rng(1)
        for _ in range(5):
            motion = RigidMotion.random(rng)
            moved = _moved(model, motion)
            x_m = build_features(moved, 1.0)
            tokens_m, coarse_m, _ = tokenize(x_m, moved.mesh.vertices, 0.1, 0,
                                             gm.msg_mlp)
            np.testing.assert_array_equal(coarse_m, coarse)
            np.testing.assert_allclose(
                tokens_m.data, apply_motion_tensor(motion, tokens.data),
                atol=1e-6)


class TestInterpolateUp:
    def test_weights_sum_to_one(self):
        rng = np.random.default_rng(9)
        fine, coarse = rng.normal(size=(40, 3)), rng.normal(size=(9, 3))
        w = interpolation_weights(fine, coarse)
        np.testing.assert_allclose(w.sum(axis=1), 1.0, atol=1e-12)
        assert np.all((w > 0).sum(axis=1) <= 3)

    def test_coincident_vertex_copies_exactly(self):
        rng = np.random.default_rng(10)
        coarse = rng.normal(size=(6, 3))
        fine = np.vstack([coarse[2], rng.normal(size=(3, 3))])
        w = interpolation_weights(fine, coarse)
        expected = np.zeros(6)
        expected[2] = 1.0
        np.testing.assert_array_equal(w[0], expected)

    def test_equal_neighbours_give_that_value(self):
        rng = np.random.default_rng(11)
        coarse = rng.normal(size=(5, 3))
        values = np.broadcast_to(rng.normal(size=(1, 2, 16)), (5, 2, 16)).copy()
        fine = rng.normal(size=(7, 3))
        out = interpolate_up(values, fine, coarse)
        np.testing.assert_allclose(out.data,
                                   np.broadcast_to(values[:1], (7, 2, 16)),
                                   atol=1e-12)

    def test_fewer_than_three_coarse_uses_all(self):
        rng = np.random.default_rng(12)
        coarse = rng.normal(size=(2, 3))
        w = interpolation_weights(rng.normal(size=(4, 3)), coarse)
        np.testing.assert_allclose(w.sum(axis=1), 1.0, atol=1e-12)
        assert w.shape == (4, 2)


class TestPredict:
    CFG = ModelConfig(downsample_ratio=0.08, blocks=1, heads=2,
                      hidden_channels=4, seed=0)

    def test_zero_readout_gives_zero_field(self):
        gm = GrowthModel(self.CFG, zero_readout=True)
        assert np.all(gm.predict(_vascular(), 1.0) == 0)

    def test_determinism_bitwise(self):
        gm = GrowthModel(self.CFG)
        model = _vascular(seed=13)
        np.testing.assert_array_equal(gm.predict(model, 1.0),
                                      gm.predict(model, 1.0))

    def test_equivariance_20_motions(self):
        gm = GrowthModel(self.CFG)
        model = _vascular(seed=14)
        y = gm.predict(model, 1.0)
        rng = np.random.default_rng(2)
        for _ in range(20):
            motion = RigidMotion.random(rng)
            y_m = gm.predict(_moved(model, motion), 1.0)
            np.testing.assert_allclose(y_m, motion.apply_to_vectors(y),
                                       atol=1e-5)

    def test_permutation_invariance(self):
        gm = GrowthModel(self.CFG)
        model = _vascular(seed=15)
        y = gm.predict(model, 1.0)
        perm = np.random.default_rng(3).permutation(model.mesh.n_vertices)
        inv = np.argsort(perm)
        permuted_mesh = TriMesh(model.mesh.vertices[perm],
                                inv[model.mesh.faces])
        permuted = VascularModel(
            mesh=permuted_mesh, lumen_mesh=None, centerline=None,
            features={k: v[perm] for k, v in model.features.items()}, time=0.0)
        y_p = gm.predict(permuted, 1.0)
        np.testing.assert_allclose(y_p, y[perm], atol=1e-8)

    def test_dt_conditioning_changes_output(self):
        gm = GrowthModel(self.CFG)
        model = _vascular(seed=16)
        assert np.abs(gm.predict(model, 0.6) - gm.predict(model, 1.8)).max() > 0

    def test_out_of_range_dt_warns(self):
        gm = GrowthModel(self.CFG)
        with pytest.warns(UserWarning, match="conditioning range"):
            gm.predict(_vascular(seed=17), 5.0)

    def test_save_load_round_trip(self, tmp_path):
        gm = GrowthModel(self.CFG)
        model = _vascular(seed=18)
        path = tmp_path / "m.ckpt"
        gm.save(path)
        loaded = GrowthModel.load(path)
        np.testing.assert_array_equal(loaded.predict(model, 1.0),
                                      gm.predict(model, 1.0))

    def test_predict_mesh_moves_vertices(self):
        gm = GrowthModel(self.CFG)
        model = _vascular(seed=19)
        deformed = gm.predict_mesh(model, 1.0)
        np.testing.assert_array_equal(
            deformed.vertices, model.mesh.vertices + gm.predict(model, 1.0))
        np.testing.assert_array_equal(deformed.faces, model.mesh.faces)


def test_end_to_end_chamfer_gradcheck():
    """Gradient of the Chamfer loss through the full pipeline, ~50 vertices."""
    mesh = tube_mesh(n_rings=6, n_around=8, noise=0.05, seed=20)
    rng = np.random.default_rng(21)
    model = VascularModel(
        mesh=mesh, lumen_mesh=None, centerline=None,
        features={k: rng.random(mesh.n_vertices) for k in FEATURE_NAMES},
        time=0.0)
    target = mesh.vertices + rng.normal(size=mesh.vertices.shape) * 0.3
    gm = GrowthModel(ModelConfig(downsample_ratio=0.15, blocks=1, heads=2,
                                 hidden_channels=4, msg_hidden=6,
                                 final_hidden=6, seed=0))

    def loss(*_):
        disp = gm.forward(model, 1.0)
        return chamfer_loss(Tensor(mesh.vertices) + disp, target)

    err, ok = ad.gradcheck(loss, gm.params(), rtol=1e-3)
    assert ok, f"max relative gradient error {err}"
