"""Equivariant building blocks: equivariance under random rigid motions,
identity/zero initializations, normalization behavior, and gradients."""

import numpy as np
import pytest

import aaagrowth.autodiff as ad
from aaagrowth.autodiff import Tensor
from aaagrowth.ga import algebra, layers
from aaagrowth.ga.layers import (EquiLinear, EquiMLP, GATrBlock, SelfAttention,
                                 equi_linear, gated_mv, identity_weights,
                                 invariant_norm_sq, mv_layer_norm)

from conftest import random_motions


def _random_features(rng, n=6, c=4):
    """Feature tensor whose channels are embedded geometric objects, so that
    equivariance is exercised on realistic content (planes, translations,
    scalars), not arbitrary multivectors."""
    x = np.zeros((n, c, 16))
    for i in range(n):
        for j in range(c):
            kind = (i + j) % 3
            if kind == 0:
                x[i, j] = algebra.embed_scalar(rng.normal())
            elif kind == 1:
                nrm = rng.normal(size=3)
                x[i, j] = algebra.embed_plane(nrm, rng.normal())
            else:
                x[i, j] = algebra.embed_translation(rng.normal(size=3))
    return x


def _assert_equivariant(fn, x, motions, atol=1e-6):
    out = fn(Tensor(x)).data
    for m in motions:
        moved_in = algebra.apply_motion(m, x)
        moved_out = fn(Tensor(moved_in)).data
        np.testing.assert_allclose(moved_out, algebra.apply_motion(m, out),
                                   atol=atol)


MOTIONS = random_motions(5, seed=11)


def test_equi_linear_equivariance():
    rng = np.random.default_rng(0)
    lin = EquiLinear.random(rng, 5, 4)
    _assert_equivariant(lin, _random_features(rng), MOTIONS)


def test_equi_linear_identity_and_zero():
    rng = np.random.default_rng(1)
    x = _random_features(rng)
    np.testing.assert_array_equal(
        EquiLinear.identity(4)(Tensor(x)).data, x)
    assert np.all(EquiLinear.zero(3, 4)(Tensor(x)).data == 0)


def test_equi_linear_channel_mismatch():
    with pytest.raises(ValueError, match="channel mismatch"):
        EquiLinear.zero(3, 5)(Tensor(np.zeros((2, 4, 16))))


def test_layer_norm_equivariance_and_scale():
    rng = np.random.default_rng(2)
    x = _random_features(rng)
    _assert_equivariant(mv_layer_norm, x, MOTIONS)
    # scale invariance: normalizing a scaled input gives the same output
    a = mv_layer_norm(Tensor(x)).data
    b = mv_layer_norm(Tensor(x * 37.5)).data
    np.testing.assert_allclose(a, b, atol=1e-10)
    # idempotence
    np.testing.assert_allclose(mv_layer_norm(Tensor(a)).data, a, atol=1e-9)


def test_layer_norm_zero_input_stays_zero():
    out = mv_layer_norm(Tensor(np.zeros((3, 2, 16)))).data
    assert np.all(out == 0)


def test_invariant_norm_ignores_e0_components():
    x = np.zeros((1, 1, 16))
    x[0, 0, algebra.comp("e0")] = 5.0
    x[0, 0, algebra.comp("e01")] = -2.0
    assert invariant_norm_sq(Tensor(x)).data[0] == 0.0


def test_gated_nonlinearity_equivariance():
    rng = np.random.default_rng(3)
    _assert_equivariant(gated_mv, _random_features(rng), MOTIONS)


def test_attention_and_block_equivariance():
    rng = np.random.default_rng(4)
    x = _random_features(rng, n=7, c=4)
    attn = SelfAttention.random(rng, 4, heads=2)
    _assert_equivariant(attn, x, MOTIONS)
    block = GATrBlock.random(rng, 4, heads=2)
    _assert_equivariant(block, x, MOTIONS)


def test_attention_head_divisibility():
    rng = np.random.default_rng(5)
    with pytest.raises(ValueError, match="not divisible"):
        SelfAttention.random(rng, 5, heads=2)


def test_zero_init_block_is_identity():
    rng = np.random.default_rng(6)
    x = _random_features(rng)
    block = GATrBlock.random(rng, 4, heads=2, zero_out=True)
    np.testing.assert_array_equal(block(Tensor(x)).data, x)


def test_single_token_attention_is_projection_of_value():
    """With one token the softmax is degenerate (weight 1 on itself)."""
    rng = np.random.default_rng(7)
    x = _random_features(rng, n=1, c=4)
    attn = SelfAttention.random(rng, 4, heads=2)
    expected = attn.xi(attn.v(mv_layer_norm(Tensor(x)))).data
    np.testing.assert_allclose(attn.attend(Tensor(x)).data, expected, atol=1e-12)


def test_block_gradcheck():
    rng = np.random.default_rng(8)
    x = _random_features(rng, n=4, c=2)
    block = GATrBlock.random(rng, 2, heads=1, mlp_hidden=3)
    params = list(block.named_params("b").values())
    err, ok = ad.gradcheck(
        lambda *_: (block(Tensor(x)) ** 2).sum(), params, rtol=1e-4)
    assert ok, f"max relative gradient error {err}"


def test_named_params_unique_and_complete():
    rng = np.random.default_rng(9)
    block = GATrBlock.random(rng, 4, heads=2)
    names = block.named_params("block0")
    assert len(names) == 6  # q, k, v, xi, mlp lin1, mlp lin2
    assert all(name.startswith("block0.") for name in names)
