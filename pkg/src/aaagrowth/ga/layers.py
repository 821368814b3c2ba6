"""Equivariant neural building blocks on G(3,0,1) multivector tensors.

A multivector feature tensor has shape (n, c, 16): n tokens/vertices, c
channels.  All maps here commute with the channel-wise versor sandwich of a
rigid motion, which the test suite checks property-style.

Equivariant linear maps are spanned by 9 basis maps per channel pair: the 5
grade projections plus the 4 grade-wise restrictions of left multiplication
by e0 (which is invariant under even versors).  Layer norm and attention
logits use the invariant inner product, i.e. the Euclidean inner product over
the non-e0 blade components; e0-carrying components have zero invariant norm
under the degenerate metric and pass through normalization untouched.
"""

from __future__ import annotations

import numpy as np

from .. import autodiff as ad
from ..autodiff import Tensor
from . import algebra

_NORM_EPS = 1e-12


def _build_equi_basis() -> np.ndarray:
    """(9, 16, 16) stack of basis maps, applied as y_t = B[k, t, s] x_s."""
    basis = np.zeros((9, 16, 16))
    for grade in range(5):
        for i in np.flatnonzero(algebra.GRADES == grade):
            basis[grade, i, i] = 1.0
    # left multiplication by e0, grade by grade
    e0 = np.zeros(16)
    e0[1] = 1.0
    for s in range(16):
        if algebra.EUCLIDEAN_MASK[s]:
            x = np.zeros(16)
            x[s] = 1.0
            out = algebra.geometric_product(e0, x)
            basis[5 + algebra.GRADES[s], :, s] = out
    return basis


EQUI_BASIS = _build_equi_basis()
_EUCLID = algebra.EUCLIDEAN_MASK.astype(np.float64)


def equi_linear(weights: Tensor, x: Tensor) -> Tensor:
    """Equivariant linear map.

    weights: (c_out, c_in, 9) coefficients over EQUI_BASIS.
    x:       (n, c_in, 16).
    returns  (n, c_out, 16).
    """
    if weights.shape[1] != x.shape[1]:
        raise ValueError(
            f"channel mismatch: weights expect {weights.shape[1]}, got {x.shape[1]}"
        )
    kernel = ad.einsum("oik,kts->oits", weights, Tensor(EQUI_BASIS))
    return ad.einsum("nis,oits->not", x, kernel)


def identity_weights(channels: int) -> np.ndarray:
    """equi_linear weights realizing the identity map on `channels` channels."""
    w = np.zeros((channels, channels, 9))
    for c in range(channels):
        w[c, c, :5] = 1.0
    return w


def init_equi_weights(rng: np.random.Generator, c_out: int, c_in: int,
                      scale: float | None = None) -> np.ndarray:
    if scale is None:
        scale = 1.0 / np.sqrt(c_in)
    return rng.normal(0.0, scale, size=(c_out, c_in, 9))


def invariant_norm_sq(x: Tensor) -> Tensor:
    """Per-token mean over channels of the invariant inner product <x, x>.

    x: (n, c, 16) -> (n,).
    """
    masked = x * Tensor(_EUCLID)
    return (masked * masked).sum(axis=-1).mean(axis=-1)


def mv_layer_norm(x: Tensor) -> Tensor:
    """Normalize each token by its invariant norm; all-zero tokens stay zero."""
    scale = (invariant_norm_sq(x) + _NORM_EPS) ** -0.5
    return x * scale.reshape(x.shape[0], 1, 1)


def gated_mv(x: Tensor) -> Tensor:
    """Gated nonlinearity: sigmoid of the scalar component gates the channel."""
    gate = x[:, :, 0].sigmoid()
    return x * gate.reshape(x.shape[0], x.shape[1], 1)


class EquiLinear:
    """Learnable equivariant linear layer."""

    def __init__(self, weights: np.ndarray):
        self.weights = Tensor(np.asarray(weights, dtype=np.float64), requires_grad=True)

    @classmethod
    def random(cls, rng, c_out, c_in, scale=None):
        return cls(init_equi_weights(rng, c_out, c_in, scale))

    @classmethod
    def identity(cls, channels):
        return cls(identity_weights(channels))

    @classmethod
    def zero(cls, c_out, c_in):
        return cls(np.zeros((c_out, c_in, 9)))

    def __call__(self, x: Tensor) -> Tensor:
        return equi_linear(self.weights, x)

    def named_params(self, prefix: str) -> dict:
        return {f"{prefix}.weights": self.weights}


class EquiMLP:
    """Equivariant MLP: linear -> gated nonlinearity -> linear."""

    def __init__(self, lin1: EquiLinear, lin2: EquiLinear):
        self.lin1 = lin1
        self.lin2 = lin2

    @classmethod
    def random(cls, rng, c_in, c_hidden, c_out, zero_out: bool = False):
        lin2 = EquiLinear.zero(c_out, c_hidden) if zero_out else \
            EquiLinear.random(rng, c_out, c_hidden)
        return cls(EquiLinear.random(rng, c_hidden, c_in), lin2)

    def __call__(self, x: Tensor) -> Tensor:
        return self.lin2(gated_mv(self.lin1(x)))

    def named_params(self, prefix: str) -> dict:
        out = {}
        out.update(self.lin1.named_params(f"{prefix}.lin1"))
        out.update(self.lin2.named_params(f"{prefix}.lin2"))
        return out


class SelfAttention:
    """Multi-head geometric self-attention with residual.

    A = x + xi(Concat_h Softmax(q_h k_h^T / sqrt(d/2)) v_h), where q, k, v are
    layer normalization composed with equivariant linear maps, logits use the
    invariant inner product, heads split the channel axis, and d = 16 c.
    """

    def __init__(self, q: EquiLinear, k: EquiLinear, v: EquiLinear,
                 xi: EquiLinear, heads: int):
        c = q.weights.shape[0]
        if c % heads != 0:
            raise ValueError(f"channels {c} not divisible by heads {heads}")
        self.q, self.k, self.v, self.xi = q, k, v, xi
        self.heads = heads

    @classmethod
    def random(cls, rng, channels, heads, zero_out: bool = False):
        mk = lambda: EquiLinear.random(rng, channels, channels)
        xi = EquiLinear.zero(channels, channels) if zero_out else mk()
        return cls(mk(), mk(), mk(), xi, heads)

    def attend(self, x: Tensor) -> Tensor:
        """Attention output before the residual connection."""
        n, c, _ = x.shape
        h = self.heads
        normed = mv_layer_norm(x)
        q, k, v = self.q(normed), self.k(normed), self.v(normed)
        d = 16 * c
        split = lambda t: t.reshape(n, h, c // h, 16).transpose(1, 0, 2, 3)
        qh = split(q * Tensor(_EUCLID))
        kh = split(k * Tensor(_EUCLID))
        vh = split(v)
        logits = ad.einsum("hicq,hjcq->hij", qh, kh) * (1.0 / np.sqrt(d / 2))
        attn = ad.softmax(logits, axis=-1)
        out = ad.einsum("hij,hjcq->hicq", attn, vh)
        merged = out.transpose(1, 0, 2, 3).reshape(n, c, 16)
        return self.xi(merged)

    def __call__(self, x: Tensor) -> Tensor:
        return x + self.attend(x)

    def named_params(self, prefix: str) -> dict:
        out = {}
        for name in ("q", "k", "v", "xi"):
            out.update(getattr(self, name).named_params(f"{prefix}.{name}"))
        return out


class GATrBlock:
    """Transformer block: attention sub-block, then residual equivariant MLP."""

    def __init__(self, attention: SelfAttention, mlp: EquiMLP):
        self.attention = attention
        self.mlp = mlp

    @classmethod
    def random(cls, rng, channels, heads, mlp_hidden=None, zero_out: bool = False):
        if mlp_hidden is None:
            mlp_hidden = 2 * channels
        return cls(
            SelfAttention.random(rng, channels, heads, zero_out=zero_out),
            EquiMLP.random(rng, channels, mlp_hidden, channels, zero_out=zero_out),
        )

    def __call__(self, x: Tensor) -> Tensor:
        a = self.attention(x)
        return a + self.mlp(a)

    def named_params(self, prefix: str) -> dict:
        out = {}
        out.update(self.attention.named_params(f"{prefix}.attention"))
        out.update(self.mlp.named_params(f"{prefix}.mlp"))
        return out


def apply_motion_tensor(motion: algebra.RigidMotion, x: np.ndarray) -> np.ndarray:
    """Channel-wise versor sandwich on an (n, c, 16) numpy feature tensor."""
    return algebra.apply_motion(motion, np.asarray(x))
