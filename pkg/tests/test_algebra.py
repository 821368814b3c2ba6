"""Geometric algebra core: Cayley table against an independent oracle,
algebraic identities, and the geometric-object embeddings."""

import itertools

import numpy as np
import pytest

from aaagrowth.ga import algebra
from aaagrowth.ga.algebra import (RigidMotion, apply_motion, embed_plane,
                                  embed_point, embed_scalar, embed_translation,
                                  extract_plane, extract_point,
                                  extract_translation, geometric_product,
                                  grade_project, reverse)


def _oracle_blade_product(a, b):
    """Blade product computed by inversion counting (independent of the
    package's bubble-sort sign routine).

    Blades are index tuples over (0, 1, 2, 3); e0 squares to 0, the rest
    to +1.  Returns (sign, resulting blade tuple).
    """
    seq = list(a) + list(b)
    # parity of the permutation sorting seq, counted pairwise
    inversions = sum(1 for i, j in itertools.combinations(range(len(seq)), 2)
                     if seq[i] > seq[j])
    sign = -1 if inversions % 2 else 1
    # contract repeated indices under the metric
    out = []
    for idx in sorted(seq):
        if out and out[-1] == idx:
            out.pop()
            if idx == 0:
                return 0, ()
        else:
            out.append(idx)
    return sign, tuple(out)


def test_cayley_matches_independent_oracle():
    table = np.zeros_like(algebra.CAYLEY)
    for i, a in enumerate(algebra.BLADES):
        for j, b in enumerate(algebra.BLADES):
            sign, blade = _oracle_blade_product(a, b)
            if sign:
                table[i, j, algebra.BLADE_INDEX[blade]] = sign
    np.testing.assert_array_equal(table, algebra.CAYLEY)


def test_product_identities():
    rng = np.random.default_rng(0)
    a, b, c = rng.normal(size=(3, 16))
    ab_c = geometric_product(geometric_product(a, b), c)
    a_bc = geometric_product(a, geometric_product(b, c))
    np.testing.assert_allclose(ab_c, a_bc, atol=1e-12)
    left = geometric_product(a, b + c)
    right = geometric_product(a, b) + geometric_product(a, c)
    np.testing.assert_allclose(left, right, atol=1e-12)


def test_reverse_antihomomorphism():
    rng = np.random.default_rng(1)
    a, b = rng.normal(size=(2, 16))
    np.testing.assert_allclose(
        reverse(geometric_product(a, b)),
        geometric_product(reverse(b), reverse(a)), atol=1e-12)


def test_grade_projections_partition():
    rng = np.random.default_rng(2)
    a = rng.normal(size=16)
    total = sum(grade_project(a, g) for g in range(5))
    np.testing.assert_allclose(total, a, atol=0)
    # each projector keeps only its own grade
    for g in range(5):
        proj = grade_project(a, g)
        assert np.all(proj[algebra.GRADES != g] == 0)


def test_scalar_embedding():
    mv = embed_scalar(3.5)
    assert mv[0] == 3.5 and np.all(mv[1:] == 0)


def test_plane_embedding_normalizes_and_round_trips():
    mv = embed_plane(np.array([0.0, 0.0, 2.0]), 6.0)
    normal, offset = extract_plane(mv)
    np.testing.assert_allclose(normal, [0, 0, 1], atol=1e-12)
    assert offset == pytest.approx(3.0)
    with pytest.raises(ValueError, match="degenerate plane"):
        embed_plane(np.zeros(3), 1.0)


def test_plane_transforms_under_motion():
    rng = np.random.default_rng(3)
    for motion in [RigidMotion.random(rng) for _ in range(5)]:
        n = rng.normal(size=3)
        n /= np.linalg.norm(n)
        d = rng.normal()
        moved = apply_motion(motion, embed_plane(n, d))
        n2, d2 = extract_plane(moved)
        # a point on the original plane, moved rigidly, lies on the new plane
        p = n * d + np.cross(n, rng.normal(size=3))
        p_moved = motion.apply_to_points(p[None])[0]
        assert abs(np.dot(n2, p_moved) - d2) < 1e-9


def test_point_embedding_round_trip_and_motion():
    rng = np.random.default_rng(4)
    pts = rng.normal(size=(7, 3)) * 5
    np.testing.assert_allclose(extract_point(embed_point(pts)), pts, atol=1e-12)
    for motion in [RigidMotion.random(rng) for _ in range(5)]:
        moved_mv = apply_motion(motion, embed_point(pts))
        np.testing.assert_allclose(extract_point(moved_mv),
                                   motion.apply_to_points(pts), atol=1e-9)
    with pytest.raises(ValueError, match="point at infinity"):
        extract_point(np.zeros(16))


def test_translation_embedding_round_trip_and_motion():
    rng = np.random.default_rng(5)
    tau = rng.normal(size=(4, 3))
    np.testing.assert_allclose(
        extract_translation(embed_translation(tau)), tau, atol=1e-12)
    for motion in [RigidMotion.random(rng) for _ in range(5)]:
        moved = apply_motion(motion, embed_translation(tau))
        # translations transform as free vectors: rotated, not shifted
        np.testing.assert_allclose(extract_translation(moved),
                                   motion.apply_to_vectors(tau), atol=1e-9)


def test_zero_interval_translation_is_scalar_one():
    mv = embed_translation(np.zeros(3))
    assert mv[0] == 1.0 and np.all(mv[1:] == 0)


class TestRigidMotion:
    def test_identity(self):
        pts = np.random.default_rng(0).normal(size=(5, 3))
        np.testing.assert_array_equal(RigidMotion.identity().apply_to_points(pts), pts)

    def test_compose_matches_sequential_application(self):
        rng = np.random.default_rng(6)
        m1, m2 = RigidMotion.random(rng), RigidMotion.random(rng)
        pts = rng.normal(size=(6, 3))
        np.testing.assert_allclose(
            m2.compose(m1).apply_to_points(pts),
            m2.apply_to_points(m1.apply_to_points(pts)), atol=1e-12)

    def test_inverse(self):
        rng = np.random.default_rng(7)
        m = RigidMotion.random(rng)
        pts = rng.normal(size=(6, 3))
        np.testing.assert_allclose(
            m.inverse().apply_to_points(m.apply_to_points(pts)), pts, atol=1e-12)

    def test_matrix_agrees_with_apply(self):
        rng = np.random.default_rng(8)
        m = RigidMotion.random(rng)
        pts = rng.normal(size=(6, 3))
        R = m.matrix()
        np.testing.assert_allclose(pts @ R.T + m.translation,
                                   m.apply_to_points(pts), atol=1e-12)
        # proper rotation
        np.testing.assert_allclose(R @ R.T, np.eye(3), atol=1e-12)
        assert np.linalg.det(R) == pytest.approx(1.0)

    def test_versor_sandwich_moves_points(self):
        rng = np.random.default_rng(9)
        m = RigidMotion.random(rng)
        pts = rng.normal(size=(6, 3))
        sandwiched = apply_motion(m, embed_point(pts))
        np.testing.assert_allclose(extract_point(sandwiched),
                                   m.apply_to_points(pts), atol=1e-9)

    def test_versor_has_unit_norm(self):
        rng = np.random.default_rng(10)
        v = RigidMotion.random(rng).versor()
        vv = geometric_product(v, reverse(v))
        assert vv[0] == pytest.approx(1.0)
        np.testing.assert_allclose(vv[1:], 0, atol=1e-12)
