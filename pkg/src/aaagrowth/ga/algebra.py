"""Projective geometric algebra G(3,0,1): blades, products, embeddings, motions.

Multivector component order (16 components):

    index  0        : scalar
    index  1 -  4   : e0, e1, e2, e3          (vectors; e0^2 = 0, ei^2 = +1)
    index  5 - 10   : e01, e02, e03, e12, e13, e23   (bivectors)
    index 11 - 14   : e012, e013, e023, e123  (trivectors)
    index 15        : e0123                   (pseudoscalar)

Geometric objects embed as (all other components zero):

    scalar s              -> x_s = s
    plane (normal nu, d)  -> (x_0, x_1, x_2, x_3) = (d, nu)
    point rho             -> (x_012, x_013, x_023, x_123) = (rho, 1)
    translation tau       -> (x_s, x_01, x_02, x_03) = (1, tau / 2)

Rigid motions act by the versor sandwich m x ~m with even versors (rotors and
translators), which preserves grades and maps embedded objects to the embedded
transformed objects.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

# Basis blades as ordered index tuples; order matches the component layout.
BLADES: tuple[tuple[int, ...], ...] = tuple(
    blade for grade in range(5) for blade in combinations(range(4), grade)
)
BLADE_INDEX = {blade: i for i, blade in enumerate(BLADES)}
GRADES = np.array([len(b) for b in BLADES])

# Components whose blade does not contain the degenerate direction e0.  The
# invariant inner product (and hence layer norms and attention logits) only
# sees these.
EUCLIDEAN_MASK = np.array([0 not in b for b in BLADES])

_COMP = {"s": 0}
for _i, _b in enumerate(BLADES):
    _COMP["e" + "".join(map(str, _b))] = _i
del _i, _b


def comp(name: str) -> int:
    """Component index by blade name, e.g. comp('e01') -> 5."""
    return _COMP[name]


def _blade_product(a: tuple[int, ...], b: tuple[int, ...]):
    """Product of two basis blades: (sign, blade).  sign 0 if it vanishes."""
    factors = list(a) + list(b)
    sign = 1
    # bubble into sorted order, counting swaps
    changed = True
    while changed:
        changed = False
        for i in range(len(factors) - 1):
            if factors[i] > factors[i + 1]:
                factors[i], factors[i + 1] = factors[i + 1], factors[i]
                sign = -sign
                changed = True
    # contract equal neighbours with the metric (+1, +1, +1, 0 for e0)
    out = []
    i = 0
    while i < len(factors):
        if i + 1 < len(factors) and factors[i] == factors[i + 1]:
            if factors[i] == 0:
                return 0, ()
            i += 2
        else:
            out.append(factors[i])
            i += 1
    return sign, tuple(out)


def _build_cayley() -> np.ndarray:
    """Dense product table C with (a b)_k = sum_ij a_i C[i, j, k] b_j."""
    table = np.zeros((16, 16, 16))
    for i, bi in enumerate(BLADES):
        for j, bj in enumerate(BLADES):
            sign, blade = _blade_product(bi, bj)
            if sign != 0:
                table[i, j, BLADE_INDEX[blade]] = sign
    return table


CAYLEY = _build_cayley()

# Reversion flips sign on grades 2 and 3.
REVERSE_SIGNS = np.where(np.isin(GRADES, (2, 3)), -1.0, 1.0)


def geometric_product(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Geometric product of multivectors; broadcasts over leading axes."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    return np.einsum("...i,ijk,...j->...k", a, CAYLEY, b)


def reverse(a: np.ndarray) -> np.ndarray:
    return np.asarray(a) * REVERSE_SIGNS


def grade_project(a: np.ndarray, grade: int) -> np.ndarray:
    return np.where(GRADES == grade, np.asarray(a), 0.0)


# -- embeddings -----------------------------------------------------------------


def embed_scalar(s) -> np.ndarray:
    s = np.asarray(s, dtype=np.float64)
    out = np.zeros(s.shape + (16,))
    out[..., 0] = s
    return out


def embed_plane(normal, offset) -> np.ndarray:
    """Oriented plane {x : <normal, x> = offset}; normal is normalized here.

    A zero normal has no plane and raises ValueError("degenerate plane").
    """
    normal = np.asarray(normal, dtype=np.float64)
    offset = np.asarray(offset, dtype=np.float64)
    length = np.linalg.norm(normal, axis=-1)
    if np.any(length < 1e-12):
        raise ValueError("degenerate plane")
    normal = normal / length[..., None]
    offset = offset / length
    out = np.zeros(normal.shape[:-1] + (16,))
    out[..., 1] = offset
    out[..., 2:5] = normal
    return out


def embed_point(position) -> np.ndarray:
    """Homogeneous point in the trivector slots.

    The orientation-consistent layout is (x_012, x_013, x_023) = (z, -y, x):
    with this choice the versor sandwich moves embedded points by exactly the
    rigid motion.  (The identity layout (x, y, z) does not transform as a
    point under the Cayley table of this component ordering.)
    """
    position = np.asarray(position, dtype=np.float64)
    out = np.zeros(position.shape[:-1] + (16,))
    out[..., 11] = position[..., 2]
    out[..., 12] = -position[..., 1]
    out[..., 13] = position[..., 0]
    out[..., 14] = 1.0
    return out


def embed_translation(tau) -> np.ndarray:
    tau = np.asarray(tau, dtype=np.float64)
    out = np.zeros(tau.shape[:-1] + (16,))
    out[..., 0] = 1.0
    out[..., 5:8] = 0.5 * tau
    return out


def embed_geometry(kind: str, *payload) -> np.ndarray:
    """Dispatch on object kind: scalar | plane | point | translation."""
    if kind == "scalar":
        return embed_scalar(*payload)
    if kind == "plane":
        return embed_plane(*payload)
    if kind == "point":
        return embed_point(*payload)
    if kind == "translation":
        return embed_translation(*payload)
    raise ValueError(f"unknown geometry kind: {kind!r}")


def extract_point(mv: np.ndarray) -> np.ndarray:
    """Inverse of the point embedding (homogeneous division by x_123)."""
    mv = np.asarray(mv, dtype=np.float64)
    w = mv[..., 14]
    if np.any(np.abs(w) < 1e-12):
        raise ValueError("point at infinity")
    return np.stack(
        [mv[..., 13], -mv[..., 12], mv[..., 11]], axis=-1
    ) / w[..., None]


def extract_plane(mv: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(normal, offset) from the grade-1 part; normal returned unit length."""
    mv = np.asarray(mv, dtype=np.float64)
    normal = mv[..., 2:5]
    length = np.linalg.norm(normal, axis=-1)
    if np.any(length < 1e-12):
        raise ValueError("degenerate plane")
    return normal / length[..., None], mv[..., 1] / length


def extract_translation(mv: np.ndarray) -> np.ndarray:
    """Vector carried in the translation-bivector slot (tau = 2 x_0i)."""
    return 2.0 * np.asarray(mv, dtype=np.float64)[..., 5:8]


# -- rigid motions ---------------------------------------------------------------


@dataclass(frozen=True)
class RigidMotion:
    """Rotation (unit quaternion, scalar-first) plus translation in mm."""

    quaternion: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        q = np.asarray(self.quaternion, dtype=np.float64)
        t = np.asarray(self.translation, dtype=np.float64)
        if abs(np.linalg.norm(q) - 1.0) > 1e-9:
            raise ValueError("quaternion must have unit norm")
        object.__setattr__(self, "quaternion", q)
        object.__setattr__(self, "translation", t)

    @staticmethod
    def identity() -> "RigidMotion":
        return RigidMotion(np.array([1.0, 0, 0, 0]), np.zeros(3))

    @staticmethod
    def from_axis_angle(axis, angle: float, translation=(0.0, 0.0, 0.0)) -> "RigidMotion":
        axis = np.asarray(axis, dtype=np.float64)
        axis = axis / np.linalg.norm(axis)
        half = 0.5 * angle
        q = np.concatenate([[np.cos(half)], np.sin(half) * axis])
        return RigidMotion(q, np.asarray(translation, dtype=np.float64))

    @staticmethod
    def random(rng: np.random.Generator, max_angle: float = 2 * np.pi,
               max_translation: float = 100.0) -> "RigidMotion":
        axis = rng.normal(size=3)
        angle = rng.uniform(0.0, max_angle)
        trans = rng.uniform(-max_translation, max_translation, size=3)
        return RigidMotion.from_axis_angle(axis, angle, trans)

    def matrix(self) -> np.ndarray:
        """3x3 rotation matrix of the quaternion."""
        w, x, y, z = self.quaternion
        return np.array([
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ])

    def apply_to_points(self, points: np.ndarray) -> np.ndarray:
        return np.asarray(points) @ self.matrix().T + self.translation

    def apply_to_vectors(self, vectors: np.ndarray) -> np.ndarray:
        return np.asarray(vectors) @ self.matrix().T

    def compose(self, other: "RigidMotion") -> "RigidMotion":
        """Motion equal to applying `other` first, then self."""
        w1, v1 = self.quaternion[0], self.quaternion[1:]
        w2, v2 = other.quaternion[0], other.quaternion[1:]
        w = w1 * w2 - v1 @ v2
        v = w1 * v2 + w2 * v1 + np.cross(v1, v2)
        q = np.array([w, *v])
        q /= np.linalg.norm(q)
        return RigidMotion(q, self.apply_to_points(other.translation))

    def inverse(self) -> "RigidMotion":
        q = self.quaternion * np.array([1.0, -1, -1, -1])
        return RigidMotion(q, -(self.matrix().T @ self.translation))

    def versor(self) -> np.ndarray:
        """Even versor T R implementing x -> R x + t via the sandwich."""
        w, x, y, z = self.quaternion
        rotor = np.zeros(16)
        rotor[0] = w
        # rotor = cos(a/2) - sin(a/2) * (n1 e23 - n2 e13 + n3 e12)
        rotor[comp("e23")] = -x
        rotor[comp("e13")] = y
        rotor[comp("e12")] = -z
        translator = np.zeros(16)
        translator[0] = 1.0
        translator[5:8] = 0.5 * self.translation
        return geometric_product(translator, rotor)


def apply_motion(motion: RigidMotion, mv: np.ndarray) -> np.ndarray:
    """Versor sandwich m x ~m; broadcasts over leading axes of `mv`."""
    v = motion.versor()
    return geometric_product(geometric_product(v, mv), reverse(v))
