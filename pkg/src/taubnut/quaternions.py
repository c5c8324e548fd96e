"""Quaternion arithmetic and the flat quaternionic structure on H^n = R^{4n}.

Points of H^n are stored as flat real arrays of length 4n with the layout
(q0, q1, q2, q3) per quaternion u_a = q0 + q1 i + q2 j + q3 k.  All matrices
in the package use this ordering.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

UNIT_TOL = 1e-12


@dataclass(frozen=True)
class Quaternion:
    q0: float
    q1: float = 0.0
    q2: float = 0.0
    q3: float = 0.0

    def __post_init__(self):
        if not np.all(np.isfinite(self.as_array())):
            raise ValueError("quaternion components must be finite")

    @classmethod
    def from_array(cls, arr) -> "Quaternion":
        a = np.asarray(arr, dtype=float)
        return cls(float(a[0]), float(a[1]), float(a[2]), float(a[3]))

    @classmethod
    def from_imaginary(cls, v) -> "Quaternion":
        return cls(0.0, float(v[0]), float(v[1]), float(v[2]))

    def as_array(self) -> np.ndarray:
        return np.array([self.q0, self.q1, self.q2, self.q3])

    @property
    def imag(self) -> np.ndarray:
        return np.array([self.q1, self.q2, self.q3])

    def norm(self) -> float:
        return float(np.linalg.norm(self.as_array()))

    def is_unit(self, tol: float = UNIT_TOL) -> bool:
        return abs(self.norm() - 1.0) <= tol

    def conj(self) -> "Quaternion":
        return Quaternion(self.q0, -self.q1, -self.q2, -self.q3)

    def inverse(self) -> "Quaternion":
        n2 = self.norm() ** 2
        c = self.conj()
        return Quaternion(c.q0 / n2, c.q1 / n2, c.q2 / n2, c.q3 / n2)

    def __mul__(self, other):
        if isinstance(other, Quaternion):
            return quat_mul(self, other)
        s = float(other)
        return Quaternion(self.q0 * s, self.q1 * s, self.q2 * s, self.q3 * s)

    __rmul__ = __mul__

    def __add__(self, other: "Quaternion") -> "Quaternion":
        return Quaternion.from_array(self.as_array() + other.as_array())

    def __sub__(self, other: "Quaternion") -> "Quaternion":
        return Quaternion.from_array(self.as_array() - other.as_array())

    def __neg__(self) -> "Quaternion":
        return Quaternion.from_array(-self.as_array())


ONE = Quaternion(1.0)
I = Quaternion(0.0, 1.0)
J = Quaternion(0.0, 0.0, 1.0)
K = Quaternion(0.0, 0.0, 0.0, 1.0)
BASIS = (ONE, I, J, K)


def hamilton(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Hamilton product of quaternion arrays with shape (..., 4)."""
    p0, p1, p2, p3 = np.moveaxis(np.asarray(p, dtype=float), -1, 0)
    q0, q1, q2, q3 = np.moveaxis(np.asarray(q, dtype=float), -1, 0)
    return np.stack(
        [
            p0 * q0 - p1 * q1 - p2 * q2 - p3 * q3,
            p0 * q1 + p1 * q0 + p2 * q3 - p3 * q2,
            p0 * q2 - p1 * q3 + p2 * q0 + p3 * q1,
            p0 * q3 + p1 * q2 - p2 * q1 + p3 * q0,
        ],
        axis=-1,
    )


def conj_array(q: np.ndarray) -> np.ndarray:
    out = np.array(q, dtype=float, copy=True)
    out[..., 1:] *= -1.0
    return out


def quat_mul(p: Quaternion, q: Quaternion) -> Quaternion:
    return Quaternion.from_array(hamilton(p.as_array(), q.as_array()))


def _as_quat_array(q) -> np.ndarray:
    if isinstance(q, Quaternion):
        return q.as_array()
    return np.asarray(q, dtype=float)


def left_matrix(q) -> np.ndarray:
    """4x4 matrix of u -> q u."""
    q = _as_quat_array(q)
    return np.stack([hamilton(q, e) for e in np.eye(4)], axis=-1)


def right_matrix(q) -> np.ndarray:
    """4x4 matrix of u -> u q."""
    q = _as_quat_array(q)
    return np.stack([hamilton(e, q) for e in np.eye(4)], axis=-1)


def block_diag(block: np.ndarray, n: int) -> np.ndarray:
    return np.kron(np.eye(n), block)


def complex_structure(axis: int, n: int) -> np.ndarray:
    """I_axis on H^n: left multiplication by i, j or k in every slot."""
    if axis not in (1, 2, 3):
        raise ValueError(f"axis must be 1, 2 or 3, got {axis}")
    return block_diag(left_matrix(BASIS[axis]), n)


def complex_structures(n: int) -> np.ndarray:
    """Stack (I1, I2, I3) with shape (3, 4n, 4n)."""
    return np.stack([complex_structure(ax, n) for ax in (1, 2, 3)])


def _require_unit(q: Quaternion) -> None:
    if not q.is_unit():
        raise ValueError(f"expected a unit quaternion, |q| = {q.norm():.16g}")


def sp1_matrix(q: Quaternion, n: int) -> np.ndarray:
    _require_unit(q)
    return block_diag(left_matrix(q), n)


def sp1_act(q: Quaternion, m) -> np.ndarray:
    """Left multiplication of every quaternion slot of m by the unit q."""
    _require_unit(q)
    m = np.asarray(m, dtype=float)
    u = m.reshape(m.shape[:-1] + (-1, 4))
    return hamilton(q.as_array(), u).reshape(m.shape)


def right_act(m, q) -> np.ndarray:
    """Right multiplication u_a -> u_a q in every slot (no unit check)."""
    m = np.asarray(m, dtype=float)
    u = m.reshape(m.shape[:-1] + (-1, 4))
    return hamilton(u, _as_quat_array(q)).reshape(m.shape)


def covering_phi(q: Quaternion) -> np.ndarray:
    """Rotation v -> q v q^{-1} of Im H, as a 3x3 matrix in the basis (i, j, k)."""
    _require_unit(q)
    qa = q.as_array()
    cols = []
    for e in np.eye(3):
        v = np.concatenate([[0.0], e])
        cols.append(hamilton(hamilton(qa, v), conj_array(qa))[1:])
    return np.stack(cols, axis=-1)


def quaternion_from_rotation_axis(axis, angle: float) -> Quaternion:
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    s = np.sin(angle / 2.0)
    return Quaternion(np.cos(angle / 2.0), *(s * axis))


def random_unit_quaternions(rng: np.random.Generator, size: int) -> np.ndarray:
    q = rng.standard_normal((size, 4))
    return q / np.linalg.norm(q, axis=-1, keepdims=True)


def quaternionic_residual(structures) -> float:
    """Max deviation of I_a I_b from eps_abc I_c - delta_ab Id."""
    Is = np.asarray(structures)
    dim = Is.shape[-1]
    eye = np.eye(dim)
    worst = 0.0
    for a in range(3):
        for b in range(3):
            prod = Is[a] @ Is[b]
            if a == b:
                target = -np.broadcast_to(eye, prod.shape)
            else:
                c = 3 - a - b
                sign = 1.0 if (a, b) in ((0, 1), (1, 2), (2, 0)) else -1.0
                target = sign * Is[c]
            worst = max(worst, float(np.max(np.abs(prod - target))))
    return worst


def rotation_to_axis(x) -> np.ndarray:
    """Unit quaternions q (..., 4) with phi(q) e1 = x/|x| by the minimal rotation.

    The antipode x = -|x| e1 uses q = k.
    """
    x = np.asarray(x, dtype=float)
    xn = x / np.linalg.norm(x, axis=-1, keepdims=True)
    # half-angle form (1 + e1.xhat, e1 x xhat); near the antipode 1 + c is
    # evaluated as s^2 / (1 - c) to avoid cancellation
    c = xn[..., 0]
    s2 = xn[..., 1] ** 2 + xn[..., 2] ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        w = np.where(c >= 0, 1.0 + c, s2 / (1.0 - c))
    q = np.stack([w, np.zeros_like(c), -xn[..., 2], xn[..., 1]], axis=-1)
    nq = np.linalg.norm(q, axis=-1)
    antipodal = nq == 0.0
    q = np.where(antipodal[..., None], np.array([0.0, 0.0, 0.0, 1.0]), q)
    return q / np.linalg.norm(q, axis=-1, keepdims=True)


def sp1_act_array(q, m) -> np.ndarray:
    """Left multiplication by per-row unit quaternions q (..., 4)."""
    m = np.asarray(m, dtype=float)
    u = m.reshape(m.shape[:-1] + (-1, 4))
    return hamilton(np.asarray(q)[..., None, :], u).reshape(m.shape)
