"""Twist coordinates Psi(m0, x) = q_x flow(q_x^{-1} m0, tau(., |x|)).

The pullback of g_a is evaluated from a finite-difference Jacobian in the
coordinates (horizontal directions at m0, circle fiber, x1, x2, x3).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import fd
from .cone import CircleAction, connection_data, moment_map
from .deformation import deformed_metric
from .flows import (
    TIGHT_CONFIG,
    FlowConfig,
    _solve_level,
    horizontal_basis,
    level_chart,
    psi_x,
)
from .quaternions import (
    Quaternion,
    conj_array,
    covering_phi,
    rotation_to_axis,
    sp1_act_array,
)


def choose_qx(x) -> Quaternion:
    x = np.asarray(x, dtype=float)
    if np.linalg.norm(x) == 0:
        raise ValueError("choose_qx needs x != 0")
    return Quaternion.from_array(rotation_to_axis(x))


@dataclass(frozen=True)
class TwistPoint:
    m0: np.ndarray
    x: np.ndarray

    def __post_init__(self):
        m0 = np.asarray(self.m0, dtype=float)
        x = np.asarray(self.x, dtype=float)
        object.__setattr__(self, "m0", m0)
        object.__setattr__(self, "x", x)

    @property
    def q_x(self) -> Quaternion:
        return choose_qx(self.x)

    def rotation(self) -> np.ndarray:
        return covering_phi(self.q_x)


def twist_map(m0, x, action: CircleAction, cfg: FlowConfig = TIGHT_CONFIG, check: bool = True):
    """Batched Psi; rows with x = 0 are returned unchanged."""
    m0 = np.atleast_2d(np.asarray(m0, dtype=float))
    x = np.broadcast_to(np.asarray(x, dtype=float), m0.shape[:1] + (3,))
    out = np.array(m0, copy=True)
    nz = np.linalg.norm(x, axis=-1) > 0
    if np.any(nz):
        out[nz] = psi_x(m0[nz], x[nz], action, cfg, check=check)
    return out


def twist_inverse(m, action: CircleAction, cfg: FlowConfig = TIGHT_CONFIG):
    """(m0, x) with Psi(m0, x) = m, using mu and the backward flow to x1 = 0."""
    m = np.atleast_2d(np.asarray(action.check_dim(m), dtype=float))
    x = moment_map(action, m)
    q = rotation_to_axis(x)
    p = sp1_act_array(conj_array(q), m)
    _, base = _solve_level(p, 1.0, 0.0, 0.0, action, cfg)
    return sp1_act_array(q, base), x


def _coordinate_map(tp: TwistPoint, action: CircleAction, cfg: FlowConfig):
    """Map from scaled coordinates zeta to M, with the scaling used for FD."""
    m0 = tp.m0
    x = tp.x
    rho = float(np.linalg.norm(m0))
    xs = max(float(np.linalg.norm(x)), 1e-300)
    point, _ = level_chart(action, m0, x=np.zeros(3))
    k = action.dim - 4
    scale = np.concatenate([np.full(k, rho), [1.0], np.full(3, xs)])

    def F(zeta):
        z = zeta * scale
        base = point(z[:, :k])
        t = z[:, k]
        rot = _circle_rotate(action, base, t)
        return twist_map(rot, x + z[:, k + 1:], action, cfg, check=False)

    return F, scale


def _circle_rotate(action: CircleAction, m, t) -> np.ndarray:
    from .cone import from_complex, to_complex

    z, w = to_complex(m)
    wts = np.asarray(action.weights, dtype=float)
    ph = np.exp(1j * wts * np.asarray(t)[..., None])
    # u e^{i a t} = z e^{i a t} + w j e^{i a t} = z e^{i a t} + w e^{-i a t} j
    return from_complex(z * ph, w * np.conj(ph))


def twist_jacobian(tp: TwistPoint, action: CircleAction, cfg: FlowConfig = TIGHT_CONFIG,
                   rel_step: float = 1e-3):
    F, scale = _coordinate_map(tp, action, cfg)
    zero = np.zeros((1, action.dim))
    J = fd.jacobian(F, zero, h=np.array([rel_step]))[0]
    return J / scale[None, :]


def pullback_metric(tp: TwistPoint, action: CircleAction, a: float, cfg: FlowConfig = TIGHT_CONFIG,
                    rel_step: float = 1e-3) -> np.ndarray:
    """Psi^* g_a in coordinates (horizontal at m0 [4n-4], fiber [1], x [3])."""
    J = twist_jacobian(tp, action, cfg, rel_step)
    p = twist_map(tp.m0, tp.x, action, cfg)[0]
    G = deformed_metric(action, a, p)
    return J.T @ G @ J


@dataclass(frozen=True)
class ModelMetric:
    matrix: np.ndarray
    horizontal: slice
    fiber: int
    base: slice


def model_metric(tp: TwistPoint, action: CircleAction, a: float, cfg: FlowConfig = TIGHT_CONFIG,
                 jacobian=None) -> ModelMetric:
    """a^2 sum dx^2 + g_{0,0,0} + eta^2 / a^2 in the twist coordinates.

    The cone block is the identity because the horizontal basis at m0 is
    orthonormal; eta is the pulled-back connection form.
    """
    if a <= 0:
        raise ValueError("the product model needs a > 0")
    J = twist_jacobian(tp, action, cfg) if jacobian is None else jacobian
    p = twist_map(tp.m0, tp.x, action, cfg)[0]
    eta = connection_data(action, p).eta @ J
    k = action.dim - 4
    M = np.zeros((action.dim, action.dim))
    M[:k, :k] = np.eye(k)
    M[k + 1:, k + 1:] = a * a * np.eye(3)
    M += np.outer(eta, eta) / (a * a)
    return ModelMetric(matrix=M, horizontal=slice(0, k), fiber=k, base=slice(k + 1, k + 4))


def asymptotic_deviation(tp: TwistPoint, action: CircleAction, a: float,
                         cfg: FlowConfig = TIGHT_CONFIG) -> float:
    """Operator norm of M^{-1/2} (Psi^* g_a - M) M^{-1/2} for the model M."""
    J = twist_jacobian(tp, action, cfg)
    p = twist_map(tp.m0, tp.x, action, cfg)[0]
    G = J.T @ deformed_metric(action, a, p) @ J
    M = model_metric(tp, action, a, cfg, jacobian=J).matrix
    w, U = np.linalg.eigh(M)
    Mih = U @ np.diag(w ** -0.5) @ U.T
    D = Mih @ (G - M) @ Mih
    return float(np.max(np.abs(np.linalg.eigvalsh(0.5 * (D + D.T)))))


def radial_length(m0, xnorm: float, action: CircleAction, cfg: FlowConfig = TIGHT_CONFIG,
                  nodes: int = 48) -> float:
    """Length of t -> psi_x(t m0), t in (0, 1], in the quotient metric of mu^{-1}(x).

    x = (xnorm, 0, 0).  The speed is the part of the velocity orthogonal to
    T (the curve already lies in the level set).  Substituting t = s^2 keeps
    the integrand bounded near the vertex.
    """
    m0 = np.asarray(m0, dtype=float)
    s, wq = np.polynomial.legendre.leggauss(nodes)
    s = 0.5 * (s + 1.0)
    wq = 0.5 * wq
    x = np.array([xnorm, 0.0, 0.0])

    def curve(sv):
        return twist_map(np.asarray(sv)[:, :1] ** 2 * m0[None, :], x, action, cfg, check=False)

    # derivative in s by central differences on the batched curve
    h = 1e-4
    pts = np.concatenate([s - h, s + h, s - h / 2, s + h / 2])[:, None]
    c = curve(pts).reshape(4, nodes, -1)
    d1 = (c[1] - c[0]) / (2 * h)
    d2 = (c[3] - c[2]) / h
    vel = (4 * d2 - d1) / 3
    p = curve(s[:, None])
    T = p @ action.generator_matrix.T
    t2 = np.sum(T * T, axis=-1)
    vel_h = vel - (np.sum(vel * T, axis=-1) / t2)[:, None] * T
    speed = np.linalg.norm(vel_h, axis=-1)
    return float(np.sum(wq * speed))


def zero_level_points(n: int, size: int, rng: np.random.Generator, radius=1.0, weights=None) -> np.ndarray:
    """Random points of mu^{-1}(0) on H^n for positive weights (n >= 2)."""
    if n < 2:
        raise ValueError("for n = 1 the zero level is the vertex")
    from .cone import from_complex

    a = np.ones(n) if weights is None else np.asarray(weights, dtype=float)
    if np.any(a <= 0):
        raise ValueError("zero_level_points expects positive weights")
    z = rng.standard_normal((size, n)) + 1j * rng.standard_normal((size, n))
    w = rng.standard_normal((size, n)) + 1j * rng.standard_normal((size, n))
    # make sum a z w = 0 by removing the component of w along conj(a z)
    v = np.conj(a * z)
    w = w - (np.sum(np.conj(v) * w, axis=-1) / np.sum(np.abs(v) ** 2, axis=-1))[:, None] * v
    # balance sum a |z|^2 = sum a |w|^2
    w *= np.sqrt(np.sum(a * np.abs(z) ** 2, axis=-1) / np.sum(a * np.abs(w) ** 2, axis=-1))[:, None]
    m = from_complex(z, w)
    m *= (np.asarray(radius, dtype=float).reshape(-1, 1) / np.linalg.norm(m, axis=-1, keepdims=True))
    return m


__all__ = [
    "ModelMetric",
    "TwistPoint",
    "asymptotic_deviation",
    "choose_qx",
    "horizontal_basis",
    "model_metric",
    "pullback_metric",
    "radial_length",
    "twist_inverse",
    "twist_jacobian",
    "twist_map",
    "zero_level_points",
]
