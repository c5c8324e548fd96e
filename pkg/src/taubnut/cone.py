"""Conic hyperkaehler data on M = H^n \\ {0} with a weighted circle action.

The circle acts by u_a -> u_a exp(i a_a t).  Its generator T(m) = A m is linear
in m, with A antisymmetric and commuting with the three complex structures.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .quaternions import I as QI
from .quaternions import complex_structures, right_matrix

DEGENERATE_TOL = 1e-14


class DegenerateActionError(ValueError):
    """Raised where the circle generator vanishes (relative to the radius)."""


@dataclass(frozen=True)
class CircleAction:
    weights: tuple

    def __init__(self, weights):
        w = tuple(int(x) for x in np.atleast_1d(weights))
        if len(w) == 0:
            raise ValueError("weights must be nonempty")
        if any(float(x) != float(y) for x, y in zip(w, np.atleast_1d(weights))):
            raise ValueError("weights must be integers")
        object.__setattr__(self, "weights", w)

    @classmethod
    def standard(cls, n: int) -> "CircleAction":
        return cls((1,) * n)

    @property
    def n(self) -> int:
        return len(self.weights)

    @property
    def dim(self) -> int:
        return 4 * self.n

    @property
    def is_free_on_sphere(self) -> bool:
        return all(w != 0 for w in self.weights)

    @cached_property
    def generator_matrix(self) -> np.ndarray:
        blocks = [a * right_matrix(QI) for a in self.weights]
        A = np.zeros((self.dim, self.dim))
        for k, b in enumerate(blocks):
            A[4 * k:4 * k + 4, 4 * k:4 * k + 4] = b
        return A

    @cached_property
    def structures(self) -> np.ndarray:
        return complex_structures(self.n)

    @cached_property
    def flow_matrix(self) -> np.ndarray:
        """Matrix of the vector field -I1 T (symmetric)."""
        return -self.structures[0] @ self.generator_matrix

    def orbit_matrix(self, t: float) -> np.ndarray:
        """exp(t A): the circle action at time t."""
        out = np.zeros((self.dim, self.dim))
        for k, a in enumerate(self.weights):
            c, s = np.cos(a * t), np.sin(a * t)
            out[4 * k:4 * k + 4, 4 * k:4 * k + 4] = c * np.eye(4) + s * right_matrix(QI)
        return out

    def check_dim(self, m) -> np.ndarray:
        m = np.asarray(m, dtype=float)
        if m.shape[-1] != self.dim:
            raise ValueError(f"expected points of length {self.dim}, got {m.shape[-1]}")
        return m


def radius(m) -> np.ndarray:
    return np.linalg.norm(np.asarray(m, dtype=float), axis=-1)


def from_complex(z, w) -> np.ndarray:
    """Assemble u_a = z_a + w_a j from complex coordinate arrays (..., n)."""
    z = np.asarray(z, dtype=complex)
    w = np.asarray(w, dtype=complex)
    out = np.stack([z.real, z.imag, w.real, w.imag], axis=-1)
    return out.reshape(out.shape[:-2] + (-1,))


def to_complex(m):
    m = np.asarray(m, dtype=float)
    u = m.reshape(m.shape[:-1] + (-1, 4))
    return u[..., 0] + 1j * u[..., 1], u[..., 2] + 1j * u[..., 3]


def circle_generator(action: CircleAction, m) -> np.ndarray:
    m = action.check_dim(m)
    return m @ action.generator_matrix.T


def moment_map(action: CircleAction, m) -> np.ndarray:
    """x_j = -1/4 d(rho^2)(I_j T) = -1/2 <m, I_j T>, shape (..., 3)."""
    m = action.check_dim(m)
    T = circle_generator(action, m)
    IT = np.einsum("jab,...b->...ja", action.structures, T)
    return -0.5 * np.einsum("...a,...ja->...j", m, IT)


def moment_map_closed_form(action: CircleAction, m) -> np.ndarray:
    """Weighted complex-coordinate formula, used as a cross-check."""
    z, w = to_complex(m)
    a = np.asarray(action.weights, dtype=float)
    x1 = 0.5 * np.sum(a * (np.abs(z) ** 2 - np.abs(w) ** 2), axis=-1)
    x23 = -1j * np.sum(a * z * w, axis=-1)
    return np.stack([x1, x23.real, x23.imag], axis=-1)


def moment_differentials(action: CircleAction, m) -> np.ndarray:
    """Gradient covectors dx_j = -I_j T, shape (..., 3, 4n)."""
    T = circle_generator(action, m)
    return -np.einsum("jab,...b->...ja", action.structures, T)


@dataclass(frozen=True)
class ConnectionData:
    V: np.ndarray
    theta: np.ndarray
    eta: np.ndarray


def connection_data(action: CircleAction, m, check: bool = True) -> ConnectionData:
    m = action.check_dim(m)
    T = circle_generator(action, m)
    t2 = np.sum(T * T, axis=-1)
    if check:
        _check_nondegenerate(t2, np.sum(m * m, axis=-1))
    V = 1.0 / t2
    return ConnectionData(V=V, theta=T, eta=V[..., None] * T)


def _check_nondegenerate(t2, r2) -> None:
    if np.any(t2 <= (DEGENERATE_TOL ** 2) * r2) or np.any(r2 == 0):
        raise DegenerateActionError("circle generator vanishes at a sample point")


def reeb_frame(m) -> np.ndarray:
    """(rho d/drho, xi_1, xi_2, xi_3) stacked along axis -2."""
    m = np.asarray(m, dtype=float)
    n = m.shape[-1] // 4
    Is = complex_structures(n)
    xi = np.einsum("jab,...b->...ja", Is, m)
    return np.concatenate([m[..., None, :], xi], axis=-2)


def orbit_frame(action: CircleAction, m) -> np.ndarray:
    """(T, I1 T, I2 T, I3 T) stacked along axis -2; spans the space L."""
    T = circle_generator(action, m)
    IT = np.einsum("jab,...b->...ja", action.structures, T)
    return np.concatenate([T[..., None, :], IT], axis=-2)


def horizontal_projector(action: CircleAction, m) -> np.ndarray:
    """Orthogonal projector onto L^perp, L = span(T, I1T, I2T, I3T).

    The four spanning vectors are mutually orthogonal with equal length |T|.
    """
    F = orbit_frame(action, m)
    t2 = np.sum(F[..., 0, :] ** 2, axis=-1)
    dim = F.shape[-1]
    P = np.eye(dim) - np.einsum("...ka,...kb->...ab", F, F) / t2[..., None, None]
    return P
