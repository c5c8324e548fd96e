"""Residual checks for the deformed structure and the maps built from the flow.

Every function returns a non-negative residual (relative where stated) or a
fitted constant, so suites and tests can compare against tolerances.
"""
from __future__ import annotations

import numpy as np

from . import fd
from .cone import CircleAction, circle_generator, connection_data, moment_differentials, moment_map
from .deformation import (
    compatibility_residual,
    deformed_one_form,
    deformed_structure,
    dkdck_constant,
    metric_compatibility_residual,
    one_form_typing_residual,
    power_potential_form,
    undeformed_structure,
)
from .flows import (
    DEFAULT_CONFIG,
    FlowConfig,
    phi_a,
    phi_a_inverse,
    phi_a_inverse_jacobian,
    psi_x,
)
from .probes import distance_upper
from .quaternions import (
    Quaternion,
    covering_phi,
    quaternionic_residual,
    random_unit_quaternions,
    sp1_act_array,
)
from .twist import zero_level_points


def random_points(action: CircleAction, size: int, rng: np.random.Generator,
                  rho_range=(0.5, 2.0)) -> np.ndarray:
    """Isotropic directions with radius log-uniform in rho_range."""
    m = rng.standard_normal((size, action.dim))
    m /= np.linalg.norm(m, axis=-1, keepdims=True)
    lo, hi = np.log(rho_range[0]), np.log(rho_range[1])
    return m * np.exp(rng.uniform(lo, hi, size))[:, None]


def _rel(err, ref) -> float:
    return float(np.max(np.abs(err)) / max(1.0, float(np.max(np.abs(ref)))))


# ---------------------------------------------------------------------------
# pointwise algebra

def algebraic_residuals(action: CircleAction, a: float, m, rng: np.random.Generator) -> dict:
    """Quaternion relations, omega = g(I., .), I orthogonal, eta(T) = 1, mu equivariance."""
    S = deformed_structure(action, a, m)
    quat = max(quaternionic_residual(S.I[k]) for k in range(S.I.shape[0]))
    cd = connection_data(action, m)
    T = circle_generator(action, m)
    eta_T = np.abs(np.sum(cd.eta * T, axis=-1) - 1.0)
    q = random_unit_quaternions(rng, m.shape[0])
    lhs = moment_map(action, sp1_act_array(q, m))
    R = np.stack([covering_phi(Quaternion.from_array(row)) for row in q])
    rhs = np.einsum("zij,zj->zi", R, moment_map(action, m))
    return {
        "quaternion_relations": quat,
        "compatibility": compatibility_residual(S) / max(1.0, float(np.max(np.abs(S.g)))),
        "orthogonality": metric_compatibility_residual(S) / max(1.0, float(np.max(np.abs(S.g)))),
        "eta_of_T": float(np.max(eta_T)),
        "mu_equivariance": _rel(lhs - rhs, rhs),
    }


# ---------------------------------------------------------------------------
# differential identities

def closedness_residuals(action: CircleAction, a: float, m, h: float = 1e-3) -> float:
    """max over i of |d omega_i^a| relative to |omega_i^a|."""
    m = np.atleast_2d(m)
    worst = 0.0
    for i in range(3):
        def field(p, i=i):
            return deformed_structure(action, a, p).omega[..., i, :, :]

        d = fd.exterior_derivative_2form(field, m, h=np.full(m.shape[0], h))
        worst = max(worst, _rel(d, field(m)))
    return worst


def moment_residual(action: CircleAction, a: float, m) -> float:
    """dx_i + iota_T omega_i^a, with (iota_T W)_b = T_a W_ab."""
    S = deformed_structure(action, a, m)
    T = circle_generator(action, m)
    iota = np.einsum("za,zjab->zjb", T, S.omega)
    dx = moment_differentials(action, m)
    return _rel(dx + iota, dx)


def potential_residual(action: CircleAction, a: float, m) -> float:
    """1/2 dd^c K_1^a - omega_1^a, relative."""
    W = power_potential_form(action, a, 1.0, m)
    S = deformed_structure(action, a, m)
    return _rel(W - S.omega[..., 0, :, :], S.omega[..., 0, :, :])


def one_form_typing(action: CircleAction, a: float, m, rng: np.random.Generator) -> float:
    """Deformed flat (1,0) covectors are (1,0) for I_j^a, j = 1, 2, 3."""
    m = np.atleast_2d(m)
    S = deformed_structure(action, a, m)
    worst = 0.0
    for j in range(3):
        Ij = action.structures[j]
        beta = rng.standard_normal(m.shape)
        alpha = beta - 1j * np.einsum("ba,zb->za", Ij, beta)
        psi = deformed_one_form(alpha, j + 1, action, a, m)
        scale = max(1.0, float(np.max(np.abs(psi))))
        worst = max(worst, one_form_typing_residual(psi, S.I[:, j]) / scale)
    return worst


# ---------------------------------------------------------------------------
# the biholomorphism Phi_a

def phi_a_residuals(action: CircleAction, a: float, m, cfg: FlowConfig = DEFAULT_CONFIG) -> dict:
    """Holomorphicity and symplectic pullback residuals at p = Phi_a^{-1}(m).

    With J = d(Phi_a^{-1}) at m: J I_1 = I_1^a(p) J and J^T omega_j^a(p) J = omega_j
    for j = 2, 3; also the round trip Phi_a^{-1}(Phi_a(m)) = m.
    """
    m = np.atleast_2d(m)
    p, J = phi_a_inverse_jacobian(m, action, a, cfg)
    S = deformed_structure(action, a, p)
    I1 = action.structures[0]
    hol = _rel(J @ I1 - S.I[:, 0] @ J, J)
    S0 = undeformed_structure(action, m)
    sym = 0.0
    for j in (1, 2):
        pull = np.swapaxes(J, -1, -2) @ S.omega[:, j] @ J
        sym = max(sym, _rel(pull - S0.omega[..., j, :, :], S0.omega[..., j, :, :]))
    back = phi_a_inverse(phi_a(m, action, a, cfg), action, a, cfg)
    rt = float(np.max(np.linalg.norm(back - m, axis=-1) / np.linalg.norm(m, axis=-1)))
    return {"holomorphic": hol, "symplectic_23": sym, "round_trip": rt}


def phi_a_jacobian_fd_residual(action: CircleAction, a: float, m, h: float = 1e-4,
                               cfg: FlowConfig = DEFAULT_CONFIG) -> float:
    """Tangent-propagated Jacobian of Phi_a^{-1} against central differences."""
    m = np.atleast_2d(m)
    _, J = phi_a_inverse_jacobian(m, action, a, cfg)

    def inv(x):
        return phi_a_inverse(x, action, a, cfg)

    Jfd = fd.jacobian(inv, m, h=np.full(m.shape[0], h))
    return _rel(J - Jfd, J)


# ---------------------------------------------------------------------------
# estimates with fitted constants

def level_samples(action: CircleAction, size: int, rng: np.random.Generator, rho_range,
                  s_max: float = 1.0):
    """Zero-level points, radius log-uniform in rho_range, with targets x1 = s rho^2, s in (0, s_max]."""
    lo, hi = np.log(rho_range[0]), np.log(rho_range[1])
    rho = np.exp(rng.uniform(lo, hi, size))
    m0 = zero_level_points(action.n, size, rng, radius=rho, weights=action.weights)
    s = rng.uniform(1e-3, s_max, size)
    return m0, s * rho * rho


def tau_constant(action: CircleAction, m0, x1, cfg: FlowConfig = DEFAULT_CONFIG) -> float:
    """max tau rho^2 / x1 over the samples."""
    x = np.zeros((m0.shape[0], 3))
    x[:, 0] = x1
    _, tau = psi_x(m0, x, action, cfg, return_tau=True)
    r2 = np.sum(m0 * m0, axis=-1)
    return float(np.max(tau * r2 / x1))


def rho_increase_constant(action: CircleAction, m0, x1, cfg: FlowConfig = DEFAULT_CONFIG) -> float:
    """max (rho^2(psi_x m0) - rho^2(m0)) rho^2(m0) / x1^2."""
    x = np.zeros((m0.shape[0], 3))
    x[:, 0] = x1
    p = psi_x(m0, x, action, cfg)
    r2 = np.sum(m0 * m0, axis=-1)
    return float(np.max((np.sum(p * p, axis=-1) - r2) * r2 / x1**2))


def distance_constant(action: CircleAction, a: float, m) -> float:
    """max rho_hat_a(m) / rho(m)^2."""
    r2 = np.sum(m * m, axis=-1)
    return float(np.max(distance_upper(m, action, a) / r2))


def moment_slack(action: CircleAction, m) -> float:
    """min over i of (rho^2 |T|^2 - 4 x_i^2) / (rho^2 |T|^2)."""
    T = circle_generator(action, m)
    rt = np.sum(m * m, axis=-1) * np.sum(T * T, axis=-1)
    x = moment_map(action, m)
    return float(np.min((rt[:, None] - 4.0 * x * x) / rt[:, None]))


def dkdck_fitted(action: CircleAction, a: float, m) -> float:
    return float(np.max(dkdck_constant(action, a, m)))


__all__ = [
    "algebraic_residuals",
    "closedness_residuals",
    "distance_constant",
    "dkdck_fitted",
    "level_samples",
    "moment_residual",
    "moment_slack",
    "one_form_typing",
    "phi_a_jacobian_fd_residual",
    "phi_a_residuals",
    "potential_residual",
    "random_points",
    "rho_increase_constant",
    "tau_constant",
]
