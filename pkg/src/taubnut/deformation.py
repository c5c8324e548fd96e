"""The a-deformed hyperkaehler structure (g_a, I_i^a, omega_i^a) on the cone.

Matrix conventions: a 2-form w is stored as W with w(X, Y) = X^T W Y, and a
metric likewise.  The Kaehler relation w_i(X, Y) = g(I_i X, Y) reads
W_i = I_i^T G.  Covectors are stored as plain vectors, alpha(X) = alpha . X.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import fd
from .cone import (
    CircleAction,
    circle_generator,
    connection_data,
    horizontal_projector,
    moment_differentials,
    moment_map,
)

CYCLIC = ((0, 1, 2), (1, 2, 0), (2, 0, 1))


@dataclass(frozen=True)
class StructureAtPoint:
    g: np.ndarray        # (..., d, d)
    I: np.ndarray        # (..., 3, d, d)
    omega: np.ndarray    # (..., 3, d, d)
    a: float
    base: np.ndarray     # (..., d)


def wedge(alpha, beta) -> np.ndarray:
    """Matrix of alpha ^ beta: (alpha^beta)(X, Y) = alpha(X)beta(Y) - alpha(Y)beta(X)."""
    return np.einsum("...a,...b->...ab", alpha, beta) - np.einsum("...a,...b->...ab", beta, alpha)


def outer(u, v) -> np.ndarray:
    return np.einsum("...a,...b->...ab", u, v)


def undeformed_structure(action: CircleAction, m) -> StructureAtPoint:
    m = action.check_dim(m)
    shape = m.shape[:-1]
    d = action.dim
    g = np.broadcast_to(np.eye(d), shape + (d, d)).copy()
    I = np.broadcast_to(action.structures, shape + (3, d, d)).copy()
    omega = np.swapaxes(I, -1, -2).copy()
    return StructureAtPoint(g=g, I=I, omega=omega, a=0.0, base=m)


def deformed_metric(action: CircleAction, a: float, m) -> np.ndarray:
    """g_a = g0 + a^2 sum dx_i^2 + (1/(V + a^2) - 1/V) eta^2.

    Equivalent to gbar + (V + a^2) sum dx_i^2 + eta^2/(V + a^2) because
    g0 = gbar + V sum dx_i^2 + eta^2/V.
    """
    m = action.check_dim(m)
    cd = connection_data(action, m)
    dx = moment_differentials(action, m)
    V = cd.V[..., None, None]
    a2 = a * a
    g = np.eye(action.dim) + a2 * np.einsum("...ia,...ib->...ab", dx, dx)
    g = g + (1.0 / (V + a2) - 1.0 / V) * outer(cd.eta, cd.eta)
    return g


def deformed_structure(action: CircleAction, a: float, m) -> StructureAtPoint:
    if a < 0:
        raise ValueError("deformation parameter must be nonnegative")
    m = action.check_dim(m)
    cd = connection_data(action, m)
    T = cd.theta
    dx = moment_differentials(action, m)
    Is = action.structures
    ITs = np.einsum("jab,...b->...ja", Is, T)
    V = cd.V[..., None, None]
    a2 = a * a
    g = deformed_metric(action, a, m)
    Ia = []
    omega = []
    for i, j, k in CYCLIC:
        Ii = Is[i] - (a2 * V / (a2 + V)) * outer(ITs[..., i, :], T) + a2 * outer(T, dx[..., i, :])
        Ia.append(Ii)
        omega.append(Is[i].T + a2 * wedge(dx[..., j, :], dx[..., k, :]))
    Ia = np.stack(Ia, axis=-3)
    omega = np.stack(omega, axis=-3)
    return StructureAtPoint(g=g, I=Ia, omega=omega, a=float(a), base=m)


def compatibility_residual(S: StructureAtPoint) -> float:
    """max |omega_i - I_i^T g| over the three structures."""
    lhs = S.omega
    rhs = np.swapaxes(S.I, -1, -2) @ S.g[..., None, :, :]
    return float(np.max(np.abs(lhs - rhs)))


def metric_compatibility_residual(S: StructureAtPoint) -> float:
    """max |I^T g I - g|: each I_i^a is g_a-orthogonal."""
    G = S.g[..., None, :, :]
    return float(np.max(np.abs(np.swapaxes(S.I, -1, -2) @ G @ S.I - G)))


def potential_K1a(action: CircleAction, a: float, m) -> np.ndarray:
    m = action.check_dim(m)
    x = moment_map(action, m)
    a2 = a * a
    return 0.5 * np.sum(m * m, axis=-1) + a2 * x[..., 0] ** 2 + 0.5 * a2 * (x[..., 1] ** 2 + x[..., 2] ** 2)


def grad_K1a(action: CircleAction, a: float, m) -> np.ndarray:
    x = moment_map(action, m)
    dx = moment_differentials(action, m)
    a2 = a * a
    return (
        m
        + 2.0 * a2 * x[..., 0:1] * dx[..., 0, :]
        + a2 * (x[..., 1:2] * dx[..., 1, :] + x[..., 2:3] * dx[..., 2, :])
    )


def dc(I, grad) -> np.ndarray:
    """d^c_I f as a covector: (d^c f)(X) = -df(I X)."""
    return -np.einsum("...ba,...b->...a", I, grad)


def dc_K1a(action: CircleAction, a: float, m) -> np.ndarray:
    S = deformed_structure(action, a, m)
    return dc(S.I[..., 0, :, :], grad_K1a(action, a, m))


def dc_K1a_formula(action: CircleAction, a: float, m) -> np.ndarray:
    """d^c_{I1} K_1 + a^2 (x2 dx3 - x3 dx2)."""
    x = moment_map(action, m)
    dx = moment_differentials(action, m)
    flat = dc(action.structures[0], np.asarray(m, dtype=float))
    return flat + a * a * (x[..., 1:2] * dx[..., 2, :] - x[..., 2:3] * dx[..., 1, :])


def deformed_one_form(alpha, j: int, action: CircleAction, a: float, m, tol: float = 1e-10):
    """Psi_j = alpha - i a^2 alpha(T) dx_j for an I_j-(1,0) covector alpha.

    ``j`` is 1, 2 or 3.
    """
    m = action.check_dim(m)
    alpha = np.asarray(alpha, dtype=complex)
    Ij = action.structures[j - 1]
    typing = np.einsum("ba,...b->...a", Ij, alpha) - 1j * alpha
    if np.max(np.abs(typing)) > tol * max(1.0, float(np.max(np.abs(alpha)))):
        raise ValueError("alpha is not of type (1,0) for the requested structure")
    T = circle_generator(action, m)
    dx = moment_differentials(action, m)[..., j - 1, :]
    alphaT = np.sum(alpha * T, axis=-1)
    return alpha - 1j * a * a * alphaT[..., None] * dx


def one_form_typing_residual(psi, I) -> float:
    """max |psi o I - i psi|."""
    return float(np.max(np.abs(np.einsum("...ba,...b->...a", I, psi) - 1j * psi)))


def decomposition_check(action: CircleAction, a: float, m) -> dict:
    """Rebuild g and omega_i from projected pieces and report residuals.

    For a > 0 the deformed tensors are rebuilt with the deformed
    coefficients; for a = 0 this is the split of the flat structure.
    """
    m = action.check_dim(m)
    cd = connection_data(action, m)
    dx = moment_differentials(action, m)
    P = horizontal_projector(action, m)
    S0 = undeformed_structure(action, m)
    Sa = deformed_structure(action, a, m)
    V = cd.V[..., None, None]
    a2 = a * a
    gbar = np.swapaxes(P, -1, -2) @ P
    dxsq = np.einsum("...ia,...ib->...ab", dx, dx)
    eta2 = outer(cd.eta, cd.eta)
    g_rebuilt = gbar + (V + a2) * dxsq + eta2 / (V + a2)
    res = {"metric": float(np.max(np.abs(g_rebuilt - Sa.g)))}
    worst = 0.0
    for i, j, k in CYCLIC:
        wbar = np.swapaxes(P, -1, -2) @ S0.omega[..., i, :, :] @ P
        w = wbar + wedge(dx[..., i, :], cd.eta) + (V + a2) * wedge(dx[..., j, :], dx[..., k, :])
        worst = max(worst, float(np.max(np.abs(w - Sa.omega[..., i, :, :]))))
    res["omega"] = worst
    res["projector_idempotence"] = float(np.max(np.abs(P @ P - P)))
    return res


def dkdck_constant(action: CircleAction, a: float, m) -> np.ndarray:
    """Smallest C with dK(X)^2 + d^cK(X)^2 <= C K g_a(X, X), per point."""
    m = np.atleast_2d(action.check_dim(m))
    S = deformed_structure(action, a, m)
    g = grad_K1a(action, a, m)
    c = dc(S.I[..., 0, :, :], g)
    K = potential_K1a(action, a, m)
    L = np.linalg.cholesky(S.g)
    # quadratic form Q = g g^T + c c^T against K g_a: top generalized eigenvalue
    u = np.linalg.solve(L, g[..., None])[..., 0]
    v = np.linalg.solve(L, c[..., None])[..., 0]
    Q = outer(u, u) + outer(v, v)
    return np.linalg.eigvalsh(Q)[..., -1] / K


def dkdck_bound(action: CircleAction, a: float, samples) -> float:
    samples = np.atleast_2d(samples)
    if samples.shape[0] == 0:
        raise ValueError("empty sample set")
    C = float(np.max(dkdck_constant(action, a, samples)))
    if not np.isfinite(C):
        raise ArithmeticError("non-finite dK^dcK constant")
    return C


def hermitian_part(W, I) -> np.ndarray:
    """Symmetric matrix of X -> W(X, I X)."""
    M = W @ I
    return 0.5 * (M + np.swapaxes(M, -1, -2))


def power_potential_form(action: CircleAction, a: float, alpha: float, m) -> np.ndarray:
    """1/2 dd^c_{I1^a} (K_1^a)^alpha via finite differences of the d^c covector."""
    m = np.atleast_2d(action.check_dim(m))

    def beta(p):
        S = deformed_structure(action, a, p)
        K = potential_K1a(action, a, p)
        gk = alpha * K[..., None] ** (alpha - 1.0) * grad_K1a(action, a, p)
        return dc(S.I[..., 0, :, :], gk)

    return 0.5 * fd.exterior_derivative_1form(beta, m, h=fd.default_step(m, 1e-3))


def alpha_positivity(action: CircleAction, a: float, alpha: float, samples) -> float:
    """Min over samples of the smallest g_a-relative eigenvalue of dd^c K^alpha (., I1^a .)."""
    if not 0.0 < alpha <= 1.0:
        raise ValueError("alpha must lie in (0, 1]")
    samples = np.atleast_2d(samples)
    W = power_potential_form(action, a, alpha, samples)
    S = deformed_structure(action, a, samples)
    H = hermitian_part(W, S.I[..., 0, :, :])
    L = np.linalg.cholesky(S.g)
    Li = np.linalg.inv(L)
    Hn = Li @ H @ np.swapaxes(Li, -1, -2)
    # normalize by K^(alpha-1) so the scale of K does not swamp the sign test
    K = potential_K1a(action, a, samples)
    ev = np.linalg.eigvalsh(Hn)[..., 0] / (alpha * K ** (alpha - 1.0))
    return float(np.min(ev))


def alpha_threshold(action: CircleAction, a: float, samples, alphas=None) -> float:
    """Smallest tested alpha for which all samples stay positive (scan downward)."""
    if alphas is None:
        alphas = np.round(np.arange(1.0, 0.0, -0.05), 10)
    best = None
    for al in sorted(alphas, reverse=True):
        if alpha_positivity(action, a, float(al), samples) > 0:
            best = float(al)
        else:
            break
    return best
