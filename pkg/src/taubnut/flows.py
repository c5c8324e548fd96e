"""The complexified circle flow d/dtau m = -I1 T(m) and the maps built from it.

Contains the biholomorphism Phi_a(m) = flow(m, a^2 x1(m)) and its inverse,
level times tau(m, x1), the level maps psi_x, the quotient potential, the
classification of exceptional points, and horizontal quotient charts.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .cone import (
    CircleAction,
    circle_generator,
    horizontal_projector,
    moment_differentials,
    moment_map,
    orbit_frame,
)
from .integrator import IntegrationError, dopri5
from .quaternions import conj_array, rotation_to_axis, sp1_act_array

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class FlowConfig:
    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    max_tau: float = 40.0
    max_steps: int = 200000
    rho_ceiling: float = 1e150
    newton_iters: int = 80

    def __post_init__(self):
        for tol in (self.rel_tol, self.abs_tol):
            if not 0.0 < tol <= 1e-2:
                raise ValueError("tolerances must lie in (0, 1e-2]")
        if self.max_tau <= 0:
            raise ValueError("max_tau must be positive")


DEFAULT_CONFIG = FlowConfig()
TIGHT_CONFIG = FlowConfig(rel_tol=1e-13, abs_tol=1e-15)


@dataclass(frozen=True)
class FlowResult:
    endpoint: np.ndarray
    tau: np.ndarray
    steps: int
    err_estimate: float
    invariant_residual: np.ndarray = field(default=None)


def _rows(m) -> tuple[np.ndarray, bool]:
    m = np.asarray(m, dtype=float)
    return np.atleast_2d(m), m.ndim == 1


def flow(m, tau, action: CircleAction, cfg: FlowConfig = DEFAULT_CONFIG,
         monitor: bool = False) -> FlowResult:
    """Integrate m' = -I1 T(m) for time tau (per row, signed).

    With ``monitor`` the scalars rho^2 and x1 are integrated alongside through
    d(rho^2)/dtau = 4 x1 and dx1/dtau = |T|^2; their mismatch with the values
    read off the endpoint is returned as ``invariant_residual``.
    """
    rows, single = _rows(action.check_dim(m))
    tau = np.broadcast_to(np.asarray(tau, dtype=float), rows.shape[:1]).copy()
    B = action.flow_matrix
    A = action.generator_matrix
    d = action.dim
    if monitor:
        x0 = moment_map(action, rows)[:, 0]
        y0 = np.concatenate([rows, np.sum(rows**2, axis=-1)[:, None], x0[:, None]], axis=-1)

        def rhs(y):
            p = y[:, :d]
            T = p @ A.T
            x1 = moment_map(action, p)[:, 0]
            return np.concatenate([p @ B.T, 4.0 * x1[:, None], np.sum(T * T, axis=-1)[:, None]], axis=-1)
    else:
        y0 = rows

        def rhs(y):
            return y @ B.T

    y, stats = dopri5(rhs, y0, tau, rel_tol=cfg.rel_tol, abs_tol=cfg.abs_tol,
                      max_steps=cfg.max_steps, blowup=cfg.rho_ceiling)
    end = y[:, :d]
    inv = None
    if monitor:
        r2 = np.sum(end**2, axis=-1)
        x1 = moment_map(action, end)[:, 0]
        scale = np.maximum(r2, 1e-300)
        inv = np.maximum(np.abs(y[:, d] - r2), np.abs(y[:, d + 1] - x1)) / scale
    if single:
        end = end[0]
        tau = tau[0]
        inv = None if inv is None else inv[0]
    return FlowResult(endpoint=end, tau=tau, steps=stats.steps, err_estimate=stats.err_estimate,
                      invariant_residual=inv)


def flow_with_tangents(m, tau, vectors, action: CircleAction, cfg: FlowConfig = DEFAULT_CONFIG):
    """Flow points together with tangent vectors (variational equation).

    ``vectors`` has shape (B, k, d); returns (endpoints, pushed vectors).  The
    vector field is linear, so tangents obey the same equation as points.
    """
    rows, _ = _rows(action.check_dim(m))
    vec = np.asarray(vectors, dtype=float)
    Bn, k, d = vec.shape
    y0 = np.concatenate([rows[:, None, :], vec], axis=1).reshape(Bn, -1)
    M = action.flow_matrix

    def rhs(y):
        return (y.reshape(Bn, k + 1, d) @ M.T).reshape(Bn, -1)

    # error control on the point only would be enough; keep it on everything
    y, _ = dopri5(rhs, y0, tau, rel_tol=cfg.rel_tol, abs_tol=cfg.abs_tol,
                  max_steps=cfg.max_steps, blowup=cfg.rho_ceiling)
    y = y.reshape(Bn, k + 1, d)
    return y[:, 0, :], y[:, 1:, :]


def _solve_level(m, coef_x1: float, coef_tau: float, target, action: CircleAction,
                 cfg: FlowConfig, tau0=None):
    """Find tau with coef_x1 * x1(flow(m, tau)) + coef_tau * tau = target.

    The left side is strictly increasing in tau (derivative
    coef_x1 |T|^2 + coef_tau > 0).  Safeguarded Newton with a bisection
    fallback once a bracket is known.
    """
    rows, single = _rows(m)
    nb = rows.shape[0]
    target = np.broadcast_to(np.asarray(target, dtype=float), (nb,))
    tau = np.zeros(nb) if tau0 is None else np.array(np.broadcast_to(tau0, (nb,)), dtype=float)
    lo = np.full(nb, -np.inf)
    hi = np.full(nb, np.inf)
    r2 = np.sum(rows**2, axis=-1)
    T2max = max(abs(w) for w in action.weights) ** 2
    step_cap = 2.0 / max(1.0, np.sqrt(T2max))
    p = rows
    done = np.zeros(nb, dtype=bool)
    for _ in range(cfg.newton_iters):
        p = flow(rows, tau, action, cfg).endpoint
        x1 = moment_map(action, p)[:, 0]
        T = circle_generator(action, p)
        F = coef_x1 * x1 + coef_tau * tau - target
        dF = coef_x1 * np.sum(T * T, axis=-1) + coef_tau
        lo = np.where(F < 0, np.maximum(lo, tau), lo)
        hi = np.where(F > 0, np.minimum(hi, tau), hi)
        step = -F / dF
        step = np.clip(step, -step_cap, step_cap)
        cand = tau + step
        bracketed = np.isfinite(lo) & np.isfinite(hi)
        outside = bracketed & ((cand <= lo) | (cand >= hi))
        cand = np.where(outside, 0.5 * (lo + hi), cand)
        r2p = np.sum(p * p, axis=-1)
        noise = 4.0 * cfg.rel_tol * abs(coef_x1) * T2max * r2p / dF
        tol = noise + 1e-15 * np.maximum(1.0, np.abs(tau))
        small = np.abs(cand - tau) <= tol
        tau = np.where(done, tau, cand)
        done = done | small | (F == 0)
        if np.all(done):
            break
    else:
        resid = np.max(np.abs(F) / np.maximum(1.0, np.abs(coef_x1) * r2))
        if resid > 1e-6:
            raise IntegrationError(f"level root-finding did not converge (residual {resid:.3g})")
    p = flow(rows, tau, action, cfg).endpoint
    if single:
        return tau[0], p[0]
    return tau, p


def phi_a(m, action: CircleAction, a: float, cfg: FlowConfig = DEFAULT_CONFIG) -> np.ndarray:
    """Phi_a(m) = flow of m for time a^2 x1(m)."""
    m = action.check_dim(m)
    x1 = moment_map(action, m)[..., 0]
    return flow(m, a * a * x1, action, cfg).endpoint


def phi_a_inverse(m, action: CircleAction, a: float, cfg: FlowConfig = DEFAULT_CONFIG,
                  return_tau: bool = False):
    """Solve a^2 x1(flow(m, tau)) + tau = 0, then flow."""
    m = action.check_dim(m)
    if a == 0:
        out = np.array(m, dtype=float, copy=True)
        return (out, np.zeros(out.shape[:-1])) if return_tau else out
    tau, p = _solve_level(m, a * a, 1.0, 0.0, action, cfg)
    return (p, tau) if return_tau else p


def phi_a_inverse_jacobian(m, action: CircleAction, a: float, cfg: FlowConfig = DEFAULT_CONFIG):
    """Phi_a^{-1}(m) and its Jacobian via tangent propagation.

    With p = flow(m, tau_m) and F = D flow, implicit differentiation of
    a^2 x1(p) + tau = 0 gives d tau = -a^2 dx1(p) F dm / (1 + a^2 |T(p)|^2).
    """
    rows, single = _rows(action.check_dim(m))
    d = action.dim
    p, tau = phi_a_inverse(rows, action, a, cfg, return_tau=True)
    eye = np.broadcast_to(np.eye(d), (rows.shape[0], d, d))
    _, cols = flow_with_tangents(rows, tau, eye, action, cfg)
    Fm = np.swapaxes(cols, -1, -2)  # Fm[:, :, l] = pushed e_l
    dx1 = moment_differentials(action, p)[:, 0, :]
    T = circle_generator(action, p)
    denom = 1.0 + a * a * np.sum(T * T, axis=-1)
    dtau = -(a * a) * np.einsum("ba,bal->bl", dx1, Fm) / denom[:, None]
    vfield = p @ action.flow_matrix.T
    J = Fm + vfield[:, :, None] * dtau[:, None, :]
    if single:
        return p[0], J[0]
    return p, J


def tau_to_level(m0, x1_target, action: CircleAction, cfg: FlowConfig = DEFAULT_CONFIG,
                 check: bool = True):
    """Time tau with x1(flow(m0, tau)) = x1_target (signed targets allowed)."""
    m0 = action.check_dim(m0)
    if check:
        _check_zero_level(action, m0)
    tau, _ = _solve_level(m0, 1.0, 0.0, x1_target, action, cfg)
    return tau


def _check_zero_level(action, m0, tol=1e-10):
    mu = moment_map(action, m0)
    r2 = np.sum(np.asarray(m0) ** 2, axis=-1)
    if np.any(np.linalg.norm(mu, axis=-1) > tol * np.maximum(r2, 1.0)):
        raise ValueError("base point is not on the zero level of the moment map")


def psi_x(m0, x, action: CircleAction, cfg: FlowConfig = DEFAULT_CONFIG, check: bool = True,
          return_tau: bool = False):
    """psi_x(m0) = q_x flow(q_x^{-1} m0, tau(q_x^{-1} m0, |x|)), a point of mu^{-1}(x)."""
    m0 = action.check_dim(m0)
    rows, single = _rows(m0)
    if check:
        _check_zero_level(action, rows)
    x = np.broadcast_to(np.asarray(x, dtype=float), rows.shape[:1] + (3,))
    r = np.linalg.norm(x, axis=-1)
    if np.any(r == 0):
        raise ValueError("psi_x needs x != 0")
    q = rotation_to_axis(x)
    base = sp1_act_array(conj_array(q), rows)
    tau, p = _solve_level(base, 1.0, 0.0, r, action, cfg)
    out = sp1_act_array(q, p)
    if single:
        out, tau = out[0], tau[0]
    return (out, tau) if return_tau else out


def f_potential(m0, x, action: CircleAction, cfg: FlowConfig = DEFAULT_CONFIG, check: bool = True):
    """1/2 rho^2(psi_x(m0)) - 2 |x| tau(m0, |x|)."""
    p, tau = psi_x(m0, x, action, cfg, check=check, return_tau=True)
    r = np.linalg.norm(np.asarray(x, dtype=float), axis=-1)
    return 0.5 * np.sum(np.asarray(p) ** 2, axis=-1) - 2.0 * r * tau


@dataclass(frozen=True)
class ExpansionFit:
    k: np.ndarray
    residual: float
    condition: float
    radius: float


def fit_expansion(m0, action: CircleAction, cfg: FlowConfig = DEFAULT_CONFIG, x1_samples=None,
                  degree: int = 4, radius: float = 0.05) -> ExpansionFit:
    """Least-squares fit f(m0, x1)/rho^2 = sum_k k_v s^v with s = x1/rho^2(m0).

    Samples are taken on both sides of zero within |s| <= radius.
    """
    m0 = np.asarray(action.check_dim(m0), dtype=float)
    r2 = float(np.sum(m0**2))
    if x1_samples is None:
        s = np.linspace(-radius, radius, 41)
        s = s[s != 0]
    else:
        s = np.asarray(x1_samples, dtype=float) / r2
    if np.max(np.abs(s)) > radius + 1e-12:
        raise ValueError("samples exceed the declared fitting radius")
    _check_zero_level(action, m0)
    pts = np.broadcast_to(m0, (s.size, m0.size))
    tau, p = _solve_level(pts, 1.0, 0.0, s * r2, action, cfg)
    f = 0.5 * np.sum(p**2, axis=-1) - 2.0 * (s * r2) * tau
    X = np.vander(s, degree + 1, increasing=True)
    coef, *_ = np.linalg.lstsq(X, f / r2, rcond=None)
    res = float(np.max(np.abs(X @ coef - f / r2)))
    cond = float(np.linalg.cond(X))
    if cond > 1e12:
        logger.warning("ill-conditioned expansion fit (cond %.3g)", cond)
    return ExpansionFit(k=coef, residual=res, condition=cond, radius=radius)


def classify_ed(m, x, action: CircleAction, cfg: FlowConfig = DEFAULT_CONFIG, chunk: float = 0.5):
    """Backward-flow test for the exceptional set of the level mu^{-1}(x).

    Returns True when rho drops below 1e-4 sqrt|x| with x1 still positive,
    False when x1 crosses zero first, and None (inconclusive) if neither
    happens within cfg.max_tau.
    """
    rows, single = _rows(action.check_dim(m))
    x = np.broadcast_to(np.asarray(x, dtype=float), rows.shape[:1] + (3,))
    r = np.linalg.norm(x, axis=-1)
    eps = 1e-4 * np.sqrt(r)
    q = rotation_to_axis(x)
    p = sp1_act_array(conj_array(q), rows)
    verdict = np.full(rows.shape[0], None, dtype=object)
    active = np.ones(rows.shape[0], dtype=bool)
    elapsed = 0.0
    while elapsed < cfg.max_tau and np.any(active):
        dt = min(chunk, cfg.max_tau - elapsed)
        idx = np.flatnonzero(active)
        p[idx] = flow(p[idx], -dt, action, cfg).endpoint
        elapsed += dt
        rho = np.linalg.norm(p[idx], axis=-1)
        x1 = moment_map(action, p[idx])[:, 0]
        crossed = x1 <= 0
        shrunk = (rho < eps[idx]) & ~crossed
        verdict[idx[crossed]] = False
        verdict[idx[shrunk]] = True
        active[idx[crossed | shrunk]] = False
    if np.any(active):
        logger.info("classify_ed inconclusive for %d points", int(np.sum(active)))
    out = [None if v is None else bool(v) for v in verdict]
    return out[0] if single else out


@dataclass(frozen=True)
class QuotientMetric:
    form: np.ndarray        # g0 restricted to the horizontal space (ambient matrix)
    projector: np.ndarray
    basis: np.ndarray       # (d, 4n-4) orthonormal basis of the horizontal space


def horizontal_basis(action: CircleAction, m) -> np.ndarray:
    """Orthonormal basis (columns) of span(T, I1T, I2T, I3T)^perp at m."""
    P = horizontal_projector(action, m)
    w, U = np.linalg.eigh(P)
    return U[..., :, w.shape[-1] - (action.dim - 4):]


def quotient_metric(x, m, action: CircleAction, tol: float = 1e-8) -> QuotientMetric:
    m = action.check_dim(m)
    mu = moment_map(action, m)
    r2 = float(np.sum(np.asarray(m) ** 2))
    if np.max(np.abs(mu - np.asarray(x))) > tol * max(1.0, r2):
        raise ValueError("point is not on the requested level")
    P = horizontal_projector(action, m)
    E = horizontal_basis(action, m)
    return QuotientMetric(form=P.T @ P, projector=P, basis=E)


def level_chart(action: CircleAction, m, x=None, newton_iters: int = 30):
    """Chart y -> metric matrix of the quotient mu^{-1}(x)/S^1 near [m].

    Points are p(y) = m + E y + N c(y), with E a horizontal basis at m,
    N = (I1T, I2T, I3T)(m) and c(y) fixed by mu(p(y)) = x.  The chart metric
    is g0 of the horizontal parts of the coordinate tangents, which the
    implicit-function theorem gives without nested differencing.
    """
    m = np.asarray(action.check_dim(m), dtype=float)
    x = moment_map(action, m) if x is None else np.asarray(x, dtype=float)
    E = horizontal_basis(action, m)
    N = orbit_frame(action, m)[1:].T  # (d, 3)

    def point(y):
        y = np.atleast_2d(y)
        c = np.zeros((y.shape[0], 3))
        base = m + y @ E.T
        for _ in range(newton_iters):
            p = base + c @ N.T
            F = moment_map(action, p) - x
            Dmu = moment_differentials(action, p) @ N  # (B, 3, 3)
            dc = np.linalg.solve(Dmu, -F[..., None])[..., 0]
            c = c + dc
            if np.max(np.abs(dc)) < 1e-16 * max(1.0, float(np.max(np.abs(c)))):
                break
        return base + c @ N.T

    def metric(y):
        p = point(y)
        Dmu = moment_differentials(action, p)  # (B, 3, d)
        A = Dmu @ N
        rhs = Dmu @ E  # (B, 3, k)
        dc = -np.linalg.solve(A, rhs)
        tang = E[None] + N[None] @ dc  # (B, d, k)
        P = horizontal_projector(action, p)
        H = P @ tang
        return np.swapaxes(H, -1, -2) @ H

    return point, metric
