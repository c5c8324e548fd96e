"""Central finite differences with one Richardson extrapolation step.

Every helper takes a batched field ``f(points) -> values`` where points has
shape (B, d).  Derivative columns for all directions are evaluated in a single
call so that batched integrators see one consistent step sequence.
"""
from __future__ import annotations

import numpy as np

REL_STEP = 1e-4


def default_step(x, rel: float = REL_STEP) -> np.ndarray:
    """h = rel * max(1, rho) per point."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    return rel * np.maximum(1.0, np.linalg.norm(x, axis=-1))


def directional_derivatives(f, x, directions, h=None, richardson: bool = True):
    """Derivatives of f at x along each direction.

    Parameters
    ----------
    f : callable
        Batched field, (B, d) -> (B, ...).
    x : array, shape (B, d)
    directions : array, shape (k, d) or (B, k, d)
    h : array-like, optional
        Step per point; defaults to ``default_step(x)``.

    Returns
    -------
    array, shape (B, k, ...)
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    B, d = x.shape
    D = np.asarray(directions, dtype=float)
    if D.ndim == 2:
        D = np.broadcast_to(D, (B,) + D.shape)
    k = D.shape[1]
    h = default_step(x) if h is None else np.broadcast_to(np.asarray(h, dtype=float), (B,))
    scales = (1.0, 0.5) if richardson else (1.0,)
    shifts = []
    for s in scales:
        step = (s * h)[:, None, None] * D
        shifts.append(x[:, None, :] + step)
        shifts.append(x[:, None, :] - step)
    pts = np.concatenate(shifts, axis=1).reshape(-1, d)
    vals = np.asarray(f(pts))
    vals = vals.reshape((B, len(shifts), k) + vals.shape[1:])
    hb = h.reshape((B,) + (1,) * (vals.ndim - 2))
    d1 = (vals[:, 0] - vals[:, 1]) / (2.0 * hb)
    if not richardson:
        return d1
    d2 = (vals[:, 2] - vals[:, 3]) / hb
    return (4.0 * d2 - d1) / 3.0


def jacobian(f, x, h=None, richardson: bool = True) -> np.ndarray:
    """J[b, ..., l] = d f(x_b)[...] / d x_l."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    d = x.shape[-1]
    dd = directional_derivatives(f, x, np.eye(d), h=h, richardson=richardson)
    return np.moveaxis(dd, 1, -1)


def gradient(f, x, h=None, richardson: bool = True) -> np.ndarray:
    return jacobian(f, x, h=h, richardson=richardson)


def exterior_derivative_1form(beta, x, h=None) -> np.ndarray:
    """(d beta)(X, Y) as a matrix F with F = J^T - J, J_kl = d beta_k / d x_l."""
    J = jacobian(beta, x, h=h)
    return np.swapaxes(J, -1, -2) - J


def exterior_derivative_2form(F, x, h=None) -> np.ndarray:
    """(dF)_abc = d_a F_bc + d_b F_ca + d_c F_ab for a matrix-valued 2-form field."""
    J = jacobian(F, x, h=h)  # J[b, p, q, r] = d_r F_pq
    dF = (
        np.einsum("...bca->...abc", J)
        + np.einsum("...cab->...abc", J)
        + np.einsum("...abc->...abc", J)
    )
    return dF


def hessian(f, x, h=None) -> np.ndarray:
    """Hessian of a scalar field by differencing a finite-difference gradient."""
    g = lambda y: gradient(f, y, h=None if h is None else h)  # noqa: E731
    H = jacobian(lambda y: g(y).reshape(y.shape[0], -1), x, h=h)
    return 0.5 * (H + np.swapaxes(H, -1, -2))
