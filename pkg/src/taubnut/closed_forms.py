"""Closed-form references used to validate the numerical flow and its maps.

In complex coordinates the flow of -I1 T rescales z_a by exp(a_a tau) and
w_a by exp(-a_a tau).  For the standard action on the zero level this gives
the closed-form profile rho^2 = rho0^2 cosh 2tau, x1 = rho0^2 sinh(2tau)/2.
"""
from __future__ import annotations

import numpy as np

from .cone import CircleAction, from_complex, moment_map, to_complex


def exact_flow(m, tau, action: CircleAction) -> np.ndarray:
    z, w = to_complex(m)
    a = np.asarray(action.weights, dtype=float)
    t = np.asarray(tau, dtype=float)[..., None]
    return from_complex(z * np.exp(a * t), w * np.exp(-a * t))


def exact_phi_a(m, action: CircleAction, a: float) -> np.ndarray:
    x1 = moment_map(action, m)[..., 0]
    return exact_flow(m, a * a * x1, action)


def standard_x1_rho2(m, tau):
    """(rho^2, x1) along the standard-weight flow from m."""
    z, w = to_complex(m)
    zz = np.sum(np.abs(z) ** 2, axis=-1)
    ww = np.sum(np.abs(w) ** 2, axis=-1)
    e = np.exp(2.0 * np.asarray(tau, dtype=float))
    return zz * e + ww / e, 0.5 * (zz * e - ww / e)


def exact_phi_a_inverse_standard(m, a: float) -> np.ndarray:
    """Standard weights: solve a^2 x1(tau) + tau = 0 by bisection on the closed form."""
    m = np.atleast_2d(np.asarray(m, dtype=float))
    action = CircleAction.standard(m.shape[-1] // 4)
    lo = np.full(m.shape[0], -50.0)
    hi = np.full(m.shape[0], 50.0)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        _, x1 = standard_x1_rho2(m, mid)
        g = a * a * x1 + mid
        lo = np.where(g < 0, mid, lo)
        hi = np.where(g >= 0, mid, hi)
    return exact_flow(m, 0.5 * (lo + hi), action)


def tc_rho2(rho0_sq, tau):
    return rho0_sq * np.cosh(2.0 * tau)


def tc_x1(rho0_sq, tau):
    return 0.5 * rho0_sq * np.sinh(2.0 * tau)


def tc_tau(rho0_sq, x1):
    return 0.5 * np.arcsinh(2.0 * x1 / rho0_sq)


def tc_f(rho0_sq, x1):
    return 0.5 * np.sqrt(rho0_sq**2 + 4.0 * x1**2) - x1 * np.arcsinh(2.0 * x1 / rho0_sq)


def tc_level_rho2(rho0_sq, x1):
    return np.sqrt(rho0_sq**2 + 4.0 * x1**2)
