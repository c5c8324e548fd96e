"""Batched Dormand-Prince 5(4) integrator with PI step-size control.

All trajectories in a batch share one step sequence in a normalized time
s in [0, 1].  Per-trajectory durations enter as a scale factor on the right
hand side, so the numerical flow is a smooth function of the initial data.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

logger = logging.getLogger(__name__)

_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
_E = _B5 - _B4


class IntegrationError(RuntimeError):
    pass


@dataclass(frozen=True)
class IntegratorStats:
    steps: int
    rejected: int
    err_estimate: float


def dopri5(rhs, y0, durations, rel_tol=1e-10, abs_tol=1e-12, max_steps=100000,
           blowup=None, h0=None):
    """Integrate dy/dt = rhs(y) for time durations[b] on each batch row.

    Parameters
    ----------
    rhs : callable
        (B, D) -> (B, D), autonomous.
    y0 : array, shape (B, D)
    durations : array, shape (B,)
        Signed integration times.
    blowup : float, optional
        Abort if any |y| row exceeds this value.

    Returns
    -------
    y : array, shape (B, D)
    stats : IntegratorStats
    """
    y = np.array(y0, dtype=float, copy=True)
    if y.ndim == 1:
        y = y[None, :]
    dur = np.broadcast_to(np.asarray(durations, dtype=float), (y.shape[0],))[:, None]
    if not np.any(dur):
        return y, IntegratorStats(0, 0, 0.0)

    def f(z):
        return dur * rhs(z)

    s = 0.0
    k1 = f(y)
    if h0 is None:
        d0 = np.max(np.abs(y)) + abs_tol
        d1 = np.max(np.abs(k1)) + abs_tol
        h = min(1.0, 0.01 * d0 / d1)
    else:
        h = h0
    err_prev = 1e-4
    steps = rejected = 0
    total_err = 0.0
    safety, beta1, beta2 = 0.9, 0.7 / 5.0, 0.4 / 5.0
    while s < 1.0:
        if steps + rejected >= max_steps:
            raise IntegrationError(f"step budget exhausted at s={s:.6g}")
        h = min(h, 1.0 - s)
        ks = [k1]
        for i in range(1, 7):
            yi = y + h * sum(a * k for a, k in zip(_A[i], ks) if a != 0.0)
            ks.append(f(yi))
        y_new = y + h * sum(b * k for b, k in zip(_B5, ks) if b != 0.0)
        err_vec = h * sum(e * k for e, k in zip(_E, ks))
        scale = abs_tol + rel_tol * np.maximum(np.abs(y), np.abs(y_new))
        err_rows = np.sqrt(np.mean((err_vec / scale) ** 2, axis=-1))
        err = float(np.max(err_rows)) if err_rows.size else 0.0
        if not np.isfinite(err):
            h *= 0.2
            rejected += 1
            continue
        if err <= 1.0:
            s += h
            y = y_new
            k1 = ks[6]
            steps += 1
            total_err += float(np.max(np.abs(err_vec)))
            if blowup is not None and np.max(np.linalg.norm(y, axis=-1)) > blowup:
                raise IntegrationError("trajectory exceeded the radius ceiling")
            fac = safety * max(err, 1e-10) ** (-beta1) * err_prev ** beta2
            h *= min(5.0, max(0.2, fac))
            err_prev = max(err, 1e-4)
        else:
            rejected += 1
            h *= max(0.2, safety * err ** (-1.0 / 5.0))
    return y, IntegratorStats(steps, rejected, total_err)
