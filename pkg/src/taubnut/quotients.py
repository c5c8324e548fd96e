"""Locally-free certificates for circle actions on quaternionic Stiefel-type
links, and compatibility checks for finite group actions on H^n.

Points are flat real vectors of length 4l in the package layout.  The real
l x 4 matrix U = m.reshape(l, 4) has columns u^0..u^3; (z, w) are the complex
coordinates with u = z + w j.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from itertools import combinations

import numpy as np
from scipy import optimize

from . import fd
from .cone import CircleAction, from_complex, moment_map, to_complex
from .quaternions import conj_array, hamilton, right_act

logger = logging.getLogger(__name__)

NOT_FREE_BELOW = 1e-10
FREE_ABOVE = 1e-6
CONSTRAINT_TOL = 1e-10
IMAG_UNITS = np.eye(4)[1:]


class Manifold(str, Enum):
    SPHERE = "Sphere"
    NC = "NC"
    NH = "NH"
    NH_NU = "NH_nu"


class Verdict(str, Enum):
    LOCALLY_FREE = "locally_free"
    NOT_LOCALLY_FREE = "not_locally_free"
    INCONCLUSIVE = "inconclusive"


class RetractionError(RuntimeError):
    """The retraction onto a constraint set did not converge."""


@dataclass(frozen=True)
class ConstraintPoint:
    ambient: np.ndarray
    manifold: Manifold
    residuals: np.ndarray

    @property
    def max_residual(self) -> float:
        return float(np.max(np.abs(self.residuals))) if self.residuals.size else 0.0


# ---------------------------------------------------------------------------
# constraint sets

def _slots(m) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    return m.reshape(m.shape[:-1] + (-1, 4))


def nu_map(m) -> np.ndarray:
    """sum_beta (u_{2b-1} conj(u_{2b}) - u_{2b} conj(u_{2b-1})) as a vector in Im H."""
    u = _slots(m)
    s = u.shape[-2] // 2
    odd, even = u[..., 0:2 * s:2, :], u[..., 1:2 * s:2, :]
    v = hamilton(odd, conj_array(even)) - hamilton(even, conj_array(odd))
    return v.sum(axis=-2)[..., 1:]


def constraint_residuals(m, manifold: Manifold) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    manifold = Manifold(manifold)
    if manifold is Manifold.SPHERE:
        return (np.sum(m * m, axis=-1) - 1.0)[..., None]
    if manifold is Manifold.NC:
        z, w = to_complex(m)
        zw = np.sum(z * w, axis=-1)
        return np.stack([np.sum(np.abs(z) ** 2, axis=-1) - 0.5, np.sum(np.abs(w) ** 2, axis=-1) - 0.5,
                         zw.real, zw.imag], axis=-1)
    U = _slots(m)
    G = np.swapaxes(U, -1, -2) @ U - 0.25 * np.eye(4)
    iu = np.triu_indices(4)
    res = G[..., iu[0], iu[1]]
    if manifold is Manifold.NH_NU:
        res = np.concatenate([res, nu_map(m)], axis=-1)
    return res


def _retract_nc(m) -> np.ndarray:
    z, w = to_complex(m)
    nz = np.linalg.norm(z, axis=-1, keepdims=True)
    if np.any(nz == 0):
        raise RetractionError("z = 0 cannot be normalized")
    z = z / nz * math.sqrt(0.5)
    v = np.conj(z)
    w = w - (np.sum(z * w, axis=-1, keepdims=True) / 0.5) * v
    nw = np.linalg.norm(w, axis=-1, keepdims=True)
    if np.any(nw <= 1e-300):
        raise RetractionError("w is parallel to conj(z)")
    return from_complex(z, w / nw * math.sqrt(0.5))


def _polar(U) -> np.ndarray:
    Uu, s, Vt = np.linalg.svd(U, full_matrices=False)
    if np.any(s[..., -1] <= 1e-14 * np.maximum(s[..., 0], 1e-300)):
        raise RetractionError("frame has rank < 4")
    return 0.5 * Uu @ Vt


def _retract_nh(m) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    U = _slots(m)
    if U.shape[-2] < 4:
        raise RetractionError("need l >= 4")
    return _polar(U).reshape(m.shape)


def nu_jacobian(m) -> np.ndarray:
    """(..., 3, 4l); exact because nu is quadratic."""
    m = np.asarray(m, dtype=float)
    E = np.eye(m.shape[-1])
    plus = nu_map(m[..., None, :] + E)
    minus = nu_map(m[..., None, :] - E)
    return np.swapaxes(0.5 * (plus - minus), -1, -2)


def _retract_nh_nu(m, iters: int = 50) -> np.ndarray:
    """Polar retraction onto N(H), then minimum-norm Gauss-Newton on all
    thirteen quadratic constraints (Jacobian exact by central differences)."""
    x = _retract_nh(m)
    E = np.eye(x.shape[-1])
    prev = np.inf
    for _ in range(iters):
        r = constraint_residuals(x, Manifold.NH_NU)
        err = float(np.max(np.abs(r)))
        if err < 1e-15 or (err < 1e-14 and err >= 0.5 * prev):
            return x
        prev = err
        J = 0.5 * (constraint_residuals(x[..., None, :] + E, Manifold.NH_NU)
                   - constraint_residuals(x[..., None, :] - E, Manifold.NH_NU))
        J = np.swapaxes(J, -1, -2)
        x = x - (np.linalg.pinv(J) @ r[..., None])[..., 0]
    if np.max(np.abs(constraint_residuals(x, Manifold.NH_NU))) < CONSTRAINT_TOL:
        return x
    raise RetractionError("Gauss-Newton projection onto N_nu did not converge")


def retract(m, manifold: Manifold) -> np.ndarray:
    """Retraction onto the constraint set; works on (..., 4l) batches."""
    manifold = Manifold(manifold)
    m = np.asarray(m, dtype=float)
    if not np.all(np.isfinite(m)):
        raise RetractionError("non-finite input")
    if manifold is Manifold.SPHERE:
        n = np.linalg.norm(m, axis=-1, keepdims=True)
        if np.any(n == 0):
            raise RetractionError("zero vector")
        return m / n
    if manifold is Manifold.NC:
        return _retract_nc(m)
    if manifold is Manifold.NH:
        return _retract_nh(m)
    return _retract_nh_nu(m)


def project_to_manifold(ambient, manifold: Manifold) -> ConstraintPoint:
    manifold = Manifold(manifold)
    x = retract(ambient, manifold)
    res = constraint_residuals(x, manifold)
    if np.max(np.abs(res)) >= CONSTRAINT_TOL:
        raise RetractionError(f"residual {np.max(np.abs(res)):.3e} after retraction")
    return ConstraintPoint(ambient=x, manifold=manifold, residuals=res)


def on_manifold(m, manifold: Manifold, tol: float = CONSTRAINT_TOL) -> ConstraintPoint:
    """Wrap a point that should already satisfy the constraints."""
    manifold = Manifold(manifold)
    m = np.asarray(m, dtype=float)
    res = constraint_residuals(m, manifold)
    if np.max(np.abs(res)) >= tol:
        raise ValueError(f"point is off {manifold.value}: residual {np.max(np.abs(res)):.3e}")
    return ConstraintPoint(ambient=m, manifold=manifold, residuals=res)


# ---------------------------------------------------------------------------
# generators and defects

def _right_i(m) -> np.ndarray:
    return right_act(m, IMAG_UNITS[0])


def su_generators(weights, m) -> tuple[np.ndarray, np.ndarray]:
    """T' = (a_alpha u_alpha i) and T = u i."""
    T = _right_i(m)
    a = np.repeat(np.asarray(weights, dtype=float), 4)
    return a * T, T


def _dot(u, v) -> np.ndarray:
    return np.sum(u * v, axis=-1)


def su_defect_batch(weights, m) -> np.ndarray:
    Tp, T = su_generators(weights, m)
    return _dot(Tp, Tp) * _dot(T, T) - _dot(Tp, T) ** 2


def defect_su(weights, p) -> float:
    """|T'|^2 |T|^2 - g0(T', T)^2 evaluated from the vectors."""
    m = p.ambient if isinstance(p, ConstraintPoint) else np.asarray(p, dtype=float)
    return float(su_defect_batch(weights, m))


def defect_su_pairwise(weights, p) -> float:
    """sum_{alpha < beta} (a_alpha - a_beta)^2 |u_alpha|^2 |u_beta|^2."""
    m = p.ambient if isinstance(p, ConstraintPoint) else np.asarray(p, dtype=float)
    a = np.asarray(weights, dtype=float)
    n2 = np.sum(_slots(m) ** 2, axis=-1)
    return float(sum((a[i] - a[j]) ** 2 * n2[i] * n2[j] for i, j in combinations(range(a.size), 2)))


def so_generator_matrix(b, l: int) -> np.ndarray:
    """l x l block matrix with blocks [[0, b], [-b, 0]] and zeros after."""
    b = np.asarray(b, dtype=float)
    if 2 * b.size > l:
        raise ValueError(f"{b.size} blocks do not fit in l = {l}")
    B = np.zeros((l, l))
    for k, bk in enumerate(b):
        B[2 * k, 2 * k + 1] = bk
        B[2 * k + 1, 2 * k] = -bk
    return B


def so_generator(b, m) -> np.ndarray:
    U = _slots(m)
    return (so_generator_matrix(b, U.shape[-2]) @ U).reshape(np.shape(m))


def _sp1_pairing(Tp, m) -> np.ndarray:
    """c_r = g0(T', u e_r) for e_r = i, j, k, shape (..., 3)."""
    return np.stack([_dot(Tp, right_act(m, e)) for e in IMAG_UNITS], axis=-1)


def sp1_defect_batch(b, m, g2: bool = False) -> np.ndarray:
    """Closed-form minimum over unit q (and over lam when g2) of the defect."""
    m = np.asarray(m, dtype=float)
    Tp = so_generator(b, m)
    nu2 = _dot(m, m)
    cp = _sp1_pairing(Tp, m)
    C = nu2 * _dot(Tp, Tp) - _dot(cp, cp)
    if not g2:
        return C
    A, B = _g2_coefficients(Tp, m, nu2, cp)
    safe = A > 1e-14 * np.maximum(1.0, np.abs(C))
    return np.where(safe, C - B * B / np.where(safe, A, 1.0), C)


def _g2_coefficients(Tp, m, nu2, cp):
    T = so_generator(np.ones(3), m)
    ct = _sp1_pairing(T, m)
    return nu2 * _dot(T, T) - _dot(ct, ct), nu2 * _dot(Tp, T) - _dot(cp, ct)


def g2_defect_lambda_batch(b, m, lam) -> np.ndarray:
    """A lam^2 - 2 B lam + C: the defect of T' - lam T, minimized over q only."""
    m = np.asarray(m, dtype=float)
    Tp = so_generator(b, m)
    nu2 = _dot(m, m)
    cp = _sp1_pairing(Tp, m)
    C = nu2 * _dot(Tp, Tp) - _dot(cp, cp)
    A, B = _g2_coefficients(Tp, m, nu2, cp)
    return A * lam * lam - 2.0 * B * lam + C


def sphere_defect_batch(weights, m) -> np.ndarray:
    T = np.asarray(m, dtype=float) @ CircleAction(weights).generator_matrix.T
    return _dot(T, T)


@dataclass(frozen=True)
class Sp1Defect:
    value: float
    q: np.ndarray
    eig_value: float
    lam: float | None = None
    lam_brent: float | None = None
    value_brent: float | None = None


def _sp1_min_over_q(Tp, m) -> tuple[float, np.ndarray, float]:
    """min over unit q in Im H of |T_q|^2 |T'|^2 - g0(T', T_q)^2."""
    c = _sp1_pairing(Tp, m)
    nu2 = float(m @ m)
    t2 = float(Tp @ Tp)
    closed = nu2 * t2 - float(c @ c)
    w, V = np.linalg.eigh(np.outer(c, c))
    q = V[:, -1]
    eig = nu2 * t2 - float(w[-1])
    return closed, q, eig


def defect_sp1(b, p, lam: float | None = None, g2: bool = False) -> Sp1Defect:
    """Parallelism defect of the SO-type generator against right Sp(1).

    With g2=True the generator is T' - lam T with T the b = (1, 1, 1)
    generator, and lam minimizes the defect unless given.
    """
    m = p.ambient if isinstance(p, ConstraintPoint) else np.asarray(p, dtype=float)
    Tp = so_generator(b, m)
    if not g2:
        val, q, eig = _sp1_min_over_q(Tp, m)
        return Sp1Defect(value=val, q=q, eig_value=eig)
    T = so_generator(np.ones(3), m)
    if lam is not None:
        val, q, eig = _sp1_min_over_q(Tp - lam * T, m)
        return Sp1Defect(value=val, q=q, eig_value=eig, lam=lam)
    nu2 = float(m @ m)
    cp, ct = _sp1_pairing(Tp, m), _sp1_pairing(T, m)
    A = nu2 * float(T @ T) - float(ct @ ct)
    B = nu2 * float(Tp @ T) - float(cp @ ct)
    C = nu2 * float(Tp @ Tp) - float(cp @ cp)
    lam_v = B / A if A > 1e-14 * max(1.0, abs(C)) else 0.0
    bracket = (lam_v - 10.0 - 10.0 * abs(lam_v), lam_v + 10.0 + 10.0 * abs(lam_v))
    res = optimize.minimize_scalar(lambda t: _sp1_min_over_q(Tp - t * T, m)[0],
                                   bracket=bracket, method="brent", options={"xtol": 1e-12})
    val, q, eig = _sp1_min_over_q(Tp - lam_v * T, m)
    return Sp1Defect(value=val, q=q, eig_value=eig, lam=lam_v, lam_brent=float(res.x),
                     value_brent=float(res.fun))


def defect_sp1_grid(b, p, step_deg: float = 2.0, polish: bool = True) -> float:
    """Brute-force minimum over a latitude-longitude grid of unit q, then a
    Nelder-Mead polish in the angles from the best grid node (for validation)."""
    m = p.ambient if isinstance(p, ConstraintPoint) else np.asarray(p, dtype=float)
    Tp = so_generator(b, m)
    c = _sp1_pairing(Tp, m)
    base = float(m @ m) * float(Tp @ Tp)

    def value(th, ph):
        q = np.stack([np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph), np.cos(th)], axis=-1)
        return base - (q @ c) ** 2

    th = np.deg2rad(np.arange(0.0, 180.0 + 1e-9, step_deg))
    ph = np.deg2rad(np.arange(0.0, 360.0, step_deg))
    TH, PH = np.meshgrid(th, ph, indexing="ij")
    V = value(TH, PH)
    k = np.unravel_index(np.argmin(V), V.shape)
    best = float(V[k])
    if polish:
        res = optimize.minimize(lambda v: float(value(v[0], v[1])), [TH[k], PH[k]], method="Nelder-Mead",
                                options={"xatol": 1e-12, "fatol": 1e-16, "maxiter": 4000})
        best = min(best, float(res.fun))
    return best


def sphere_defect(weights, m) -> float:
    """|T|^2 on the unit sphere for the weighted action on H^n."""
    return float(sphere_defect_batch(weights, m))


# ---------------------------------------------------------------------------
# exact predicates and explicit points

def su_predicate(weights) -> bool:
    """Locally free on the SU-type link iff all weights are distinct."""
    a = [int(x) for x in weights]
    return len(set(a)) == len(a)


def so_predicate(b) -> bool:
    """Locally free on the SO-type link iff all |b_beta| are distinct."""
    b = [abs(int(x)) for x in b]
    return len(set(b)) == len(b)


def g2_predicate(b) -> bool | None:
    """Distinct b is sufficient; otherwise the numerical search decides."""
    b = [int(x) for x in b]
    return True if len(set(b)) == len(b) else None


def sphere_predicate(weights) -> bool:
    return all(int(x) != 0 for x in weights)


def su_witness(weights) -> np.ndarray | None:
    """Point of N(C) supported on two slots with equal weights, where T' is parallel to T."""
    a = [int(x) for x in weights]
    for i, j in combinations(range(len(a)), 2):
        if a[i] == a[j]:
            z = np.zeros(len(a), dtype=complex)
            w = np.zeros(len(a), dtype=complex)
            z[i] = math.sqrt(0.5)
            w[j] = math.sqrt(0.5)
            return from_complex(z, w)
    return None


def so_witness(b, l: int) -> np.ndarray | None:
    """u = (1/2, -s i/2, j/2, k/2) on two blocks with |b_1| = |b_2|, s = sign(b_1 b_2)."""
    b = [int(x) for x in b]
    for i, j in combinations(range(len(b)), 2):
        if abs(b[i]) == abs(b[j]):
            U = np.zeros((l, 4))
            r = [2 * i, 2 * i + 1, 2 * j, 2 * j + 1]
            s = 1.0 if b[i] * b[j] >= 0 else -1.0
            U[r[0], 0] = 0.5
            U[r[1], 1] = -0.5
            U[r[2], 2] = 0.5
            U[r[3], 3] = 0.5 * s
            return U.reshape(-1)
    return None


def g2_point() -> np.ndarray:
    """u = (1, i, k, j, 0, 0, 0) / 2, a point of N_nu."""
    U = np.zeros((7, 4))
    U[0, 0] = U[1, 1] = U[2, 3] = U[3, 2] = 0.5
    return U.reshape(-1)


def support_slots(m, rel: float = 1e-4) -> tuple[int, ...]:
    n2 = np.sum(_slots(m) ** 2, axis=-1)
    return tuple(int(k) for k in np.flatnonzero(n2 > rel * n2.max()))


# ---------------------------------------------------------------------------
# multi-start search

@dataclass(frozen=True)
class Certificate:
    case: str
    weights: tuple
    verdict: Verdict
    min_defect: float
    witness: ConstraintPoint
    starts: int
    seed: int
    predicate: bool | None
    explicit_defect: float | None = None
    support: tuple = field(default=())
    failed_starts: int = 0
    explicit_witness: np.ndarray | None = None


CASES = {
    "SU": (Manifold.NC, su_predicate),
    "SO": (Manifold.NH, so_predicate),
    "G2": (Manifold.NH_NU, g2_predicate),
    "SphereWeighted": (Manifold.SPHERE, sphere_predicate),
}


def _case_setup(case: str, weights, l: int | None):
    if case not in CASES:
        raise ValueError(f"unknown case {case!r}")
    manifold, pred = CASES[case]
    w = tuple(int(x) for x in weights)
    search = None
    if case == "SU":
        if len(w) < 3:
            raise ValueError("SU needs m >= 3 weights")
        dim = 4 * len(w)
        objective = lambda m: su_defect_batch(w, m)  # noqa: E731
        explicit = su_witness(w)
    elif case == "SO":
        l = l if l is not None else max(5, 2 * len(w))
        if l < 5 or 2 * len(w) > l:
            raise ValueError("SO needs l >= 5 and 2 * len(b) <= l")
        dim = 4 * l
        objective = lambda m: sp1_defect_batch(w, m)  # noqa: E731
        explicit = so_witness(w, l)
    elif case == "G2":
        if len(w) != 3:
            raise ValueError("G2 needs three weights")
        dim = 28
        objective = lambda m: sp1_defect_batch(w, m, g2=True)  # noqa: E731
        search = lambda y: g2_defect_lambda_batch(w, y[..., :-1], y[..., -1])  # noqa: E731
        explicit = None
        sw = so_witness(w, 7)
        if sw is not None and np.max(np.abs(nu_map(sw))) < 1e-14:
            explicit = sw
    else:
        if len(w) < 1:
            raise ValueError("need at least one weight")
        dim = 4 * len(w)
        objective = lambda m: sphere_defect_batch(w, m)  # noqa: E731
        explicit = None
        for k, x in enumerate(w):
            if x == 0:
                explicit = np.zeros(dim)
                explicit[4 * k] = 1.0
                break
    return manifold, pred, w, dim, objective, explicit, search


def tangent_basis(x, manifold: Manifold) -> np.ndarray:
    """Orthonormal basis (dim, k) of the kernel of the constraint differential."""
    E = np.eye(x.size)
    J = 0.5 * (constraint_residuals(x + E, manifold) - constraint_residuals(x - E, manifold)).T
    _, s, Vt = np.linalg.svd(J)
    rank = int(np.sum(s > 1e-10 * s[0]))
    return Vt[rank:].T


def _local_min(objective, manifold, x0, maxiter: int, extra: int = 0, rounds: int = 20):
    """Minimize objective over the constraint set times R^extra.

    Each round runs BFGS in the chart v -> retract(x + P v) centred at the
    current point (P a tangent basis), then re-centres; the last ``extra``
    variables are unconstrained.  Gradients are batched central differences.
    """
    d = x0.size - extra
    y = np.asarray(x0, dtype=float)
    val = float(objective(y))
    for _ in range(rounds):
        x, tail = y[:d], y[d:]
        P = tangent_basis(x, manifold)
        k = P.shape[1]

        def lift(v, x=x, P=P):
            pts = retract(x + v[..., :k] @ P.T, manifold)
            return np.concatenate([pts, tail + v[..., k:]], axis=-1) if extra else pts

        def F(v):
            return float(objective(lift(v)))

        def grad(v):
            return fd.gradient(lambda z: objective(lift(z)), v[None], h=np.array([1e-6]), richardson=False)[0]

        res = optimize.minimize(F, np.zeros(k + extra), jac=grad, method="BFGS",
                                options={"maxiter": maxiter, "gtol": 1e-12})
        y_new = lift(res.x)
        new_val = float(objective(y_new))
        improved = new_val < val - 1e-15 * max(1.0, abs(val))
        if new_val <= val:
            y, val = y_new, new_val
        if not improved or np.linalg.norm(res.x) < 1e-9:
            break
    return y, val


def locally_free_search(case: str, weights, starts: int = 64, seed: int = 0, l: int | None = None,
                        maxiter: int = 400) -> Certificate:
    """Multi-start minimization of the parallelism defect over the constraint set."""
    if starts < 1:
        raise ValueError("starts must be positive")
    manifold, pred, w, dim, objective, explicit, search = _case_setup(case, weights, l)
    extra = 0 if search is None else 1
    best_val, best_x, failed = np.inf, None, 0
    for s in range(starts):
        rng = np.random.Generator(np.random.Philox(key=np.array([seed, s], dtype=np.uint64)))
        try:
            x0 = retract(rng.standard_normal(dim), manifold)
            if extra:
                x0 = np.concatenate([x0, [float(np.mean(w))]])
            y, _ = _local_min(objective if search is None else search, manifold, x0, maxiter, extra)
            x = y[:dim]
            # the reported defect always minimizes over every free parameter
            val = float(objective(x))
        except RetractionError as exc:
            logger.debug("start %d failed: %s", s, exc)
            failed += 1
            continue
        if val < best_val:
            best_val, best_x = val, x
    explicit_defect = None if explicit is None else float(objective(explicit))
    if best_x is None:
        raise RetractionError("every start failed")
    best_val = max(float(best_val), 0.0)
    if best_val < NOT_FREE_BELOW:
        verdict = Verdict.NOT_LOCALLY_FREE
    elif best_val > FREE_ABOVE:
        verdict = Verdict.LOCALLY_FREE
    else:
        verdict = Verdict.INCONCLUSIVE
    return Certificate(
        case=case, weights=w, verdict=verdict, min_defect=best_val,
        witness=ConstraintPoint(best_x, manifold, constraint_residuals(best_x, manifold)),
        starts=starts, seed=seed, predicate=pred(w), explicit_defect=explicit_defect,
        support=support_slots(best_x), failed_starts=failed, explicit_witness=explicit,
    )


def quotient_label(case: str, weights) -> str | None:
    """Metadata only: the zero-level quotient of the weighted action (1, k) on H^2."""
    w = [int(x) for x in weights]
    if case == "SphereWeighted" and len(w) == 2 and w[0] == 1 and w[1] >= 1:
        return f"C^2/Z_{w[1] + 1}"
    return None


# ---------------------------------------------------------------------------
# finite group compatibility

def complex_to_real(Mz, Mw=None, conj_z=None, conj_w=None) -> np.ndarray:
    """Real 4n x 4n matrix of (z, w) -> C (z, w) + D conj(z, w).

    C and D are 2n x 2n complex matrices acting on the stacked vector (z, w).
    Mz is C; conj_z is D (default zero).
    """
    C = np.asarray(Mz, dtype=complex)
    D = np.zeros_like(C) if conj_z is None else np.asarray(conj_z, dtype=complex)
    n2 = C.shape[0]
    n = n2 // 2
    cols = []
    for k in range(4 * n):
        e = np.zeros(4 * n)
        e[k] = 1.0
        z, w = to_complex(e)
        v = np.concatenate([z, w])
        out = C @ v + D @ np.conj(v)
        cols.append(from_complex(out[:n], out[n:]))
    return np.stack(cols, axis=-1)


def cyclic_generator(order: int, n: int) -> np.ndarray:
    """(z, w) -> (zeta z, zeta w) with zeta = exp(2 pi i / order)."""
    zeta = np.exp(2j * np.pi / order)
    return complex_to_real(zeta * np.eye(2 * n))


def binary_dihedral_generators(k: int, n: int = 1) -> list[np.ndarray]:
    """Generators of the binary dihedral group of order 4(k - 2) acting slotwise."""
    if k < 3:
        raise ValueError("binary dihedral groups here need k >= 3")
    zeta = np.exp(1j * np.pi / (k - 2))
    rot = np.diag(np.concatenate([np.full(n, zeta), np.full(n, np.conj(zeta))]))
    flip = np.block([[np.zeros((n, n)), -np.eye(n)], [np.eye(n), np.zeros((n, n))]])
    return [complex_to_real(rot), complex_to_real(flip.astype(complex))]


def mixing_generator(order: int, n: int, eps: float = 0.3) -> np.ndarray:
    """The cyclic generator plus eps * conj(w_1) added to z_1."""
    zeta = np.exp(2j * np.pi / order)
    D = np.zeros((2 * n, 2 * n), dtype=complex)
    D[0, n] = eps
    return complex_to_real(zeta * np.eye(2 * n), conj_z=D)


@dataclass(frozen=True)
class GeneratorReport:
    sign: int | None
    commute_residual: float
    invariance_residual: float
    special_unitary_residual: float
    passed: bool


@dataclass(frozen=True)
class GammaReport:
    passed: bool
    generators: list


def _su_residual(g, n) -> float:
    from .quaternions import complex_structure

    I1 = complex_structure(1, n)
    lin = np.max(np.abs(g @ I1 - I1 @ g))
    orth = np.max(np.abs(g.T @ g - np.eye(4 * n)))
    # complex determinant from the z, w coordinates
    C = np.zeros((2 * n, 2 * n), dtype=complex)
    for k in range(2 * n):
        v = np.zeros(2 * n, dtype=complex)
        v[k] = 1.0
        out = g @ from_complex(v[:n], v[n:])
        z, w = to_complex(out)
        C[:, k] = np.concatenate([z, w])
    return float(max(lin, orth, abs(np.linalg.det(C) - 1.0)))


def gamma_compat_check(generators, action: CircleAction, samples: int = 200, seed: int = 0,
                       tol: float = 1e-10) -> GammaReport:
    """gamma T = +-T gamma and invariance of x2^2 + x3^2 for each generator."""
    rng = np.random.default_rng(seed)
    pts = rng.standard_normal((samples, action.dim))
    A = action.generator_matrix
    reports = []
    for g in generators:
        g = np.asarray(g, dtype=float)
        best_sign, best_res = None, np.inf
        for s in (1, -1):
            # pointwise: g(T(m)) = s T(g m)
            res = float(np.max(np.abs(pts @ (g @ A).T - s * pts @ (A @ g).T)))
            if res < best_res:
                best_sign, best_res = s, res
        x = moment_map(action, pts)
        y = moment_map(action, pts @ g.T)
        scale = np.maximum(1.0, np.sum(pts * pts, axis=-1) ** 2)
        inv = float(np.max(np.abs((y[:, 1] ** 2 + y[:, 2] ** 2) - (x[:, 1] ** 2 + x[:, 2] ** 2)) / scale))
        su = _su_residual(g, action.n)
        ok = best_res <= tol * max(1.0, float(np.max(np.abs(pts)))) and inv <= tol
        reports.append(GeneratorReport(sign=best_sign if best_res <= tol * 10 else None,
                                       commute_residual=best_res, invariance_residual=inv,
                                       special_unitary_residual=su, passed=bool(ok)))
    return GammaReport(passed=all(r.passed for r in reports), generators=reports)
