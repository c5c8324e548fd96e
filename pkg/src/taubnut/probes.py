"""Riemannian probes: finite-difference curvature, distance upper bounds,
Monte Carlo volume growth and rescaled distance comparisons.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from . import fd
from .cone import (
    CircleAction,
    circle_generator,
    connection_data,
    moment_differentials,
    moment_map,
    orbit_frame,
)
from .deformation import deformed_metric, potential_K1a
from .flows import DEFAULT_CONFIG, FlowConfig, horizontal_basis
from .quaternions import complex_structures, rotation_to_axis, sp1_act_array

logger = logging.getLogger(__name__)

COND_WARN = 1e8


# ---------------------------------------------------------------------------
# curvature

def christoffel(metric_field, x, h=None) -> np.ndarray:
    """Gamma[b, a, i, j] = Gamma^a_{ij} at each row of x."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    G = metric_field(x)
    dG = fd.jacobian(metric_field, x, h=h)  # dG[b, i, j, k] = d_k g_ij
    Gi = np.linalg.inv(G)
    # lowered: Gamma_{d i j} = 1/2 (d_i g_dj + d_j g_di - d_d g_ij)
    low = 0.5 * (
        np.einsum("bdji->bdij", dG) + np.einsum("bdij->bdij", dG) - np.einsum("bijd->bdij", dG)
    )
    return np.einsum("bad,bdij->baij", Gi, low)


def riemann(metric_field, x, rel_step: float = 1e-2, step=None) -> tuple[np.ndarray, np.ndarray]:
    """Lowered Riemann tensor R[z, a, b, c, d] = g(R(e_c, e_d) e_b, e_a) and the metric.

    Christoffel symbols are differenced once more; both levels use the step
    rel_step * max(1, rho) at the point where the derivative is taken, or
    step(y) when given.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if step is None:
        def step(y):
            return fd.default_step(y, rel_step)
    G = metric_field(x)
    ev = np.linalg.eigvalsh(G)
    if np.any(ev[:, -1] / ev[:, 0] > COND_WARN):
        logger.warning("metric eigenvalue ratio exceeds %.0e", COND_WARN)

    def gamma(y):
        return christoffel(metric_field, y, h=step(y))

    h = step(x)
    Gam = gamma(x)
    dGam = fd.jacobian(gamma, x, h=h)  # dGam[z, a, i, j, k] = d_k Gamma^a_ij
    # R^a_{bcd} = d_c Gamma^a_{db} - d_d Gamma^a_{cb} + Gamma^a_{ce} Gamma^e_{db} - Gamma^a_{de} Gamma^e_{cb}
    R = (
        np.einsum("zadbc->zabcd", dGam)
        - np.einsum("zacbd->zabcd", dGam)
        + np.einsum("zace,zedb->zabcd", Gam, Gam)
        - np.einsum("zade,zecb->zabcd", Gam, Gam)
    )
    return np.einsum("zae,zebcd->zabcd", G, R), G


def sectional_from_riemann(Rlow, G, X, Y) -> np.ndarray:
    num = np.einsum("zabcd,za,zb,zc,zd->z", Rlow, X, Y, X, Y)
    gxx = np.einsum("zab,za,zb->z", G, X, X)
    gyy = np.einsum("zab,za,zb->z", G, Y, Y)
    gxy = np.einsum("zab,za,zb->z", G, X, Y)
    return num / (gxx * gyy - gxy**2)


def sectional_curvature(metric_field, m, plane, rel_step: float = 1e-2) -> float:
    """Sectional curvature of the plane spanned by plane = (X, Y) at m."""
    m = np.atleast_2d(np.asarray(m, dtype=float))
    X, Y = (np.atleast_2d(np.asarray(v, dtype=float)) for v in plane)
    Rlow, G = riemann(metric_field, m, rel_step=rel_step)
    return float(sectional_from_riemann(Rlow, G, X, Y)[0])


def orthonormal_frame(G, vectors) -> np.ndarray:
    """Gram-Schmidt (twice) of the rows of vectors in the metric G."""
    out = []
    for v in vectors:
        w = np.array(v, dtype=float)
        for _ in range(2):
            for u in out:
                w = w - (u @ G @ w) * u
        nrm = math.sqrt(max(w @ G @ w, 0.0))
        if nrm > 1e-12 * max(1.0, np.linalg.norm(v)):
            out.append(w / nrm)
    return np.array(out)


def max_sectional(Rlow, G, frame) -> float:
    """max |K| over planes spanned by pairs of a G-orthonormal frame."""
    k = frame.shape[0]
    best = 0.0
    R = np.einsum("abcd,ai,bj,ck,dl->ijkl", Rlow, frame.T, frame.T, frame.T, frame.T)
    for i in range(k):
        for j in range(i + 1, k):
            best = max(best, abs(R[i, j, i, j]))
    return best


def curvature_operator_norm(Rlow, G) -> float:
    """Largest |eigenvalue| of the curvature operator on 2-vectors.

    Bounds |K| of every tangent plane and, unlike a maximum over planes of
    one frame, does not depend on the frame.
    """
    F = orthonormal_frame(G, np.eye(G.shape[-1]))
    R = np.einsum("abcd,ia,jb,kc,ld->ijkl", Rlow, F, F, F, F)
    iu, ju = np.triu_indices(F.shape[0], 1)
    M = R[iu, ju][:, iu, ju]
    return float(np.max(np.abs(np.linalg.eigvalsh(0.5 * (M + M.T)))))


def deformed_metric_field(action: CircleAction, a: float):
    def field(p):
        return deformed_metric(action, a, p)

    return field


def adapted_frame(action: CircleAction, a: float, m) -> np.ndarray:
    """g_a-orthonormal frame built from (m, T, I_iT, horizontal basis)."""
    m = np.asarray(m, dtype=float)
    G = deformed_metric(action, a, m)
    vecs = [m] + list(orbit_frame(action, m))
    if action.dim > 4:
        vecs += list(horizontal_basis(action, m).T)
    return orthonormal_frame(G, vecs)


@dataclass(frozen=True)
class CurvatureSample:
    point: np.ndarray
    K: float
    rho_hat: float
    rho: float


def curvature_along_ray(action: CircleAction, a: float, direction, radii, rel_step=1e-2,
                        cfg: FlowConfig = DEFAULT_CONFIG, exact: bool = True):
    """Curvature bound at points r * direction, with distance bounds.

    K is the curvature-operator norm, an upper bound on |sectional curvature|.
    exact=True takes the metric derivatives in closed form; exact=False uses
    finite differences of the metric.
    """
    direction = np.asarray(direction, dtype=float)
    direction = direction / np.linalg.norm(direction)
    field = deformed_metric_field(action, a)
    out = []
    for r in radii:
        m = r * direction
        if exact:
            G, dG, ddG = metric_jets(action, a, m[None])
            Rlow = riemann_from_jets(G, dG, ddG)
        else:
            Rlow, G = riemann(field, m[None], rel_step=rel_step)
        K = curvature_operator_norm(Rlow[0], G[0])
        rh = float(distance_upper(m, action, a, cfg)[0])
        out.append(CurvatureSample(point=m, K=K, rho_hat=rh, rho=float(r)))
    return out


def gibbons_hawking_metric(a: float, weight: float = 1.0):
    """(V + a^2) dx^2 + (dt + A)^2 / (V + a^2) on (x1, x2, x3, t), V = 1/(2 w |x|).

    This is g_a for n = 1 written in moment coordinates; A is the monopole
    potential with dA = -*dV, singular only on the negative x3 axis.  Unlike the
    ambient chart its entries stay O(1) far out, so curvature differences do
    not lose precision to the metric's conditioning.
    """
    k = 1.0 / (2.0 * weight)

    def field(y):
        y = np.atleast_2d(np.asarray(y, dtype=float))
        x1, x2, x3 = y[:, 0], y[:, 1], y[:, 2]
        r = np.sqrt(x1 * x1 + x2 * x2 + x3 * x3)
        W = k / r + a * a
        s = k / (r * (r + x3))
        A = np.stack([-x2 * s, x1 * s, np.zeros_like(r), np.ones_like(r)], axis=-1)
        G = np.einsum("z,ij->zij", W, np.diag([1.0, 1.0, 1.0, 0.0]))
        return G + np.einsum("zi,zj->zij", A, A) / W[:, None, None]

    return field


def kretschmann(Rlow, G) -> np.ndarray:
    """R_abcd R^abcd, a frame-independent size of the curvature."""
    Gi = np.linalg.inv(G)
    up = np.einsum("zae,zbf,zcg,zdh,zefgh->zabcd", Gi, Gi, Gi, Gi, Rlow)
    return np.einsum("zabcd,zabcd->z", Rlow, up)


def curvature_along_ray_gh(action: CircleAction, a: float, direction, radii, rel_step=1e-2,
                           cfg: FlowConfig = DEFAULT_CONFIG):
    """n = 1 version of curvature_along_ray evaluated in the moment chart.

    The point r * direction maps to x = mu(r * direction), t = 0; K is the
    same curvature-operator norm.
    """
    if action.dim != 4:
        raise ValueError("the moment chart covers n = 1 only")
    direction = np.asarray(direction, dtype=float)
    direction = direction / np.linalg.norm(direction)
    field = gibbons_hawking_metric(a, float(action.weights[0]))
    out = []
    for r in radii:
        m = r * direction
        x = moment_map(action, m[None])[0]
        y = np.concatenate([x, [0.0]])[None]
        h = rel_step * float(np.linalg.norm(x))
        Rlow, G = riemann(field, y, step=lambda v, h=h: np.full(v.shape[0], h))
        K = curvature_operator_norm(Rlow[0], G[0])
        rh = float(distance_upper(m, action, a, cfg)[0])
        out.append(CurvatureSample(point=m, K=K, rho_hat=rh, rho=float(r)))
    return out


def metric_jets(action: CircleAction, a: float, m):
    """g_a with its exact first and second coordinate derivatives.

    g_a = 1 + a^2 sum_i dx_i dx_i^T - a^2 T T^T / (1 + a^2 |T|^2), where T = A m
    and dx_i = L_i m are linear in m, so every derivative is closed form.
    Returns (G, dG, ddG) with dG[z, i, j, k] = d_k g_ij and
    ddG[z, i, j, k, l] = d_k d_l g_ij.
    """
    m = np.atleast_2d(np.asarray(action.check_dim(m), dtype=float))
    d = action.dim
    a2 = a * a
    A = action.generator_matrix
    L = moment_differentials(action, np.eye(d))      # L[k, i, :] = dx_i(e_k)
    L = np.transpose(L, (1, 2, 0))                      # dx_i(m) = L[i] @ m
    X = np.einsum("iab,zb->zia", L, m)                  # dx_i(m)
    T = m @ A.T
    s = 1.0 + a2 * np.sum(T * T, axis=-1)
    eye = np.eye(d)
    # sum_i dx_i dx_i^T
    P = np.einsum("zia,zib->zab", X, X)
    Pk = np.einsum("iak,zib->zabk", L, X)
    Pk = Pk + np.swapaxes(Pk, 1, 2)
    Pkl = np.einsum("iak,ibl->abkl", L, L)
    Pkl = Pkl + np.transpose(Pkl, (0, 1, 3, 2))
    # Q = N / s with N = T T^T
    N = np.einsum("za,zb->zab", T, T)
    Nk = np.einsum("ak,zb->zabk", A, T)
    Nk = Nk + np.swapaxes(Nk, 1, 2)
    Nkl = np.einsum("ak,bl->abkl", A, A)
    Nkl = Nkl + np.transpose(Nkl, (0, 1, 3, 2))
    sk = 2.0 * a2 * T @ A                               # d_k s
    skl = 2.0 * a2 * A.T @ A
    si = 1.0 / s
    Q = N * si[:, None, None]
    Qk = Nk * si[:, None, None, None] - np.einsum("zab,zk->zabk", N, sk) * (si**2)[:, None, None, None]
    Qkl = (Nkl[None] * si[:, None, None, None, None]
           - (np.einsum("zabk,zl->zabkl", Nk, sk) + np.einsum("zabl,zk->zabkl", Nk, sk))
           * (si**2)[:, None, None, None, None]
           - np.einsum("zab,kl->zabkl", N, skl) * (si**2)[:, None, None, None, None]
           + 2.0 * np.einsum("zab,zk,zl->zabkl", N, sk, sk) * (si**3)[:, None, None, None, None])
    G = eye + a2 * (P - Q)
    dG = a2 * (Pk - Qk)
    ddG = a2 * (Pkl[None] - Qkl)
    return G, dG, ddG


def riemann_from_jets(G, dG, ddG) -> np.ndarray:
    """Lowered Riemann tensor, same convention as riemann(), from metric jets."""
    Gi = np.linalg.inv(G)
    # Christoffel of the first kind: C[d, b, c] = 1/2 (d_b g_dc + d_c g_db - d_d g_bc)
    C = 0.5 * (np.einsum("zdcb->zdbc", dG) + dG - np.einsum("zbcd->zdbc", dG))
    Gam = np.einsum("zad,zdbc->zabc", Gi, C)
    Ck = 0.5 * (np.einsum("zdcbk->zdbck", ddG) + ddG - np.einsum("zbcdk->zdbck", ddG))
    # d_k Gamma^a_bc = g^ad (d_k C_dbc - d_k g_df Gamma^f_bc)
    dGam = np.einsum("zad,zdbck->zabck", Gi, Ck - np.einsum("zdfk,zfbc->zdbck", dG, Gam))
    R = (
        np.einsum("zadbc->zabcd", dGam)
        - np.einsum("zacbd->zabcd", dGam)
        + np.einsum("zace,zedb->zabcd", Gam, Gam)
        - np.einsum("zade,zecb->zabcd", Gam, Gam)
    )
    return np.einsum("zae,zebcd->zabcd", G, R)


def sphere_chart_metric(y) -> np.ndarray:
    """Round unit-sphere metric in stereographic coordinates, 4/(1+|y|^2)^2 delta."""
    y = np.atleast_2d(np.asarray(y, dtype=float))
    f = 4.0 / (1.0 + np.sum(y * y, axis=-1)) ** 2
    return f[:, None, None] * np.eye(y.shape[-1])


def flat_metric(y) -> np.ndarray:
    y = np.atleast_2d(np.asarray(y, dtype=float))
    return np.broadcast_to(np.eye(y.shape[-1]), y.shape + (y.shape[-1],)).copy()


def ricci_from_riemann(Rlow, G) -> np.ndarray:
    """Ric_{bd} = g^{ac} R_{abcd}."""
    Gi = np.linalg.inv(G)
    return np.einsum("zac,zabcd->zbd", Gi, Rlow)


# ---------------------------------------------------------------------------
# distance upper bounds

def straight_length(m, action: CircleAction, a: float, nodes: int = 64) -> np.ndarray:
    """g_a-length of c(t) = t m, t in [0, 1], by Gauss-Legendre quadrature."""
    m = np.atleast_2d(np.asarray(m, dtype=float))
    t, w = np.polynomial.legendre.leggauss(nodes)
    t = 0.5 * (t + 1.0)
    w = 0.5 * w
    pts = (t[None, :, None] * m[:, None, :]).reshape(-1, m.shape[-1])
    G = deformed_metric(action, a, pts).reshape(m.shape[0], nodes, m.shape[-1], m.shape[-1])
    speed2 = np.einsum("bnij,bi,bj->bn", G, m, m)
    return np.sqrt(np.maximum(speed2, 0.0)) @ w


def straight_length_closed_form(m, action: CircleAction, a: float) -> np.ndarray:
    """int_0^1 sqrt(rho^2 + 4 a^2 t^2 |x|^2) dt."""
    m = np.atleast_2d(np.asarray(m, dtype=float))
    c = np.linalg.norm(m, axis=-1)
    b = 2.0 * a * np.linalg.norm(moment_map(action, m), axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        val = 0.5 * np.sqrt(c**2 + b**2) + np.where(b > 0, c**2 / (2 * b) * np.arcsinh(b / np.where(c > 0, c, 1)), 0.5 * c)
    return np.where(b > 0, val, c)


def horizontal_lift(p0, xpath, dxpath, s_grid, action: CircleAction, a: float):
    """RK4 lift of a path s -> x(s) in the moment image starting from p0.

    The velocity -V sum_j x_j'(s) I_j T moves mu along the path and has no
    T or horizontal component, so its g_a speed is sqrt(V + a^2) |x'(s)|.
    Returns the end point and the accumulated g_a length.
    """
    p = np.atleast_2d(np.asarray(p0, dtype=float)).copy()
    Is = complex_structures(action.n)
    length = np.zeros(p.shape[0])

    def vel(q, s):
        T = circle_generator(action, q)
        V = 1.0 / np.sum(T * T, axis=-1)
        IT = np.einsum("jab,zb->zja", Is, T)
        xd = dxpath(s)
        return -V[:, None] * np.einsum("zj,zja->za", xd, IT)

    def speed(q, s):
        T = circle_generator(action, q)
        V = 1.0 / np.sum(T * T, axis=-1)
        return np.sqrt(V + a * a) * np.linalg.norm(dxpath(s), axis=-1)

    for s0, s1 in zip(s_grid[:-1], s_grid[1:]):
        h = s1 - s0
        k1 = vel(p, s0)
        k2 = vel(p + 0.5 * h * k1, s0 + 0.5 * h)
        k3 = vel(p + 0.5 * h * k2, s0 + 0.5 * h)
        k4 = vel(p + h * k3, s1)
        # Simpson rule for the length, using the RK midpoint estimate
        pm = p + 0.25 * h * (k1 + k2)
        p_new = p + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        length += abs(h) / 6.0 * (speed(p, s0) + 4.0 * speed(pm, s0 + 0.5 * h) + speed(p_new, s1))
        p = p_new
    return p, length


def composite_length(m, action: CircleAction, a: float, steps: int = 400, sigma_end: float = 1e-4):
    """Level-set lift of x(sigma) = sigma^2 mu(m) down to sigma_end, then a straight segment."""
    m = np.atleast_2d(np.asarray(m, dtype=float))
    x = moment_map(action, m)
    sig = np.geomspace(1.0, sigma_end, steps)
    xpath = lambda s: (s * s) * x  # noqa: E731
    dxpath = lambda s: (2.0 * s) * x  # noqa: E731
    ok = np.linalg.norm(x, axis=-1) > 0
    out = np.full(m.shape[0], np.inf)
    if np.any(ok):
        end, L = horizontal_lift(m[ok], lambda s: xpath(s)[ok], lambda s: dxpath(s)[ok], sig, action, a)
        out[ok] = L + straight_length(end, action, a)
    return out


def distance_upper(m, action: CircleAction, a: float, cfg: FlowConfig = DEFAULT_CONFIG) -> np.ndarray:
    """Upper bound on the g_a distance to the vertex: min over two curve families."""
    m = np.atleast_2d(np.asarray(m, dtype=float))
    straight = straight_length(m, action, a)
    if a == 0:
        return straight
    return np.minimum(straight, composite_length(m, action, a))


# ---------------------------------------------------------------------------
# volume growth

@dataclass(frozen=True)
class VolumeEstimate:
    R: float
    volume: float
    stderr: float
    samples: int
    seed: int
    hits: int


def volume_density(action: CircleAction, a: float, m) -> np.ndarray:
    """sqrt(det g_a) = 1 + a^2 |T|^2 (eigenvalues 1 + a^2|T|^2 on I_iT, its inverse on T)."""
    T = circle_generator(action, m)
    return 1.0 + a * a * np.sum(T * T, axis=-1)


def _unit_ball_chunk(seed: int, chunk: int, size: int, dim: int) -> np.ndarray:
    bitgen = np.random.Philox(key=np.array([seed, 0], dtype=np.uint64),
                              counter=np.array([0, 0, 0, chunk], dtype=np.uint64))
    rng = np.random.Generator(bitgen)
    g = rng.standard_normal((size, dim))
    u = rng.random(size)
    return g / np.linalg.norm(g, axis=-1, keepdims=True) * (u ** (1.0 / dim))[:, None]


def _unit_sphere_chunk(seed: int, chunk: int, size: int, dim: int) -> np.ndarray:
    bitgen = np.random.Philox(key=np.array([seed, 1], dtype=np.uint64),
                              counter=np.array([0, 0, 0, chunk], dtype=np.uint64))
    g = np.random.Generator(bitgen).standard_normal((size, dim))
    return g / np.linalg.norm(g, axis=-1, keepdims=True)


def _pairwise_sum(vals: list) -> float:
    vals = list(vals)
    while len(vals) > 1:
        nxt = [vals[i] + vals[i + 1] for i in range(0, len(vals) - 1, 2)]
        if len(vals) % 2:
            nxt.append(vals[-1])
        vals = nxt
    return vals[0] if vals else 0.0


def unit_ball_volume(dim: int) -> float:
    return math.pi ** (dim / 2) / math.gamma(dim / 2 + 1)


def _radial_extent_sq(Q, R2):
    """t^2 solving t^2/2 + t^4 Q = R^2, written without cancellation."""
    return 2.0 * R2 / (0.5 + np.sqrt(0.25 + 4.0 * Q * R2))


def _enclosing_radius(action: CircleAction, a: float, R: float) -> float:
    """Coordinate radius containing {K_1^a <= R^2}.

    Q >= a^2 |x|^2 / 2 on the unit sphere; for n = 1 |x| = |weight| / 2 there,
    otherwise |x| can vanish and the bound falls back to sqrt(2) R.
    """
    q_low = 0.0
    if action.n == 1:
        q_low = 0.5 * a * a * (abs(action.weights[0]) / 2.0) ** 2
    return math.sqrt(float(_radial_extent_sq(q_low, R * R)))


def _chunk_values(action: CircleAction, a: float, radii, seed: int, chunk: int, size: int,
                  method: str) -> tuple[np.ndarray, np.ndarray]:
    """Per-sample volume contributions (size, len(radii)) and hit flags."""
    d = action.dim
    radii = np.asarray(radii, dtype=float)
    if method == "box":
        vals = np.empty((size, radii.size))
        hits = np.empty((size, radii.size), dtype=bool)
        u = _unit_ball_chunk(seed, chunk, size, d)
        for k, R in enumerate(radii):
            rmax = _enclosing_radius(action, a, R)
            pts = rmax * u
            inside = potential_K1a(action, a, pts) <= R * R
            vals[:, k] = np.where(inside, volume_density(action, a, pts), 0.0) * unit_ball_volume(d) * rmax**d
            hits[:, k] = inside
        return vals, hits
    if method == "radial":
        w = _unit_sphere_chunk(seed, chunk, size, d)
        x = moment_map(action, w)
        Q = a * a * (x[:, 0] ** 2 + 0.5 * (x[:, 1] ** 2 + x[:, 2] ** 2))
        T2 = np.sum(circle_generator(action, w) ** 2, axis=-1)
        t2 = _radial_extent_sq(Q[:, None], (radii**2)[None, :])
        radial = t2 ** (d / 2) / d + a * a * T2[:, None] * t2 ** (d / 2 + 1) / (d + 2)
        return d * unit_ball_volume(d) * radial, np.ones_like(radial, dtype=bool)
    raise ValueError(f"unknown method {method!r}")


def volume_estimates(action: CircleAction, a: float, radii, samples: int, seed: int,
                     method: str = "radial", chunk_size: int = 200_000) -> list[VolumeEstimate]:
    """Monte Carlo volume of {K_1^a <= R^2} in the metric g_a for each R.

    All radii share the same random numbers.  method="box": uniform samples in
    a coordinate ball containing the proxy ball (radius sqrt(2) R, or smaller
    when a lower bound on |x| is known).  method="radial": uniform directions
    with the radial integral done exactly; along a ray
    K_1^a(t w) = t^2/2 + t^4 Q(w) is increasing in t and the density is
    1 + a^2 t^2 |T(w)|^2.
    """
    if samples < 1:
        raise ValueError("samples must be positive")
    radii = np.atleast_1d(np.asarray(radii, dtype=float))
    nchunks = -(-samples // chunk_size)
    s1, s2, hits = [], [], np.zeros(radii.size, dtype=np.int64)
    for c in range(nchunks):
        size = min(chunk_size, samples - c * chunk_size)
        vals, h = _chunk_values(action, a, radii, seed, c, size, method)
        s1.append(vals.sum(axis=0))
        s2.append((vals * vals).sum(axis=0))
        hits += h.sum(axis=0)
    mean = _pairwise_sum(s1) / samples
    var = np.maximum(_pairwise_sum(s2) / samples - mean * mean, 0.0)
    out = []
    for k, R in enumerate(radii):
        if hits[k] < 100:
            logger.warning("only %d effective samples at R=%g", hits[k], R)
        out.append(VolumeEstimate(R=float(R), volume=float(mean[k]), stderr=float(math.sqrt(var[k] / samples)),
                                  samples=samples, seed=seed, hits=int(hits[k])))
    return out


def volume_estimate(action: CircleAction, a: float, R: float, samples: int, seed: int,
                    method: str = "radial") -> VolumeEstimate:
    return volume_estimates(action, a, [R], samples, seed, method)[0]


def volume_growth(action: CircleAction, a: float, radii, samples: int, seed: int, method: str = "radial"):
    """Log-log slope of the proxy-ball volume over radii, with the estimates."""
    radii = np.asarray(radii, dtype=float)
    if radii.size < 4 or np.any(np.diff(radii) <= 0) or radii[0] <= 0:
        raise ValueError("need at least four increasing positive radii")
    est = volume_estimates(action, a, radii, samples, seed, method)
    V = np.array([e.volume for e in est])
    if np.any(V <= 0):
        raise ValueError("a volume estimate is zero; increase samples")
    # weighted by the relative standard errors, which grow with R for n >= 2
    rel = np.array([e.stderr for e in est]) / V
    w = 1.0 / np.maximum(rel, 1e-6 * max(rel.max(), 1e-300) + 1e-12)
    slope = float(np.polyfit(np.log(radii), np.log(V), 1, w=w)[0])
    return slope, est


# ---------------------------------------------------------------------------
# rescaled distance comparisons

def level_point(action: CircleAction, x) -> np.ndarray:
    """A point of mu^{-1}(x) for n = 1 standard weights: q_x (sqrt(2|x|), 0, 0, 0)."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    r = np.linalg.norm(x, axis=-1)
    base = np.zeros((x.shape[0], action.dim))
    base[:, 0] = np.sqrt(2.0 * r / action.weights[0])
    return sp1_act_array(rotation_to_axis(x), base)


def pair_distance_upper(p1, p2, action: CircleAction, a: float, steps: int = 2000):
    """Upper bound on d_{g_a}(p1, p2), the least of three curve lengths:
    the lift of the straight moment path from p1 closed up by the shorter
    circle arc (n = 1, where each level is one orbit) or a straight chord
    (n >= 2); the direct chord; two straight segments through the vertex.
    The lift is skipped when the moment path passes close to x = 0."""
    p1 = np.atleast_2d(np.asarray(p1, dtype=float))
    p2 = np.atleast_2d(np.asarray(p2, dtype=float))
    x1 = moment_map(action, p1)
    x2 = moment_map(action, p2)
    dx = x2 - x1
    best = np.minimum(_chord_length(p1, p2, action, a),
                      straight_length(p1, action, a) + straight_length(p2, action, a))
    # closest approach of the segment x1 + s dx to the origin
    s_star = np.clip(-np.sum(x1 * dx, axis=-1) / np.maximum(np.sum(dx * dx, axis=-1), 1e-300), 0.0, 1.0)
    clearance = np.linalg.norm(x1 + s_star[:, None] * dx, axis=-1)
    ok = clearance > 0.05 * np.linalg.norm(dx, axis=-1)
    if not np.any(ok):
        return best
    s = np.linspace(0.0, 1.0, steps + 1)
    x1o, dxo = x1[ok], dx[ok]
    end, L = horizontal_lift(p1[ok], lambda t: x1o + t * dxo, lambda t: dxo, s, action, a)
    miss = np.linalg.norm(moment_map(action, end) - x2[ok], axis=-1)
    if action.n == 1:
        close = np.array([_orbit_arc(e, q, action, a) for e, q in zip(end, p2[ok])])
    else:
        close = _chord_length(end, p2[ok], action, a)
    lift = np.where(miss <= 1e-8 * np.maximum(1.0, np.linalg.norm(x2[ok], axis=-1)), L + close, np.inf)
    best[ok] = np.minimum(best[ok], lift)
    return best


def _orbit_arc(e, q, action, a):
    """g_a length of the shorter orbit arc from e to q (same orbit, n = 1)."""
    T = circle_generator(action, e[None])[0]
    theta = math.atan2(float(T @ q) / np.linalg.norm(T), float(e @ q) / np.linalg.norm(e))
    t = theta / abs(action.weights[0])
    g = deformed_metric(action, a, e[None])[0]
    return abs(t) * math.sqrt(float(T @ g @ T))


def _chord_length(p, q, action, a, nodes=64):
    t, w = np.polynomial.legendre.leggauss(nodes)
    t = 0.5 * (t + 1.0)
    w = 0.5 * w
    d = q - p
    pts = (p[:, None, :] + t[None, :, None] * d[:, None, :]).reshape(-1, p.shape[-1])
    G = deformed_metric(action, a, pts).reshape(p.shape[0], nodes, p.shape[-1], p.shape[-1])
    sp = np.sqrt(np.einsum("bnij,bi,bj->bn", G, d, d))
    return sp @ w


@dataclass(frozen=True)
class GHRow:
    lam: float
    scaled_upper: float
    model: float
    gap: float


def gh_probe(pairs, lambdas, action: CircleAction, a: float, steps: int = 2000):
    """Compare lam * d_upper(points at scale 1/lam) with a |dq| for pairs of moment values.

    ``pairs`` is a sequence of (q1, q2) moment vectors; the points are taken on
    the levels q/lam (for n = 1 each level is a single circle).
    """
    rows = []
    for lam in lambdas:
        ups, models = [], []
        for q1, q2 in pairs:
            q1 = np.asarray(q1, dtype=float)
            q2 = np.asarray(q2, dtype=float)
            p1 = level_point(action, q1 / lam)
            p2 = level_point(action, q2 / lam)
            ups.append(lam * float(pair_distance_upper(p1, p2, action, a, steps)[0]))
            models.append(a * float(np.linalg.norm(q1 - q2)))
        ups, models = np.array(ups), np.array(models)
        gap = float(np.max((ups - models) / models))
        rows.append(GHRow(lam=float(lam), scaled_upper=float(ups.max()), model=float(models.max()), gap=gap))
    return rows
