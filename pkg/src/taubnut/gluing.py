"""Plurisubharmonic cutoffs and the glued Kaehler form on M = H^n \\ {0}.

The stand-in target is Y = M with trivial finite group.  Every form is
evaluated in the deformed chart p = Phi_a^{-1}(m), where K_ALF becomes K_1^a,
the pulled-back complex structure is I_1^a and (Phi_a^{-1})^* omega_1^a becomes
omega_1^a.  Positivity, volume ratios and closedness are invariant under this
biholomorphic change of coordinates, and the chart keeps large K_ALF finite:
Phi_a grows like exp(a^2 x1), which overflows long before K_1^a does.

Every summand of omega_hat is i ddbar of a function F(K) of the potential,
so its spectrum against omega_1^a is F' and F' + F'' |dK|^2 / 2.  The matrix
assembly is kept alongside and agrees with the closed-form spectrum; the
closed form stays accurate at large K where g_a is badly conditioned.

Scalar helpers carry (value, gradient, i ddbar) with i ddbar f = 1/2 dd^c f,
stored as 2-form matrices W with w(X, Y) = X^T W Y.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import fd
from .cone import CircleAction, circle_generator, moment_map
from .deformation import (
    dc,
    deformed_structure,
    grad_K1a,
    hermitian_part,
    potential_K1a,
    wedge,
)
from .flows import (
    DEFAULT_CONFIG,
    FlowConfig,
    phi_a_inverse,
    phi_a_inverse_jacobian,
)

REGION_NAMES = {
    1: "K < 2R",
    2: "2R <= K <= 3R",
    3: "3R < K < 2SR",
    4: "2SR <= K <= 3SR",
    5: "K > 3SR",
}


class GluingError(ValueError):
    """Invalid configuration or a failed positivity search."""


# ---------------------------------------------------------------------------
# one-variable profiles


def smoothing_psi(t, deriv: int = 0):
    """C^2 profile: 3 for t < 2, t for t > 4, psi' and psi'' >= 0.

    On [2, 4] with s = (t - 2)/2: psi = 3 + 2(s^6 - 3s^5 + 5s^4/2), so that
    psi' is the quintic smoothstep of s and psi'' = 15 s^2 (1 - s)^2 >= 0.
    """
    t = np.asarray(t, dtype=float)
    s = np.clip((t - 2.0) / 2.0, 0.0, 1.0)
    if deriv == 0:
        mid = 3.0 + 2.0 * (s**6 - 3.0 * s**5 + 2.5 * s**4)
        return np.where(t < 2.0, 3.0, np.where(t > 4.0, t, mid))
    if deriv == 1:
        return s**3 * (10.0 - 15.0 * s + 6.0 * s**2)
    if deriv == 2:
        return 15.0 * s**2 * (1.0 - s) ** 2
    raise ValueError("deriv must be 0, 1 or 2")


def chi(t, R: float, deriv: int = 0):
    """Quintic smoothstep from 0 (t < 2R) to 1 (t > 3R)."""
    t = np.asarray(t, dtype=float)
    s = np.clip((t - 2.0 * R) / R, 0.0, 1.0)
    if deriv == 0:
        return s**3 * (10.0 - 15.0 * s + 6.0 * s**2)
    if deriv == 1:
        return 30.0 * s**2 * (1.0 - s) ** 2 / R
    if deriv == 2:
        return 60.0 * s * (1.0 - s) * (1.0 - 2.0 * s) / R**2
    raise ValueError("deriv must be 0, 1 or 2")


def bump(s, deriv: int = 0):
    """exp(1 - 1/(1 - s)) for s < 1 and 0 beyond; equals 1 at s = 0."""
    s = np.asarray(s, dtype=float)
    inside = s < 1.0
    u = np.where(inside, 1.0 - s, 1.0)
    b = np.where(inside, np.exp(1.0 - 1.0 / u), 0.0)
    if deriv == 0:
        return b
    if deriv == 1:
        return -b / u**2
    if deriv == 2:
        return b * (1.0 / u**4 - 2.0 / u**3)
    raise ValueError("deriv must be 0, 1 or 2")


# ---------------------------------------------------------------------------
# scalar fields with gradient and i ddbar


@dataclass(frozen=True)
class Scalar:
    value: np.ndarray   # (B,)
    grad: np.ndarray    # (B, d)
    omega: np.ndarray   # (B, d, d), i ddbar = 1/2 dd^c

    def compose(self, F0, F1, F2, I) -> "Scalar":
        """F(u): i ddbar F(u) = F' i ddbar u + 1/2 F'' du ^ d^c u."""
        c = dc(I, self.grad)
        w = wedge(self.grad, c)
        return Scalar(
            value=F0,
            grad=F1[:, None] * self.grad,
            omega=F1[:, None, None] * self.omega + 0.5 * F2[:, None, None] * w,
        )

    def pullback(self, D) -> "Scalar":
        """Pull back along a map with Jacobian D (B, d, d)."""
        return Scalar(
            value=self.value,
            grad=np.einsum("bki,bk->bi", D, self.grad),
            omega=np.swapaxes(D, -1, -2) @ self.omega @ D,
        )


def chart_potential(action: CircleAction, a: float, p) -> tuple[Scalar, np.ndarray]:
    """K_1^a at chart points with its i ddbar (= omega_1^a), and I_1^a."""
    p = np.atleast_2d(action.check_dim(p))
    S = deformed_structure(action, a, p)
    K = Scalar(potential_K1a(action, a, p), grad_K1a(action, a, p), S.omega[:, 0])
    return K, S.I[:, 0]


# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class BumpSpec:
    """Stand-in potential v = A bump(K_ALF / r_b) - eps_Y K_ALF.

    omega_Y = -i ddbar v = eps_Y (Phi_a^{-1})^* omega_1^a - A i ddbar bump.
    support = None uses r_b = R, so the bump lives in the inner region.
    eps_Y = None picks 1.5 times the largest eigenvalue of A i ddbar bump
    relative to (Phi_a^{-1})^* omega_1^a, which keeps omega_Y positive.
    """
    amplitude: float = 1.0
    support: float | None = None
    eps_Y: float | None = None

    def __post_init__(self):
        if self.support is not None and self.support <= 0:
            raise GluingError("bump support radius must be positive")
        if self.eps_Y is not None and self.eps_Y <= 0:
            raise GluingError("eps_Y must be positive")


@dataclass(frozen=True)
class GluingConfig:
    """Parameters of omega_hat = omega_Y + i ddbar(zeta v) + C i ddbar((1 - zeta_S) h_alpha) + c i ddbar h_1.

    bump = None selects the trivial stand-in: v = 0 and omega_Y = c (Phi_a^{-1})^* omega_1^a.
    """
    n: int = 1
    weights: tuple | None = None
    a: float = 1.0
    c: float = 1.0
    alpha: float = 0.6
    R: float = 1000.0
    S: float = 4.0
    C_glue: float = 1.0
    bump: BumpSpec | None = BumpSpec()

    def __post_init__(self):
        if self.a <= 0 or self.c <= 0:
            raise GluingError("a and c must be positive")
        if not 0.0 < self.alpha < 1.0:
            raise GluingError("alpha must lie in (0, 1)")
        if self.C_glue < 0:
            raise GluingError("C_glue must be nonnegative")
        if self.S <= 2.0:
            raise GluingError("S must exceed 2")
        if not 0.0 < 2 * self.R < 3 * self.R < 2 * self.S * self.R < 3 * self.S * self.R:
            raise GluingError("region ordering 0 < 2R < 3R < 2SR < 3SR violated")
        if self.R < 4.0 ** (1.0 / self.alpha):
            raise GluingError("R must be at least 4^(1/alpha) so that h_alpha = K^alpha for K > R")
        if self.weights is not None and len(self.weights) != self.n:
            raise GluingError("weights length must equal n")

    @property
    def action(self) -> CircleAction:
        return CircleAction(self.weights if self.weights is not None else (1,) * self.n)

    def with_(self, **kw) -> "GluingConfig":
        return replace(self, **kw)


# ---------------------------------------------------------------------------
# K_ALF on M


def k_alf(m, action: CircleAction, a: float, cfg: FlowConfig = DEFAULT_CONFIG) -> np.ndarray:
    """K_1^a(Phi_a^{-1}(m))."""
    return potential_K1a(action, a, phi_a_inverse(m, action, a, cfg))


def k_alf_scalar(m, action: CircleAction, a: float, cfg: FlowConfig = DEFAULT_CONFIG) -> Scalar:
    """K_ALF with its gradient and i ddbar = J^T omega_1^a J on M."""
    m = np.atleast_2d(action.check_dim(m))
    p, J = phi_a_inverse_jacobian(m, action, a, cfg)
    K, _ = chart_potential(action, a, p)
    return K.pullback(J)


def k_alf_ddc_residual(m, action: CircleAction, a: float, cfg: FlowConfig = DEFAULT_CONFIG,
                       rel_step: float = 1e-3) -> float:
    """max |1/2 dd^c_{I1} K_ALF (finite differences) - (Phi_a^{-1})^* omega_1^a|, scaled by |omega|."""
    m = np.atleast_2d(action.check_dim(m))
    I1 = action.structures[0]

    def beta(y):
        return dc(I1, k_alf_scalar(y, action, a, cfg).grad)

    W_fd = 0.5 * fd.exterior_derivative_1form(beta, m, h=fd.default_step(m, rel_step))
    W = k_alf_scalar(m, action, a, cfg).omega
    scale = np.max(np.abs(W), axis=(-1, -2))
    return float(np.max(np.max(np.abs(W_fd - W), axis=(-1, -2)) / scale))


# ---------------------------------------------------------------------------
# cutoff profiles as functions of K; each returns (F, F', F'')


def psi_power_profile(K, alpha: float):
    """h_alpha = psi(K^alpha); alpha = 1 gives h_1."""
    K = np.asarray(K, dtype=float)
    Ka = K**alpha
    d1 = alpha * K ** (alpha - 1.0)
    d2 = alpha * (alpha - 1.0) * K ** (alpha - 2.0)
    return (smoothing_psi(Ka), smoothing_psi(Ka, 1) * d1,
            smoothing_psi(Ka, 2) * d1**2 + smoothing_psi(Ka, 1) * d2)


def cut_profile(K, alpha: float, S: float, R: float):
    """(1 - chi(K/S)) psi(K^alpha)."""
    F0, F1, F2 = psi_power_profile(K, alpha)
    x = np.asarray(K, dtype=float) / S
    c0, c1, c2 = chi(x, R), chi(x, R, 1) / S, chi(x, R, 2) / S**2
    return ((1.0 - c0) * F0, -c1 * F0 + (1.0 - c0) * F1,
            -c2 * F0 - 2.0 * c1 * F1 + (1.0 - c0) * F2)


def bump_profile(K, r_b: float):
    x = np.asarray(K, dtype=float) / r_b
    return bump(x), bump(x, 1) / r_b, bump(x, 2) / r_b**2


def _product(f, g):
    return (f[0] * g[0], f[1] * g[0] + f[0] * g[1], f[2] * g[0] + 2.0 * f[1] * g[1] + f[0] * g[2])


def _scaled(f, s):
    return tuple(s * x for x in f)


def _linear(K, s):
    K = np.asarray(K, dtype=float)
    return s * K, np.full_like(K, s), np.zeros_like(K)


def h_alpha_fn(m, action: CircleAction, a: float, alpha: float,
               cfg: FlowConfig = DEFAULT_CONFIG) -> np.ndarray:
    return smoothing_psi(k_alf(m, action, a, cfg) ** alpha)


def h_alpha_form(m, action: CircleAction, a: float, alpha: float,
                 cfg: FlowConfig = DEFAULT_CONFIG) -> np.ndarray:
    """i ddbar h_alpha on M."""
    K = k_alf_scalar(m, action, a, cfg)
    return K.compose(*psi_power_profile(K.value, alpha), action.structures[0]).omega


def support_radius(cfg: GluingConfig) -> float:
    return cfg.R if cfg.bump.support is None else cfg.bump.support


def grad_norm_sq(action: CircleAction, a: float, p) -> np.ndarray:
    """|dK_1^a|^2 in g_a, in closed form.

    In the Euclidean-orthonormal frame (T, I_i T)/|T| plus horizontal vectors
    g_a is diagonal with entries 1/(1 + a^2|T|^2), 1 + a^2|T|^2 (three times)
    and 1.  dK vanishes on T, equals -(2 + c_i a^2|T|^2) x_i / |T| on
    I_i T/|T| with c = (2, 1, 1), and its horizontal part is that of m.
    """
    p = np.atleast_2d(action.check_dim(p))
    x = moment_map(action, p)
    t2 = np.sum(circle_generator(action, p) ** 2, axis=-1)
    r2 = np.sum(p * p, axis=-1)
    cw = np.array([2.0, 1.0, 1.0])
    vert = np.sum((2.0 + cw * a * a * t2[:, None]) ** 2 * x**2, axis=-1) / (t2 * (1.0 + a * a * t2))
    horiz = np.maximum(r2 - 4.0 * np.sum(x * x, axis=-1) / t2, 0.0)
    return horiz + vert


def relative_spectrum(F1, F2, q):
    """Eigenvalues of herm(i ddbar F(K)) against g_a: F' (4n - 2 times) and F' + F'' q / 2."""
    return np.asarray(F1), np.asarray(F1) + 0.5 * np.asarray(F2) * q


def region_of(K, cfg: GluingConfig) -> np.ndarray:
    K = np.asarray(K, dtype=float)
    R, S = cfg.R, cfg.S
    return np.select(
        [K < 2 * R, K <= 3 * R, K < 2 * S * R, K <= 3 * S * R],
        [1, 2, 3, 4],
        default=5,
    )


# ---------------------------------------------------------------------------
# the glued form


@dataclass(frozen=True)
class OmegaHat:
    omega: np.ndarray       # (B, d, d) in the chart
    reference: np.ndarray   # c omega_1^a in the chart
    I: np.ndarray           # I_1^a in the chart
    K: np.ndarray
    region: np.ndarray


class GluedForm:
    """omega_hat for one configuration, evaluated in the deformed chart.

    Every summand is i ddbar of a function of K, so the form is determined by
    the one-variable profiles returned by ``profiles``.
    """

    def __init__(self, cfg: GluingConfig, flow_cfg: FlowConfig = DEFAULT_CONFIG):
        self.cfg = cfg
        self.action = cfg.action
        self.flow_cfg = flow_cfg
        self.eps_Y = None if cfg.bump is None else auto_eps_Y(cfg)

    def profiles(self, K) -> dict:
        cfg = self.cfg
        K = np.asarray(K, dtype=float)
        if cfg.bump is None:
            Y = _linear(K, cfg.c)
            zv = (np.zeros_like(K),) * 3
        else:
            b = _scaled(bump_profile(K, support_radius(cfg)), cfg.bump.amplitude)
            e = _linear(K, self.eps_Y)
            v = tuple(x - y for x, y in zip(b, e))
            Y = _scaled(v, -1.0)
            zv = _product((chi(K, cfg.R), chi(K, cfg.R, 1), chi(K, cfg.R, 2)), v)
        return {
            "Y": Y,
            "zeta_v": zv,
            "C_cut": _scaled(cut_profile(K, cfg.alpha, cfg.S, cfg.R), cfg.C_glue),
            "c_h1": _scaled(psi_power_profile(K, 1.0), cfg.c),
        }

    def total_profile(self, K):
        parts = self.profiles(K).values()
        return tuple(sum(p[i] for p in parts) for i in range(3))

    def terms(self, p) -> dict:
        K, I = chart_potential(self.action, self.cfg.a, p)
        return {k: K.compose(*f, I).omega for k, f in self.profiles(K.value).items()}

    def at_chart(self, p) -> OmegaHat:
        K, I = chart_potential(self.action, self.cfg.a, p)
        W = K.compose(*self.total_profile(K.value), I).omega
        return OmegaHat(W, self.cfg.c * K.omega, I, K.value, region_of(K.value, self.cfg))

    def spectrum(self, p):
        """(K, smallest eigenvalue of omega_hat relative to c omega_1^a) by the closed form."""
        p = np.atleast_2d(p)
        K = potential_K1a(self.action, self.cfg.a, p)
        _, F1, F2 = self.total_profile(K)
        q = grad_norm_sq(self.action, self.cfg.a, p)
        lo, hi = relative_spectrum(F1, F2, q)
        return K, np.minimum(lo, hi) / self.cfg.c

    def at_points(self, m) -> tuple[np.ndarray, np.ndarray]:
        """omega_hat on M at points m with its region tags."""
        m = np.atleast_2d(self.action.check_dim(m))
        p, J = phi_a_inverse_jacobian(m, self.action, self.cfg.a, self.flow_cfg)
        oh = self.at_chart(p)
        return np.swapaxes(J, -1, -2) @ oh.omega @ J, oh.region

    def field(self, p) -> np.ndarray:
        return self.at_chart(p).omega


def omega_hat(m, cfg: GluingConfig, flow_cfg: FlowConfig = DEFAULT_CONFIG):
    return GluedForm(cfg, flow_cfg).at_points(m)


def _relative_eigenvalues(W, ref, I) -> np.ndarray:
    """Generalized eigenvalues of herm(W) against herm(ref), ascending."""
    H = hermitian_part(W, I)
    Hr = hermitian_part(ref, I)
    L = np.linalg.cholesky(0.5 * (Hr + np.swapaxes(Hr, -1, -2)))
    Li = np.linalg.inv(L)
    M = Li @ H @ np.swapaxes(Li, -1, -2)
    return np.linalg.eigvalsh(0.5 * (M + np.swapaxes(M, -1, -2)))


def relative_min_eigenvalue(W, ref, I) -> np.ndarray:
    return _relative_eigenvalues(W, ref, I)[..., 0]


def relative_max_eigenvalue(W, ref, I) -> np.ndarray:
    return _relative_eigenvalues(W, ref, I)[..., -1]


def relative_max_abs_eigenvalue(W, ref, I) -> np.ndarray:
    return np.max(np.abs(_relative_eigenvalues(W, ref, I)), axis=-1)


def auto_eps_Y(cfg: GluingConfig, samples: int = 4000, seed: int = 0) -> float:
    """1.5 x the largest eigenvalue of A i ddbar bump against i ddbar K_ALF on the support."""
    if cfg.bump.eps_Y is not None:
        return cfg.bump.eps_Y
    r_b = support_radius(cfg)
    K = r_b * (np.arange(samples) + 0.5) / samples
    p = _points_with_K(cfg, K, seed, 7)
    _, F1, F2 = _scaled(bump_profile(K, r_b), cfg.bump.amplitude)
    lo, hi = relative_spectrum(F1, F2, grad_norm_sq(cfg.action, cfg.a, p))
    top = np.max(np.maximum(lo, hi))
    return 1.5 * max(float(top), 0.0) + 1e-3


# ---------------------------------------------------------------------------
# sampling by region


def _radial_scale_for_K(action: CircleAction, a: float, u, K):
    """t with K_1^a(t u) = K for unit u: Q t^4 + t^2/2 = K."""
    x = moment_map(action, u)
    Q = a * a * (x[:, 0] ** 2 + 0.5 * (x[:, 1] ** 2 + x[:, 2] ** 2))
    t2 = 2.0 * K / (0.5 + np.sqrt(0.25 + 4.0 * Q * K))
    return np.sqrt(t2)


def _points_with_K(cfg: GluingConfig, K, seed: int, stream: int) -> np.ndarray:
    rng = np.random.Generator(np.random.Philox(key=[seed, stream]))
    u = rng.standard_normal((np.size(K), cfg.action.dim))
    u /= np.linalg.norm(u, axis=-1, keepdims=True)
    return _radial_scale_for_K(cfg.action, cfg.a, u, np.asarray(K, dtype=float))[:, None] * u


def region_bounds(cfg: GluingConfig, region: int, k_min: float = 0.05, outer: float = 3.0):
    R, S = cfg.R, cfg.S
    return {
        1: (k_min, 2 * R),
        2: (2 * R, 3 * R),
        3: (3 * R, 2 * S * R),
        4: (2 * S * R, 3 * S * R),
        5: (3 * S * R * (1 + 1e-9), outer * 3 * S * R),
    }[region]


def sample_region(cfg: GluingConfig, region: int, size: int, seed: int = 0) -> np.ndarray:
    """Chart points with K_1^a log-uniform in the region's K range."""
    rng = np.random.Generator(np.random.Philox(key=[seed, 100 + region]))
    lo, hi = region_bounds(cfg, region)
    K = np.exp(rng.uniform(np.log(lo), np.log(hi), size))
    return _points_with_K(cfg, K, seed, region)


@dataclass(frozen=True)
class RegionPositivity:
    region: int
    samples: int
    min_eigenvalue: float     # relative to c omega_1^a


def positivity(cfg: GluingConfig, samples_per_region: int = 2000, seed: int = 0,
               regions=(1, 2, 3, 4, 5), form: GluedForm | None = None) -> list[RegionPositivity]:
    form = GluedForm(cfg) if form is None else form
    out = []
    for r in regions:
        _, lam = form.spectrum(sample_region(cfg, r, samples_per_region, seed))
        out.append(RegionPositivity(r, samples_per_region, float(np.min(lam))))
    return out


@dataclass(frozen=True)
class CSSelection:
    C_glue: float
    S: float
    history: tuple    # (parameter, value, region, min relative eigenvalue)


def select_CS(cfg: GluingConfig, samples: int = 2000, seed: int = 0, margin: float = 1e-6,
              max_doublings: int = 40, C_start: float = 1.0, S_start: float | None = None) -> CSSelection:
    """Doubling search on C (region 2) and then on S (regions 3 and 4).

    C = 0 is tried first.  Raises GluingError naming the region when the
    budget runs out.
    """
    hist = []

    def margin_of(c, regions):
        return min(r.min_eigenvalue for r in positivity(c, samples, seed, regions=regions))

    C = 0.0
    val = margin_of(cfg.with_(C_glue=C), (2,))
    hist.append(("C", C, 2, val))
    if val <= margin:
        C = C_start
        for _ in range(max_doublings):
            val = margin_of(cfg.with_(C_glue=C), (2,))
            hist.append(("C", C, 2, val))
            if val > margin:
                break
            C *= 2.0
        else:
            raise GluingError(f"C search exhausted on region {REGION_NAMES[2]}")
    S = cfg.S if S_start is None else S_start
    for _ in range(max_doublings):
        val = margin_of(cfg.with_(C_glue=C, S=S), (3, 4))
        hist.append(("S", S, 4, val))
        if val > margin:
            return CSSelection(C, S, tuple(hist))
        S *= 2.0
    raise GluingError(f"S search exhausted on region {REGION_NAMES[4]}")


def cutoff_decay(cfg: GluingConfig, S_values, samples: int = 2000, seed: int = 0):
    """max |i ddbar((1 - zeta_S) h_alpha)| against i ddbar h_1 on region 4 for each S.

    Returns (log-log slope, maxima).
    """
    S_values = np.asarray(S_values, dtype=float)
    vals = []
    for S in S_values:
        c = cfg.with_(S=float(S))
        p = sample_region(c, 4, samples, seed)
        K = potential_K1a(c.action, c.a, p)
        _, G1, G2 = cut_profile(K, c.alpha, c.S, c.R)
        lo, hi = relative_spectrum(G1, G2, grad_norm_sq(c.action, c.a, p))
        vals.append(float(np.max(np.maximum(np.abs(lo), np.abs(hi)))))
    vals = np.asarray(vals)
    slope = float(np.polyfit(np.log(S_values), np.log(vals), 1)[0])
    return slope, vals


# ---------------------------------------------------------------------------
# holomorphic volume and the Ricci potential


def pfaffian(A) -> np.ndarray:
    """Batched Pfaffian of antisymmetric (..., 2k, 2k) matrices (real or complex).

    Gaussian elimination in the congruence form with partial pivoting.
    """
    A = np.array(A, dtype=complex if np.iscomplexobj(A) else float, copy=True)
    shape = A.shape[:-2]
    n = A.shape[-1]
    if n % 2:
        return np.zeros(shape, dtype=A.dtype)
    A = A.reshape((-1, n, n))
    Bn = A.shape[0]
    pf = np.ones(Bn, dtype=A.dtype)
    idx = np.arange(Bn)
    for k in range(0, n - 1, 2):
        kp = k + 1 + np.argmax(np.abs(A[:, k + 1:, k]), axis=-1)
        swap = kp != k + 1
        if np.any(swap):
            b = idx[swap]
            r1 = np.full(b.shape, k + 1)
            r2 = kp[swap]
            rows1 = A[b, r1, :].copy()
            A[b, r1, :] = A[b, r2, :]
            A[b, r2, :] = rows1
            cols1 = A[b, :, r1].copy()
            A[b, :, r1] = A[b, :, r2]
            A[b, :, r2] = cols1
            pf[swap] *= -1
        piv = A[:, k, k + 1]
        zero = piv == 0
        pf = np.where(zero, 0, pf * piv)
        piv = np.where(zero, 1, piv)
        if k + 2 < n:
            tau = A[:, k, k + 2:] / piv[:, None]
            col = A[:, k + 2:, k + 1]
            A[:, k + 2:, k + 2:] += (np.einsum("bi,bj->bij", tau, col)
                                     - np.einsum("bi,bj->bij", col, tau))
    return pf.reshape(shape)


@dataclass(frozen=True)
class HolomorphicVolume:
    """Coefficient of Omega ^ conj(Omega) for Omega = (w2 + i w3)^n.

    With B = w2 + i w3, B^n ^ conj(B)^n = (n!)^2 [t^n] Pf(B + t conj B) times
    the Euclidean volume form; the coefficient is extracted with a discrete
    Fourier transform over roots of unity.
    """
    coefficient: np.ndarray

    @classmethod
    def from_forms(cls, W2, W3) -> "HolomorphicVolume":
        B = np.asarray(W2) + 1j * np.asarray(W3)
        n = B.shape[-1] // 4
        N = 2 * n + 1
        roots = np.exp(2j * np.pi * np.arange(N) / N)
        vals = np.stack([pfaffian(B + r * np.conj(B)) for r in roots], axis=-1)
        coef = np.sum(vals * roots ** (-n), axis=-1) / N
        val = math.factorial(n) ** 2 * coef
        return cls(val)

    @property
    def nonvanishing(self) -> bool:
        return bool(np.all(np.abs(self.coefficient) > 0))


def top_power_coefficient(W) -> np.ndarray:
    """w^{2n} / (2n)! as a multiple of the Euclidean volume form."""
    return pfaffian(W)


def flat_kappa(action: CircleAction) -> complex:
    """Omega ^ conj(Omega) over w_1^{2n}/(2n)! for the flat structure."""
    W = np.swapaxes(action.structures, -1, -2)
    vol = HolomorphicVolume.from_forms(W[1][None], W[2][None]).coefficient[0]
    return complex(vol / pfaffian(W[0][None])[0])


def ricci_potential_fhat(cfg: GluingConfig, p, form: GluedForm | None = None) -> np.ndarray:
    """log(Omega ^ conj Omega / (kappa (omega_hat / c)^{2n} / (2n)!)) at chart points p.

    Omega is pulled back to the chart, where it equals (w2^a + i w3^a)^n.
    kappa normalizes the flat structure to 0.  Rejects non-positive omega_hat.
    """
    form = GluedForm(cfg) if form is None else form
    p = np.atleast_2d(p)
    if np.any(form.spectrum(p)[1] <= 0):
        raise GluingError("omega_hat is not positive at some sample")
    oh = form.at_chart(p)
    S = deformed_structure(form.action, cfg.a, p)
    vol = HolomorphicVolume.from_forms(S.omega[:, 1], S.omega[:, 2]).coefficient
    top = top_power_coefficient(oh.omega / cfg.c)
    ratio = vol / (flat_kappa(form.action) * top)
    if np.any(np.abs(ratio.imag) > 1e-8 * np.abs(ratio.real)) or np.any(ratio.real <= 0):
        raise GluingError("volume ratio is not a positive real")
    return np.log(ratio.real)


def holomorphic_form_residual(m, action: CircleAction, a: float,
                              cfg: FlowConfig = DEFAULT_CONFIG) -> float:
    """max |(Phi_a^{-1})^*(w2^a + i w3^a) - (w2 + i w3)| at points m."""
    m = np.atleast_2d(action.check_dim(m))
    p, J = phi_a_inverse_jacobian(m, action, a, cfg)
    S = deformed_structure(action, a, p)
    Ba = S.omega[:, 1] + 1j * S.omega[:, 2]
    pulled = np.swapaxes(J, -1, -2) @ Ba @ J
    flat = action.structures[1].T + 1j * action.structures[2].T
    return float(np.max(np.abs(pulled - flat)))


# ---------------------------------------------------------------------------
# closedness and a cohomology check


def closedness_residual(form: GluedForm, p, rel_step: float = 1e-3) -> float:
    """max |d omega_hat| / max |omega_hat| at chart points, by finite differences."""
    p = np.atleast_2d(p)
    dW = fd.exterior_derivative_2form(form.field, p, h=fd.default_step(p, rel_step))
    W = form.field(p)
    scale = np.max(np.abs(W), axis=(-1, -2))
    return float(np.max(np.max(np.abs(dW), axis=(-1, -2, -3)) / scale))


def sphere_flux(form: GluedForm, center, e1, e2, e3, radius: float, nodes: int = 64):
    """Integral of omega_hat over the 2-sphere center + radius S^2 in span(e1, e2, e3).

    Gauss-Legendre in cos(theta), trapezoid in phi.  Returns the flux and the
    integral of its absolute integrand, which sets the scale for a zero test.
    """
    center = np.asarray(center, dtype=float)
    E = np.stack([e1, e2, e3]).astype(float)
    x, w = np.polynomial.legendre.leggauss(nodes)
    ph = np.linspace(0.0, 2 * np.pi, 2 * nodes, endpoint=False)
    ct, P = np.meshgrid(x, ph, indexing="ij")
    st = np.sqrt(1.0 - ct**2)
    n = np.stack([st * np.cos(P), st * np.sin(P), ct], axis=-1).reshape(-1, 3)
    # tangent vectors d/dcos(theta) and d/dphi of the embedding
    dct = np.stack([-ct / st * np.cos(P), -ct / st * np.sin(P), np.ones_like(ct)], axis=-1).reshape(-1, 3)
    dph = np.stack([-st * np.sin(P), st * np.cos(P), np.zeros_like(ct)], axis=-1).reshape(-1, 3)
    pts = center + radius * n @ E
    X = radius * dct @ E
    Y = radius * dph @ E
    vals = np.einsum("ba,bac,bc->b", X, form.field(pts), Y).reshape(ct.shape)
    dA = w[:, None] * (2 * np.pi / (2 * nodes))
    return float(np.sum(dA * vals)), float(np.sum(dA * np.abs(vals)))


__all__ = [
    "BumpSpec",
    "CSSelection",
    "GluedForm",
    "GluingConfig",
    "GluingError",
    "HolomorphicVolume",
    "OmegaHat",
    "REGION_NAMES",
    "RegionPositivity",
    "Scalar",
    "auto_eps_Y",
    "bump",
    "bump_profile",
    "chart_potential",
    "chi",
    "closedness_residual",
    "cut_profile",
    "cutoff_decay",
    "flat_kappa",
    "grad_norm_sq",
    "h_alpha_fn",
    "h_alpha_form",
    "holomorphic_form_residual",
    "k_alf",
    "k_alf_ddc_residual",
    "k_alf_scalar",
    "omega_hat",
    "pfaffian",
    "positivity",
    "psi_power_profile",
    "region_bounds",
    "region_of",
    "relative_max_abs_eigenvalue",
    "relative_max_eigenvalue",
    "relative_min_eigenvalue",
    "relative_spectrum",
    "ricci_potential_fhat",
    "sample_region",
    "select_CS",
    "smoothing_psi",
    "sphere_flux",
    "support_radius",
    "top_power_coefficient",
]
