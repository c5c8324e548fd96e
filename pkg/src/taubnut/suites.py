"""Experiment suites.  Each suite maps an ExperimentConfig to ReportRecords.

Suites are independent of each other and deterministic given the config.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, fields, replace

import numpy as np

from . import closed_forms as cf
from . import deformation, flows, gluing, identities, probes, quotients, twist
from .cone import CircleAction, moment_map

SCHEMA_VERSION = 1

CASE_ALIASES = {"su": "SU", "so": "SO", "g2": "G2", "sphere": "SphereWeighted"}


class ConfigError(ValueError):
    """Invalid experiment configuration (exit code 2)."""


@dataclass(frozen=True)
class ExperimentConfig:
    suite: str
    n: int | None = None
    weights: tuple | None = None
    a: float | None = None
    c: float = 1.0
    alpha: float = 0.6
    samples: int | None = None
    radii: tuple | None = None
    lambdas: tuple | None = None
    seed: int = 7
    tol_scale: float = 1.0
    case: str = "su"
    starts: int = 64
    out: str | None = None

    def resolved(self) -> "ExperimentConfig":
        """Fill suite defaults and validate."""
        if self.suite not in SUITES:
            raise ConfigError(f"unknown suite {self.suite!r}")
        d = dict(SUITE_DEFAULTS[self.suite])
        kw = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if v is None and f.name in d:
                kw[f.name] = d[f.name]
        cfg = replace(self, **kw)
        if self.suite != "locally-free":
            if cfg.weights is not None and self.n is None:
                cfg = replace(cfg, n=len(cfg.weights))
            if cfg.weights is None:
                cfg = replace(cfg, weights=(1,) * cfg.n)
        if cfg.radii is None and "radii_by_n" in d:
            cfg = replace(cfg, radii=tuple(d["radii_by_n"](cfg.n)))
        if cfg.samples is None and "samples_by_n" in d:
            cfg = replace(cfg, samples=int(d["samples_by_n"](cfg.n)))
        _validate(cfg)
        return cfg

    def items(self) -> list[tuple[str, str]]:
        out = []
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                v = ",".join(_fmt(x) for x in v)
            out.append((f.name, "" if v is None else _fmt(v)))
        return out


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _validate(cfg: ExperimentConfig) -> None:
    if cfg.suite != "locally-free":
        if cfg.n is None or cfg.n < 1:
            raise ConfigError("n must be a positive integer")
        if len(cfg.weights) != cfg.n:
            raise ConfigError("weights must have n entries")
        if any(int(w) == 0 for w in cfg.weights):
            raise ConfigError("weights must be nonzero")
    else:
        if cfg.case not in CASE_ALIASES:
            raise ConfigError(f"case must be one of {sorted(CASE_ALIASES)}")
    if cfg.a is not None and cfg.a < 0:
        raise ConfigError("a must be nonnegative")
    if cfg.c <= 0:
        raise ConfigError("c must be positive")
    if not 0.0 < cfg.alpha < 1.0:
        raise ConfigError("alpha must lie in (0, 1)")
    if cfg.samples is not None and cfg.samples < 1:
        raise ConfigError("samples must be positive")
    if cfg.radii is not None:
        r = np.asarray(cfg.radii, dtype=float)
        if r.size < 2 or np.any(r <= 0) or np.any(np.diff(r) <= 0):
            raise ConfigError("radii must be positive and increasing")
    if cfg.tol_scale <= 0:
        raise ConfigError("tol_scale must be positive")
    if cfg.starts < 1:
        raise ConfigError("starts must be positive")
    if cfg.suite == "twist-compare" and (cfg.n < 2 or cfg.a <= 0):
        raise ConfigError("twist-compare needs n >= 2 and a > 0")
    if cfg.suite == "gh-probe" and (cfg.n != 1 or cfg.a <= 0):
        raise ConfigError("gh-probe needs n = 1 and a > 0")
    if cfg.suite == "expansion-fit" and cfg.n < 2:
        raise ConfigError("expansion-fit needs n >= 2 (the zero level of n = 1 is a point)")
    if cfg.suite == "gluing-check" and cfg.a <= 0:
        raise ConfigError("gluing-check needs a > 0")
    if cfg.suite == "volume-growth" and (cfg.radii is None or len(cfg.radii) < 4):
        raise ConfigError("volume-growth needs at least four radii")


@dataclass
class ReportRecord:
    suite: str
    case: str
    quantity: str
    value: object
    tolerance: float | None
    passed: bool
    seed: int
    source: str
    comparison: str = "info"
    target: object = None
    wall_time: float = 0.0

    CSV_COLUMNS = ("schema_version", "suite", "case", "quantity", "value", "comparison", "target",
                   "tolerance", "passed", "seed", "source")

    def csv_row(self) -> list[str]:
        def f(v):
            if v is None:
                return ""
            if isinstance(v, (bool, np.bool_)):
                return "true" if v else "false"
            if isinstance(v, (float, np.floating)):
                return repr(float(v))
            return str(v)

        return [str(SCHEMA_VERSION), self.suite, self.case, self.quantity, f(self.value), self.comparison,
                f(self.target), f(self.tolerance), f(self.passed), str(self.seed), self.source]

    def as_dict(self) -> dict:
        d = {k: getattr(self, k) for k in ("suite", "case", "quantity", "value", "comparison", "target",
                                            "tolerance", "passed", "seed", "source", "wall_time")}
        for k, v in d.items():
            if isinstance(v, (np.floating, np.integer)):
                d[k] = v.item()
            if isinstance(v, float) and not math.isfinite(v):
                d[k] = repr(v)
        return d


class Recorder:
    """Collects records for one suite run; tolerances are multiplied by tol_scale."""

    def __init__(self, cfg: ExperimentConfig):
        self.cfg = cfg
        self.records: list[ReportRecord] = []
        self._t = time.perf_counter()

    def _add(self, case, quantity, value, comparison, target, tol, passed, source):
        now = time.perf_counter()
        self.records.append(ReportRecord(
            suite=self.cfg.suite, case=case, quantity=quantity, value=value, tolerance=tol,
            passed=bool(passed), seed=self.cfg.seed, source=source, comparison=comparison,
            target=target, wall_time=now - self._t))
        self._t = now

    def le(self, case, quantity, value, tol, source):
        """value <= tol * tol_scale."""
        t = tol * self.cfg.tol_scale
        self._add(case, quantity, float(value), "le", None, t, value <= t, source)

    def near(self, case, quantity, value, target, tol, source):
        """|value - target| <= tol * tol_scale."""
        t = tol * self.cfg.tol_scale
        self._add(case, quantity, float(value), "abs_le", target, t, abs(value - target) <= t, source)

    def gt(self, case, quantity, value, bound, source):
        """value > bound (not scaled)."""
        self._add(case, quantity, float(value), "gt", bound, None, value > bound, source)

    def eq(self, case, quantity, value, target, source):
        self._add(case, quantity, value, "eq", target, None, value == target, source)

    def info(self, case, quantity, value, source):
        self._add(case, quantity, value, "info", None, None, True, source)

    def fail(self, case, quantity, message, source):
        self._add(case, quantity, message, "error", None, None, False, source)


def _action(cfg) -> CircleAction:
    return CircleAction(cfg.weights)


def _case(cfg, **extra) -> str:
    parts = [f"n={cfg.n}", "w=" + ",".join(str(int(w)) for w in cfg.weights)]
    if cfg.a is not None:
        parts.append(f"a={_fmt(float(cfg.a))}")
    parts += [f"{k}={_fmt(v)}" for k, v in extra.items()]
    return ";".join(parts)


def _rng(cfg, stream: int = 0) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=np.array([cfg.seed, stream], dtype=np.uint64)))


def _is_standard(cfg) -> bool:
    return all(int(w) == 1 for w in cfg.weights)


# ---------------------------------------------------------------------------
# suites

def suite_verify_structure(cfg: ExperimentConfig, rec: Recorder) -> None:
    act, a, case = _action(cfg), float(cfg.a), _case(cfg)
    rng = _rng(cfg)
    m = identities.random_points(act, cfg.samples, rng)
    for k, v in identities.algebraic_residuals(act, a, m, rng).items():
        rec.le(case, k, v, 1e-9, "deformation.deformed_structure")
    sub = m[: min(cfg.samples, 50)]
    rec.le(case, "closedness", identities.closedness_residuals(act, a, sub), 1e-6,
           "identities.closedness_residuals")
    rec.le(case, "moment_contraction", identities.moment_residual(act, a, m), 1e-6,
           "identities.moment_residual")
    rec.le(case, "kahler_potential", identities.potential_residual(act, a, sub), 1e-6,
           "deformation.power_potential_form")
    rec.le(case, "one_form_typing", identities.one_form_typing(act, a, m, rng), 1e-6,
           "deformation.deformed_one_form")


def suite_flow_oracle(cfg: ExperimentConfig, rec: Recorder) -> None:
    act, a, case = _action(cfg), float(cfg.a), _case(cfg)
    rng = _rng(cfg)
    size = cfg.samples
    m = identities.random_points(act, size, rng)
    tau = rng.uniform(-1.0, 1.0, size)
    num = flows.flow(m, tau, act).endpoint
    ex = cf.exact_flow(m, tau, act)
    rec.le(case, "flow_vs_exact", float(np.max(np.linalg.norm(num - ex, axis=-1) / np.linalg.norm(ex, axis=-1))),
           1e-8, "flows.flow")
    if _is_standard(cfg) and cfg.n >= 2:
        m0, _ = identities.level_samples(act, size, rng, (0.5, 2.0))
        r2 = np.sum(m0 * m0, axis=-1)
        p = flows.flow(m0, tau, act).endpoint
        rec.le(case, "rho2_closed_form", _relerr(np.sum(p * p, axis=-1), cf.tc_rho2(r2, tau)), 1e-8, "flows.flow")
        rec.le(case, "x1_closed_form", _relerr(moment_map(act, p)[:, 0], cf.tc_x1(r2, tau)), 1e-8, "flows.flow")
        x1 = cf.tc_x1(r2, tau)
        t_num = flows.tau_to_level(m0, x1, act)
        rec.le(case, "tau_closed_form", _relerr(t_num, cf.tc_tau(r2, x1)), 1e-8, "flows.tau_to_level")
        x = np.zeros((size, 3))
        x[:, 0] = np.abs(x1) + 1e-3
        f_num = flows.f_potential(m0, x, act)
        rec.le(case, "f_closed_form", _relerr(f_num, cf.tc_f(r2, x[:, 0])), 1e-8, "flows.f_potential")
    if _is_standard(cfg) and a > 0:
        inv = flows.phi_a_inverse(m, act, a)
        ref = cf.exact_phi_a_inverse_standard(m, a)
        rec.le(case, "phi_inverse_closed_form", _relerr_vec(inv, ref), 1e-8, "flows.phi_a_inverse")
    res = identities.phi_a_residuals(act, a, m[: min(size, 200)])
    rec.le(case, "phi_holomorphic", res["holomorphic"], 1e-6, "flows.phi_a_inverse_jacobian")
    rec.le(case, "phi_symplectic_23", res["symplectic_23"], 1e-6, "flows.phi_a_inverse_jacobian")
    rec.le(case, "phi_round_trip", res["round_trip"], 1e-8, "flows.phi_a")
    jfd = identities.phi_a_jacobian_fd_residual(act, a, m[: min(size, 20)], h=1e-3)
    rec.le(case, "phi_jacobian_vs_fd", jfd, 1e-6, "flows.phi_a_inverse_jacobian")
    _estimates(cfg, rec, act, a, case)


def _relerr(x, y) -> float:
    return float(np.max(np.abs(x - y) / np.maximum(1.0, np.abs(y))))


def _relerr_vec(x, y) -> float:
    return float(np.max(np.linalg.norm(x - y, axis=-1) / np.maximum(1.0, np.linalg.norm(y, axis=-1))))


def _stability(c1: float, c2: float) -> float:
    return abs(c2 / c1 - 1.0)


def _estimates(cfg, rec, act, a, case) -> None:
    """Fitted constants on two adjacent decades of scale."""
    rng = _rng(cfg, 1)
    size = min(cfg.samples, 200)
    if cfg.n >= 2:
        bands = [(1.0, 10.0), (10.0, 100.0)]
        C_tau, C_rho = [], []
        for band in bands:
            m0, x1 = identities.level_samples(act, size, rng, band)
            C_tau.append(identities.tau_constant(act, m0, x1))
            C_rho.append(identities.rho_increase_constant(act, m0, x1))
        for name, Cs in (("tau_constant", C_tau), ("rho2_increase_constant", C_rho)):
            for band, C in zip(bands, Cs):
                rec.info(case, f"{name}[{band[0]:g},{band[1]:g}]", C, "identities." + name)
            rec.le(case, f"{name}_stability", _stability(*Cs), 0.15, "identities." + name)
    m = identities.random_points(act, 1000, rng, (0.1, 1000.0))
    rec.gt(case, "moment_slack_min", identities.moment_slack(act, m), -1e-12, "identities.moment_slack")
    if a > 0:
        bands = [(10.0, 100.0), (100.0, 1000.0)]
        C_d, C_k = [], []
        for band in bands:
            C_d.append(identities.distance_constant(act, a, identities.random_points(act, 40, rng, band)))
            C_k.append(identities.dkdck_fitted(act, a, identities.random_points(act, 2000, rng, band)))
        for name, Cs, src in (("distance_constant", C_d, "probes.distance_upper"),
                              ("dkdck_constant", C_k, "deformation.dkdck_constant")):
            for band, C in zip(bands, Cs):
                rec.info(case, f"{name}[{band[0]:g},{band[1]:g}]", C, src)
            rec.le(case, f"{name}_stability", _stability(*Cs), 0.15, src)


def suite_expansion_fit(cfg: ExperimentConfig, rec: Recorder) -> None:
    act, case = _action(cfg), _case(cfg)
    m0 = twist.zero_level_points(cfg.n, 1, _rng(cfg), weights=cfg.weights)[0]
    fit = flows.fit_expansion(m0, act, flows.TIGHT_CONFIG)
    rec.near(case, "k0", fit.k[0], 0.5, 1e-6, "flows.fit_expansion")
    rec.near(case, "k1", fit.k[1], 0.0, 1e-5, "flows.fit_expansion")
    if _is_standard(cfg):
        rec.near(case, "k2", fit.k[2], -1.0, 1e-3, "flows.fit_expansion")
    else:
        rec.info(case, "k2", float(fit.k[2]), "flows.fit_expansion")
    rec.info(case, "fit_residual", fit.residual, "flows.fit_expansion")


def octave_growth(radii, values, start: float) -> float:
    """Largest per-octave growth rate of the running max of values over radii >= start."""
    r = np.asarray(radii, dtype=float)
    v = np.asarray(values, dtype=float)
    keep = r >= start
    r, v = r[keep], v[keep]
    if r.size < 2:
        raise ValueError("need two radii beyond the start")
    run = np.maximum.accumulate(v)
    rate = (run[1:] / run[:-1]) ** (1.0 / np.log2(r[1:] / r[:-1])) - 1.0
    return float(np.max(rate))


def suite_curvature_scan(cfg: ExperimentConfig, rec: Recorder) -> None:
    act, a, case = _action(cfg), float(cfg.a), _case(cfg)
    rng = _rng(cfg)
    y = rng.standard_normal((1, 4))
    frame = np.eye(4)
    Rl, G = probes.riemann(probes.flat_metric, y)
    rec.le("flat", "max_abs_K", probes.max_sectional(Rl[0], G[0], frame), 1e-6, "probes.riemann")
    Rl, G = probes.riemann(probes.sphere_chart_metric, 0.3 * y)
    fr = probes.orthonormal_frame(G[0], frame)
    Ks = [probes.sectional_from_riemann(Rl, G, fr[i][None], fr[j][None])[0]
          for i in range(4) for j in range(i + 1, 4)]
    rec.le("unit_sphere", "max_abs_K_minus_1", float(np.max(np.abs(np.array(Ks) - 1.0))), 1e-4,
           "probes.sectional_from_riemann")
    radii = list(cfg.radii)
    # n = 1 with a > 0 uses the moment chart, where the metric stays well conditioned
    moment_chart = cfg.n == 1 and a > 0
    along = probes.curvature_along_ray_gh if moment_chart else probes.curvature_along_ray
    src = "probes.curvature_along_ray_gh" if moment_chart else "probes.curvature_along_ray"
    for k in range(cfg.samples):
        d = rng.standard_normal(act.dim)
        rows = along(act, a, d, radii)
        ray = f"{case};ray={k}"
        for s in rows:
            rec.info(ray, f"K[rho={s.rho:g}]", s.K, src)
        if a > 0:
            vals = [s.K * s.rho_hat for s in rows]
            rec.info(ray, "sup_K_rho_hat", float(max(vals)), src)
            rec.le(ray, "octave_growth_K_rho_hat", octave_growth(radii, vals, 10.0), 0.10, src)
        else:
            vals = [abs(s.K) * s.rho**2 for s in rows]
            rec.le(ray, "max_K_rho2", float(max(vals)), 1e-6, src)


def suite_volume_growth(cfg: ExperimentConfig, rec: Recorder) -> None:
    act, a, case = _action(cfg), float(cfg.a), _case(cfg)
    slope, est = probes.volume_growth(act, a, list(cfg.radii), cfg.samples, cfg.seed)
    for e in est:
        rec.info(case, f"volume[R={e.R:g}]", e.volume, "probes.volume_estimates")
        rec.info(case, f"stderr[R={e.R:g}]", e.stderr, "probes.volume_estimates")
    if a > 0:
        target, tol = 4 * cfg.n - 1, (0.15 if cfg.n == 1 else 0.3)
    else:
        target, tol = 4 * cfg.n, 0.1
    rec.near(case, "slope", slope, float(target), tol, "probes.volume_growth")


def suite_twist_compare(cfg: ExperimentConfig, rec: Recorder) -> None:
    act, a, case = _action(cfg), float(cfg.a), _case(cfg)
    rng = _rng(cfg)
    radii = list(cfg.radii)
    for k in range(cfg.samples):
        u = twist.zero_level_points(cfg.n, 1, rng, weights=cfg.weights)[0]
        xh = rng.standard_normal(3)
        xh /= np.linalg.norm(xh)
        ray = f"{case};ray={k}"
        scaled, devs = [], []
        for r in radii:
            m0, x = r * u, r * xh
            dev = twist.asymptotic_deviation(twist.TwistPoint(m0, x), act, a)
            rh = float(probes.distance_upper(twist.twist_map(m0, x, act), act, a)[0])
            devs.append(dev)
            scaled.append(dev * rh * rh)
            rec.info(ray, f"deviation[r={r:g}]", dev, "twist.asymptotic_deviation")
        rec.info(ray, "sup_deviation_rho_hat2", float(max(scaled)), "twist.asymptotic_deviation")
        rec.le(ray, "octave_growth_deviation_rho_hat2", octave_growth(radii, scaled, radii[0]), 0.10,
               "twist.asymptotic_deviation")
        rec.gt(ray, "deviation_decay_factor", devs[0] / devs[-1], 1.0, "twist.asymptotic_deviation")


GH_PAIRS = (((1, 0, 0), (0, 1, 0)), ((1, 0, 0), (-1, 0, 0)), ((0.5, 0.5, 0), (0, 0, 1)),
            ((1, 1, 1), (1, -1, 0.5)))


def suite_gh_probe(cfg: ExperimentConfig, rec: Recorder) -> None:
    act, a, case = _action(cfg), float(cfg.a), _case(cfg)
    lams = sorted(cfg.lambdas, reverse=True)
    rows = probes.gh_probe(GH_PAIRS, lams, act, a)
    for r in rows:
        rec.info(case, f"gap[lambda={r.lam:g}]", r.gap, "probes.gh_probe")
    gaps = [r.gap for r in rows]
    rec.eq(case, "gap_monotone_decreasing", bool(np.all(np.diff(gaps) < 0)), True, "probes.gh_probe")
    rec.le(case, "gap_smallest_lambda", gaps[-1], 0.05, "probes.gh_probe")


DEFAULT_CASE_WEIGHTS = {"su": (1, 2, 3), "so": (1, 2), "g2": (1, 2, 3), "sphere": (1, 1)}


def suite_locally_free(cfg: ExperimentConfig, rec: Recorder) -> None:
    name = CASE_ALIASES[cfg.case]
    w = tuple(int(x) for x in (cfg.weights or DEFAULT_CASE_WEIGHTS[cfg.case]))
    case = f"{cfg.case};w=" + ",".join(str(x) for x in w)
    try:
        cert = quotients.locally_free_search(name, w, starts=cfg.starts, seed=cfg.seed)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    src = "quotients.locally_free_search"
    rec.info(case, "min_defect", cert.min_defect, src)
    rec.info(case, "failed_starts", cert.failed_starts, src)
    expected = {True: "locally_free", False: "not_locally_free", None: None}[cert.predicate]
    verdict = cert.verdict.value
    if expected is None:
        rec.info(case, "verdict", verdict, src)
    else:
        rec.eq(case, "verdict", verdict, expected, src)
    if cert.predicate is True:
        rec.gt(case, "min_defect_margin", cert.min_defect, 1e-6, src)
    if cert.predicate is False:
        rec.le(case, "explicit_witness_defect", cert.explicit_defect, 1e-12, "quotients.explicit witness")
        rec.eq(case, "witness_support_in_repeated_class", _support_in_repeated_class(name, w, cert.support), True,
               src)
    if name == "SU":
        rec.le(case, "pairwise_identity", _su_identity(w, cfg), 1e-12, "quotients.defect_su_pairwise")
    if name in ("SO", "G2"):
        rec.le(case, "eigen_vs_grid", _eigen_vs_grid(w, cfg), 1e-8, "quotients.defect_sp1_grid")


def _support_in_repeated_class(name, w, support) -> bool:
    if name == "SU":
        labels = [w[s] for s in support]
    elif name == "SO":
        labels = [abs(w[s // 2]) if s // 2 < len(w) else None for s in support]
    else:
        return True
    return len(labels) >= 2 and None not in labels and len(set(labels)) == 1


def _su_identity(w, cfg, size: int = 10_000) -> float:
    rng = _rng(cfg, 3)
    m = rng.standard_normal((size, 4 * len(w)))
    pts = quotients.retract(m, quotients.Manifold.NC)
    lhs = quotients.su_defect_batch(w, pts)
    a = np.asarray(w, dtype=float)
    n2 = np.sum(pts.reshape(size, len(w), 4) ** 2, axis=-1)
    rhs = sum((a[i] - a[j]) ** 2 * n2[:, i] * n2[:, j] for i in range(len(w)) for j in range(i + 1, len(w)))
    return float(np.max(np.abs(lhs - rhs) / np.maximum(1.0, np.abs(rhs))))


def _eigen_vs_grid(w, cfg, points: int = 3) -> float:
    rng = _rng(cfg, 4)
    l = max(5, 2 * len(w))
    b = w if len(w) * 2 <= l else w[:2]
    worst = 0.0
    for _ in range(points):
        p = quotients.retract(rng.standard_normal(4 * l), quotients.Manifold.NH)
        eig = quotients.defect_sp1(b, p).value
        grid = quotients.defect_sp1_grid(b, p)
        worst = max(worst, abs(eig - grid))
    return worst


def suite_gamma_check(cfg: ExperimentConfig, rec: Recorder) -> None:
    act, case = _action(cfg), _case(cfg)
    n = cfg.n
    groups = {
        "trivial": ([np.eye(4 * n)], True),
        f"cyclic_{2 * n}": ([quotients.cyclic_generator(2 * n, n)], True),
        "mixing": ([quotients.mixing_generator(2 * n, n)], False),
    }
    if n == 1:
        groups["binary_dihedral_D4"] = (quotients.binary_dihedral_generators(4, 1), True)
    for name, (gens, expected) in groups.items():
        rep = quotients.gamma_compat_check(gens, act, samples=cfg.samples, seed=cfg.seed)
        rec.eq(f"{case};group={name}", "compatible", rep.passed, expected, "quotients.gamma_compat_check")


def suite_gluing_check(cfg: ExperimentConfig, rec: Recorder) -> None:
    a, case = float(cfg.a), _case(cfg, c=cfg.c, alpha=cfg.alpha)
    gcfg = gluing.GluingConfig(n=cfg.n, weights=tuple(cfg.weights), a=a, c=cfg.c, alpha=cfg.alpha)
    per = cfg.samples
    try:
        sel = gluing.select_CS(gcfg, samples=per, seed=cfg.seed)
    except gluing.GluingError as exc:
        rec.fail(case, "select_CS", str(exc), "gluing.select_CS")
        return
    rec.info(case, "C_glue", sel.C_glue, "gluing.select_CS")
    rec.info(case, "S", sel.S, "gluing.select_CS")
    gcfg = gcfg.with_(C_glue=sel.C_glue, S=sel.S)
    form = gluing.GluedForm(gcfg)
    rec.info(case, "eps_Y", form.eps_Y, "gluing.auto_eps_Y")
    if gcfg.bump is None:
        profile = "v = 0, omega_Y = c omega_ALF"
    else:
        profile = (f"v = {gcfg.bump.amplitude:g} bump(K_ALF/{gluing.support_radius(gcfg):g})"
                   f" - {form.eps_Y:.6g} K_ALF")
    rec.info(case, "stand_in_profile", profile, "gluing.BumpSpec")
    for r in gluing.positivity(gcfg, per, cfg.seed + 1, form=form):
        rec.gt(case, f"min_eigenvalue[region={r.region}]", r.min_eigenvalue, 0.0, "gluing.positivity")
    p5 = gluing.sample_region(gcfg, 5, min(per, 500), cfg.seed + 2)
    f5 = gluing.ricci_potential_fhat(gcfg, p5, form)
    rec.le(case, "max_abs_fhat[region=5]", float(np.max(np.abs(f5))), 1e-7, "gluing.ricci_potential_fhat")
    pc = np.concatenate([gluing.sample_region(gcfg, r, 4, cfg.seed + 3) for r in (1, 2, 3, 4, 5)])
    rec.le(case, "closedness", gluing.closedness_residual(form, pc), 1e-5, "gluing.closedness_residual")
    slope, _ = gluing.cutoff_decay(gcfg, [1e2, 1e3, 1e4, 1e5], samples=per, seed=cfg.seed)
    rec.near(case, "cutoff_decay_slope", slope, -(1.0 - cfg.alpha), 0.1, "gluing.cutoff_decay")
    # positivity of dd^c (K_1^a)^alpha near alpha = 1
    act = _action(cfg)
    m = identities.random_points(act, 5 * per, _rng(cfg, 5), (0.1, 50.0))
    for al in (0.95, 1.0):
        rec.gt(case, f"power_potential_min_eigenvalue[alpha={al:g}]",
               deformation.alpha_positivity(act, a, al, m), 0.0, "deformation.alpha_positivity")
    rec.info(case, "alpha_threshold", deformation.alpha_threshold(act, a, m[:2000]),
             "deformation.alpha_threshold")


SUITES = {
    "verify-structure": suite_verify_structure,
    "flow-oracle": suite_flow_oracle,
    "expansion-fit": suite_expansion_fit,
    "curvature-scan": suite_curvature_scan,
    "volume-growth": suite_volume_growth,
    "twist-compare": suite_twist_compare,
    "gh-probe": suite_gh_probe,
    "locally-free": suite_locally_free,
    "gamma-check": suite_gamma_check,
    "gluing-check": suite_gluing_check,
}

SUITE_DEFAULTS = {
    "verify-structure": {"n": 1, "a": 1.0, "samples": 1000},
    "flow-oracle": {"n": 2, "a": 1.0, "samples": 200},
    "expansion-fit": {"n": 2},
    "curvature-scan": {"n": 1, "a": 1.0, "samples": 2, "radii": (1, 2, 4, 8, 10, 16, 32, 64, 100)},
    "volume-growth": {"n": 1, "a": 1.0,
                      "radii_by_n": lambda n: (10, 20, 40, 80) if n == 1 else tuple(np.geomspace(10, 100, 5)),
                      "samples_by_n": lambda n: 2_000_000 if n == 1 else 10_000_000},
    "twist-compare": {"n": 2, "a": 1.0, "samples": 2, "radii": (4, 8, 16, 32, 64, 128)},
    "gh-probe": {"n": 1, "a": 1.0, "lambdas": (1.0, 0.1, 0.01)},
    "locally-free": {},
    "gamma-check": {"n": 2, "samples": 200},
    "gluing-check": {"n": 1, "a": 1.0, "samples": 2000},
}


@dataclass
class SuiteResult:
    config: ExperimentConfig
    records: list = field(default_factory=list)
    wall_time: float = 0.0

    @property
    def passed(self) -> int:
        return sum(1 for r in self.records if r.passed)

    @property
    def failed(self) -> int:
        return sum(1 for r in self.records if not r.passed)

    @property
    def ok(self) -> bool:
        return self.failed == 0


def run_suite(cfg: ExperimentConfig) -> SuiteResult:
    """Resolve defaults, run the suite and collect its records."""
    cfg = cfg.resolved()
    rec = Recorder(cfg)
    t0 = time.perf_counter()
    SUITES[cfg.suite](cfg, rec)
    return SuiteResult(config=cfg, records=rec.records, wall_time=time.perf_counter() - t0)
