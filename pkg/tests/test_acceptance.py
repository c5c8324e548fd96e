"""Acceptance criteria. Each test prints one PASS/FAIL line; the lines are
repeated in the pytest terminal summary."""
import time

import numpy as np
import pytest

from taubnut import deformation, identities
from taubnut.cone import CircleAction
from taubnut.suites import ExperimentConfig, run_suite

ACCEPTANCE_LINES = []

A_VALUES = (0.0, 0.5, 1.0, 2.0)
ACTIONS = {1: [(1,), (2,)], 2: [(1, 1), (1, 2)]}


def _cases():
    for n, ws in ACTIONS.items():
        for w in ws:
            for a in A_VALUES:
                yield n, w, a


def _finish(k, title, ok, detail, elapsed, limit):
    status = "PASS" if ok and elapsed <= limit else "FAIL"
    line = f"criterion {k} {status}: {title} | {detail} | {elapsed:.1f}s (limit {limit:.0f}s)"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line
    assert elapsed <= limit, line


def _run(suite, **kw):
    return run_suite(ExperimentConfig(suite=suite, **kw).resolved())


def _records(results, quantities=None, prefix=False):
    out = []
    for res in results:
        for r in res.records:
            if quantities is None:
                out.append(r)
            elif prefix and any(r.quantity.startswith(q) for q in quantities):
                out.append(r)
            elif r.quantity in quantities:
                out.append(r)
    return out


def _verdict(records):
    checked = [r for r in records if r.comparison != "info"]
    bad = [f"{r.case}:{r.quantity}={r.value}" for r in checked if not r.passed]
    return bool(checked) and not bad, bad


def _worst(records, quantity_filter=None):
    vals = [float(r.value) for r in records if r.comparison == "le"
            and (quantity_filter is None or quantity_filter(r.quantity))]
    return max(vals) if vals else float("nan")


def test_criterion_01_algebraic_identities():
    t0 = time.perf_counter()
    worst, where = 0.0, ""
    for n, w, a in _cases():
        act = CircleAction(w)
        rng = np.random.default_rng(100 + n)
        m = identities.random_points(act, 1000, rng)
        for key, v in identities.algebraic_residuals(act, a, m, rng).items():
            if v > worst:
                worst, where = v, f"n={n} w={w} a={a} {key}"
    ok = worst < 1e-9
    _finish(1, "algebraic identities, 16 cases x 1000 points", ok,
            f"max residual {worst:.2e} ({where}) < 1e-9", time.perf_counter() - t0, 30)


def test_criterion_02_differential_identities():
    t0 = time.perf_counter()
    worst = {}
    for n, w, a in _cases():
        act = CircleAction(w)
        rng = np.random.default_rng(200 + n)
        m = identities.random_points(act, 50, rng)
        vals = {
            "closedness": identities.closedness_residuals(act, a, m, h=1e-3),
            "moment": identities.moment_residual(act, a, m),
            "potential": identities.potential_residual(act, a, m),
            "typing": identities.one_form_typing(act, a, m, rng),
        }
        for k, v in vals.items():
            worst[k] = max(worst.get(k, 0.0), v)
    ok = all(v < 1e-6 for v in worst.values())
    detail = ", ".join(f"{k} {v:.1e}" for k, v in worst.items()) + " < 1e-6"
    _finish(2, "differential identities, 16 cases", ok, detail, time.perf_counter() - t0, 120)


@pytest.fixture(scope="module")
def flow_runs():
    t0 = time.perf_counter()
    runs = [_run("flow-oracle", n=n, weights=w, a=a, samples=200)
            for n, w, a in [(1, (1,), 1.0), (1, (2,), 1.0), (2, (1, 1), 1.0), (2, (1, 2), 1.0),
                            (2, (1, 1), 0.5), (2, (1, 1), 2.0)]]
    return runs, time.perf_counter() - t0


def test_criterion_03_flow_oracle_and_expansion(flow_runs):
    runs, t_flow = flow_runs
    t0 = time.perf_counter()
    fits = [_run("expansion-fit", n=2, weights=(1, 1), seed=s) for s in (7, 8)]
    recs = _records(runs, {"flow_vs_exact", "rho2_closed_form", "x1_closed_form", "tau_closed_form",
                           "f_closed_form"})
    recs += _records(fits, {"k0", "k1", "k2"})
    ok, bad = _verdict(recs)
    k = {r.quantity: float(r.value) for r in _records(fits[:1], {"k0", "k1", "k2"})}
    detail = (f"closed-form max rel err {_worst(recs):.1e} <= 1e-8; k0={k['k0']:.8f} k1={k['k1']:.1e} "
              f"k2={k['k2']:.6f}" + (f"; failing {bad}" if bad else ""))
    _finish(3, "flow oracle and expansion fit", ok, detail, t_flow + time.perf_counter() - t0, 60)


def test_criterion_04_phi_a(flow_runs):
    runs, t_flow = flow_runs
    recs = _records(runs, {"phi_holomorphic", "phi_symplectic_23", "phi_round_trip", "phi_inverse_closed_form",
                          "phi_jacobian_vs_fd"})
    ok, bad = _verdict(recs)
    hol = _worst(recs, lambda q: q == "phi_holomorphic")
    sym = _worst(recs, lambda q: q == "phi_symplectic_23")
    rt = _worst(recs, lambda q: q == "phi_round_trip")
    jfd = _worst(recs, lambda q: q == "phi_jacobian_vs_fd")
    detail = (f"200 points x 6 cases: holomorphic {hol:.1e}, symplectic {sym:.1e}, "
              f"Jacobian vs FD {jfd:.1e} < 1e-6; "
              f"round trip {rt:.1e} < 1e-8" + (f"; failing {bad}" if bad else ""))
    _finish(4, "biholomorphism and symplectomorphism", ok, detail, t_flow, 120)


def test_criterion_05_estimates(flow_runs):
    runs, t_flow = flow_runs
    recs = _records(runs, {"moment_slack_min"}) + _records(runs, ("tau_constant_stability",
                                                                  "rho2_increase_constant_stability",
                                                                  "distance_constant_stability",
                                                                  "dkdck_constant_stability"), prefix=True)
    ok, bad = _verdict(recs)
    names = ("tau", "rho2_increase", "distance", "dkdck")
    parts = [f"{nm} {_worst(recs, lambda q, nm=nm: q == nm + '_constant_stability'):.3f}" for nm in names]
    slack = min(float(r.value) for r in recs if r.quantity == "moment_slack_min")
    detail = ("max |C2/C1 - 1|: " + ", ".join(parts) + " <= 0.15; "
              f"min moment slack {slack:.2e} >= -1e-12" + (f"; failing {bad}" if bad else ""))
    _finish(5, "fitted constants of the growth estimates", ok, detail, t_flow, 180)


def test_criterion_06_curvature_decay():
    t0 = time.perf_counter()
    runs = [_run("curvature-scan", n=n, a=a, samples=4) for n in (1, 2) for a in (1.0, 0.0)]
    recs = _records(runs)
    ok, bad = _verdict(recs)
    growth = _worst(recs, lambda q: q == "octave_growth_K_rho_hat")
    sup = max(float(r.value) for r in recs if r.quantity == "sup_K_rho_hat")
    ctrl = _worst(recs, lambda q: q == "max_K_rho2")
    flat = _worst(recs, lambda q: q == "max_abs_K")
    sph = _worst(recs, lambda q: q == "max_abs_K_minus_1")
    detail = (f"octave growth {growth:.3f} <= 0.10 (sup K rho_hat {sup:.3f}); a=0 max |K| rho^2 {ctrl:.1e}; "
              f"flat {flat:.1e} <= 1e-6, sphere {sph:.1e} <= 1e-4" + (f"; failing {bad}" if bad else ""))
    _finish(6, "curvature decay along rays, n=1,2", ok, detail, time.perf_counter() - t0, 600)


def test_criterion_07_volume_growth():
    t0 = time.perf_counter()
    runs = [
        _run("volume-growth", n=1, a=1.0, radii=(10, 20, 40, 80), samples=2_000_000),
        _run("volume-growth", n=2, a=1.0, samples=10_000_000),
        _run("volume-growth", n=1, a=0.0, radii=(10, 20, 40, 80), samples=2_000_000),
        _run("volume-growth", n=2, a=0.0, samples=10_000_000),
    ]
    recs = _records(runs, {"slope"})
    ok, bad = _verdict(recs)
    detail = "; ".join(f"{r.case}: {float(r.value):.3f} (target {r.target} +- {r.tolerance:g})" for r in recs)
    _finish(7, "volume growth slopes", ok, detail, time.perf_counter() - t0, 900)


def test_criterion_08_asymptotic_deviation():
    t0 = time.perf_counter()
    res = _run("twist-compare", n=2, a=1.0, samples=3)
    ok, bad = _verdict(res.records)
    growth = _worst(res.records, lambda q: q.startswith("octave_growth"))
    sup = max(float(r.value) for r in res.records if r.quantity == "sup_deviation_rho_hat2")
    detail = (f"3 rays, octave growth of deviation rho_hat^2 {growth:.4f} <= 0.10, sup {sup:.3f}"
              + (f"; failing {bad}" if bad else ""))
    _finish(8, "twist-coordinate deviation from the product model", ok, detail, time.perf_counter() - t0, 300)


def test_criterion_09_asymptotic_cone():
    t0 = time.perf_counter()
    res = _run("gh-probe", n=1, a=1.0, lambdas=(1.0, 0.1, 0.01))
    ok, bad = _verdict(res.records)
    gaps = [f"{float(r.value):.4f}" for r in res.records if r.quantity.startswith("gap[")]
    detail = f"gaps at lambda 1, 0.1, 0.01: {', '.join(gaps)}; monotone and < 0.05" + (
        f"; failing {bad}" if bad else "")
    _finish(9, "rescaled distances approach a|dx|", ok, detail, time.perf_counter() - t0, 300)


def test_criterion_10_locally_free():
    t0 = time.perf_counter()
    runs = [
        _run("locally-free", case="su", weights=(1, 2, 3), starts=64),
        _run("locally-free", case="su", weights=(1, 1, 2), starts=64),
        _run("locally-free", case="so", weights=(1, 1), starts=64),
        _run("locally-free", case="so", weights=(1, -1), starts=64),
        _run("locally-free", case="so", weights=(1, 2), starts=64),
    ]
    recs = _records(runs)
    ok, bad = _verdict(recs)
    verdicts = [f"{r.case}->{r.value}" for r in recs if r.quantity == "verdict"]
    margin = min(float(r.value) for r in recs if r.quantity == "min_defect_margin")
    wit = _worst(recs, lambda q: q == "explicit_witness_defect")
    ident = _worst(recs, lambda q: q == "pairwise_identity")
    grid = _worst(recs, lambda q: q == "eigen_vs_grid")
    detail = (f"{', '.join(verdicts)}; free min_defect {margin:.3f} > 1e-6; witness {wit:.1e} < 1e-12; "
              f"identity {ident:.1e} < 1e-12; eigen vs grid {grid:.1e} < 1e-8" + (f"; failing {bad}" if bad else ""))
    _finish(10, "locally-free certificates", ok, detail, time.perf_counter() - t0, 300)


def test_criterion_11_gluing():
    t0 = time.perf_counter()
    runs = [_run("gluing-check", n=n, a=1.0, samples=2000) for n in (1, 2)]
    keep = lambda q: not q.startswith("power_potential")  # noqa: E731
    recs = [r for r in _records(runs) if keep(r.quantity)]
    ok, bad = _verdict(recs)
    eig = min(float(r.value) for r in recs if r.quantity.startswith("min_eigenvalue"))
    fh = _worst(recs, lambda q: q.startswith("max_abs_fhat"))
    slope = [f"{float(r.value):.4f}" for r in recs if r.quantity == "cutoff_decay_slope"]
    cs = [f"C={r.value:g}" if r.quantity == "C_glue" else f"S={r.value:g}" for r in recs
          if r.quantity in ("C_glue", "S")]
    detail = (f"n=1,2 with {' '.join(cs)}; min eigenvalue over 5 regions {eig:.3e} > 0; |f_hat| {fh:.1e} <= 1e-7; "
              f"cutoff slopes {', '.join(slope)} = -0.4 +- 0.1" + (f"; failing {bad}" if bad else ""))
    _finish(11, "glued Kaehler form", ok, detail, time.perf_counter() - t0, 300)


def test_criterion_12_power_positivity():
    t0 = time.perf_counter()
    parts, ok = [], True
    for n in (1, 2):
        act = CircleAction.standard(n)
        m = identities.random_points(act, 10_000, np.random.default_rng(12), (0.1, 50.0))
        for al in (0.95, 1.0):
            lam = deformation.alpha_positivity(act, 1.0, al, m)
            ok &= lam > 0
            parts.append(f"n={n} alpha={al}: {lam:.3e}")
        th = deformation.alpha_threshold(act, 1.0, m)
        parts.append(f"n={n} alpha_hat_0={th}")
    _finish(12, "positivity of dd^c (K_1^a)^alpha", ok, "; ".join(parts) + " (min eigenvalues > 0)",
            time.perf_counter() - t0, 120)
