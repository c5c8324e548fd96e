import numpy as np
import pytest

from conftest import random_points
from taubnut.cone import CircleAction, moment_map
from taubnut.deformation import deformed_metric, potential_K1a
from taubnut import fd
from taubnut.probes import (
    curvature_operator_norm,
    max_sectional,
    metric_jets,
    orthonormal_frame,
    riemann_from_jets,
    sectional_from_riemann,
    curvature_along_ray,
    curvature_along_ray_gh,
    deformed_metric_field,
    distance_upper,
    flat_metric,
    gh_probe,
    gibbons_hawking_metric,
    kretschmann,
    level_point,
    riemann,
    sectional_curvature,
    sphere_chart_metric,
    straight_length,
    straight_length_closed_form,
    volume_density,
    volume_estimate,
    volume_growth,
)

STD1 = CircleAction.standard(1)


def test_flat_curvature_vanishes(rng):
    y = rng.standard_normal(4)
    K = sectional_curvature(flat_metric, y, (np.eye(4)[0], np.eye(4)[2]))
    assert abs(K) < 1e-6


def test_sphere_chart_has_unit_curvature(rng):
    y = 0.3 * rng.standard_normal(4)
    for i, j in ((0, 1), (1, 3), (2, 3)):
        K = sectional_curvature(sphere_chart_metric, y, (np.eye(4)[i], np.eye(4)[j]), rel_step=1e-3)
        assert abs(K - 1) < 1e-4


def test_cone_curvature_vanishes_at_zero_deformation(rng):
    act = CircleAction((1, 2))
    m = random_points(2, 1, rng)[0]
    Rlow, _ = riemann(deformed_metric_field(act, 0.0), m[None])
    assert np.max(np.abs(Rlow)) < 1e-6


def test_moment_chart_matches_ambient_chart():
    # the two charts describe the same metric: Kretschmann scalars agree at moderate radius
    m = np.array([0.8, 0.3, -0.5, 0.6])
    Ramb, Gamb = riemann(deformed_metric_field(STD1, 1.0), m[None], rel_step=1e-3)
    x = moment_map(STD1, m[None])[0]
    h = 1e-3 * np.linalg.norm(x)
    Rgh, Ggh = riemann(gibbons_hawking_metric(1.0), np.concatenate([x, [0.0]])[None],
                       step=lambda v: np.full(v.shape[0], h))
    ka, kg = kretschmann(Ramb, Gamb)[0], kretschmann(Rgh, Ggh)[0]
    assert kg > 0
    assert abs(ka / kg - 1) < 1e-3


def test_curvature_decays_along_ray():
    d = np.array([1.0, 0.2, 0.3, -0.4])
    gh = curvature_along_ray_gh(STD1, 1.0, d, [4.0, 16.0, 64.0])
    assert gh[0].K > gh[1].K > gh[2].K
    # K rho_hat stays bounded: ratios between octaves shrink toward 1
    prod = [s.K * s.rho_hat for s in gh]
    assert max(prod) < 2 * prod[0]
    # the curvature-operator norm does not depend on the chart
    amb = curvature_along_ray(STD1, 1.0, d, [2.0])
    assert amb[0].K == pytest.approx(curvature_along_ray_gh(STD1, 1.0, d, [2.0], rel_step=1e-3)[0].K, rel=1e-4)


@pytest.mark.parametrize("weights", [(1,), (1, 1), (1, 2)])
def test_metric_jets_match_differences(weights, rng):
    act = CircleAction(weights)
    m = random_points(act.n, 3, rng)
    G, dG, ddG = metric_jets(act, 1.3, m)
    assert np.max(np.abs(G - deformed_metric(act, 1.3, m))) < 1e-14
    h = np.full(3, 1e-4)
    assert np.max(np.abs(fd.jacobian(lambda p: deformed_metric(act, 1.3, p), m, h=h) - dG)) < 1e-8
    assert np.max(np.abs(fd.jacobian(lambda p: metric_jets(act, 1.3, p)[1], m, h=h) - ddG)) < 1e-8
    Rfd, _ = riemann(deformed_metric_field(act, 1.3), m, rel_step=1e-3)
    assert np.max(np.abs(riemann_from_jets(G, dG, ddG) - Rfd)) < 1e-7


def test_operator_norm_bounds_every_plane(rng):
    act = CircleAction((1, 2))
    m = random_points(2, 1, rng)
    G, dG, ddG = metric_jets(act, 1.0, m)
    R = riemann_from_jets(G, dG, ddG)
    bound = curvature_operator_norm(R[0], G[0])
    X, Y = rng.standard_normal((2, 200, 8))
    K = sectional_from_riemann(np.repeat(R, 200, 0), np.repeat(G, 200, 0), X, Y)
    assert np.max(np.abs(K)) <= bound * (1 + 1e-10)
    frame = orthonormal_frame(G[0], np.eye(8))
    assert max_sectional(R[0], G[0], frame) <= bound * (1 + 1e-10)
    with pytest.raises(ValueError):
        curvature_along_ray_gh(CircleAction.standard(2), 1.0, np.ones(8), [1.0])


def test_straight_length_undeformed_is_radius(rng):
    act = CircleAction((1, 2))
    m = random_points(2, 20, rng, 0.1, 10)
    assert np.allclose(straight_length(m, act, 0.0), np.linalg.norm(m, axis=-1), rtol=1e-12)
    assert np.allclose(distance_upper(m, act, 0.0), np.linalg.norm(m, axis=-1), rtol=1e-12)


@pytest.mark.parametrize("a", [0.5, 1.0])
def test_straight_length_quadrature_vs_closed_form(a, rng):
    m = random_points(1, 20, rng, 0.5, 20)
    assert np.allclose(straight_length(m, STD1, a, nodes=128), straight_length_closed_form(m, STD1, a), rtol=1e-6)


def test_distance_bound_scaling_and_potential_comparison(rng):
    m = random_points(1, 20, rng, 1.0, 1.1)
    C = [np.max(distance_upper(lam * m, STD1, 1.0) / (lam**2 * np.sum(m * m, -1))) for lam in (8, 16, 32)]
    assert abs(C[2] / C[1] - 1) < 0.15
    ratio = [np.sqrt(potential_K1a(STD1, 1.0, lam * m)) / distance_upper(lam * m, STD1, 1.0) for lam in (1, 10, 100)]
    lo, hi = min(r.min() for r in ratio), max(r.max() for r in ratio)
    assert 0.1 < lo and hi < 10


def test_volume_density_is_metric_determinant(rng):
    act = CircleAction((1, 2))
    m = random_points(2, 10, rng)
    det = np.linalg.det(deformed_metric(act, 0.7, m))
    assert np.allclose(volume_density(act, 0.7, m), np.sqrt(det), rtol=1e-10)


def test_volume_growth_flat_and_deformed():
    slope0, _ = volume_growth(STD1, 0.0, [10, 20, 40, 80], 200_000, seed=3)
    assert abs(slope0 - 4) < 0.1
    slope1, est = volume_growth(STD1, 1.0, [10, 20, 40, 80], 400_000, seed=3)
    assert abs(slope1 - 3) < 0.15
    vols = [e.volume for e in est]
    assert vols == sorted(vols)
    again = volume_estimate(STD1, 1.0, 20.0, 400_000, seed=3)
    assert again.volume == volume_estimate(STD1, 1.0, 20.0, 400_000, seed=3).volume
    with pytest.raises(ValueError):
        volume_growth(STD1, 1.0, [10, 20, 40], 1000, seed=0)


def test_level_point_lies_on_level(rng):
    x = rng.standard_normal((5, 3))
    assert np.allclose(moment_map(STD1, level_point(STD1, x)), x, atol=1e-12)


def test_gh_gap_shrinks_from_above():
    pairs = [((1.0, 0, 0), (0, 1.0, 0))]
    rows = gh_probe(pairs, [1.0, 0.1, 0.01], STD1, 1.0, steps=500)
    gaps = [r.gap for r in rows]
    assert all(g >= -1e-9 for g in gaps)
    assert gaps[0] > gaps[1] > gaps[2]
    assert gaps[2] < 0.05
