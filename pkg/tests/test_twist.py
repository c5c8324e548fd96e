import numpy as np
import pytest
from hypothesis import given, strategies as st

from taubnut.closed_forms import tc_level_rho2
from taubnut.cone import CircleAction, circle_generator, moment_map
from taubnut.quaternions import Quaternion, covering_phi, random_unit_quaternions, sp1_act_array
from taubnut.twist import (
    TwistPoint,
    asymptotic_deviation,
    choose_qx,
    model_metric,
    pullback_metric,
    radial_length,
    twist_inverse,
    twist_map,
    zero_level_points,
)

STD2 = CircleAction.standard(2)
W12 = CircleAction((1, 2))


def test_qx_conventions():
    assert np.allclose(choose_qx([2.0, 0, 0]).as_array(), [1, 0, 0, 0])
    assert np.allclose(np.abs(choose_qx([-1.0, 0, 0]).as_array()), [0, 0, 0, 1])
    with pytest.raises(ValueError):
        choose_qx([0.0, 0, 0])


@given(st.lists(st.floats(-10, 10), min_size=3, max_size=3).filter(lambda v: np.linalg.norm(v) > 1e-3))
def test_qx_maps_e1_to_direction(v):
    x = np.array(v)
    R = covering_phi(choose_qx(x))
    assert np.allclose(R[:, 0], x / np.linalg.norm(x), atol=1e-12)


def test_zero_level_points(rng):
    m0 = zero_level_points(3, 50, rng, radius=2.0, weights=(1, 2, 3))
    assert np.max(np.abs(moment_map(CircleAction((1, 2, 3)), m0))) < 1e-12
    assert np.allclose(np.linalg.norm(m0, axis=-1), 2.0)


@pytest.mark.parametrize("act", [STD2, W12], ids=str)
def test_twist_contract_and_round_trip(act, rng):
    m0 = zero_level_points(2, 20, rng, weights=act.weights)
    x = rng.standard_normal((20, 3))
    x[0] = 0
    p = twist_map(m0, x, act)
    assert np.array_equal(p[0], m0[0])
    assert np.max(np.abs(moment_map(act, p) - x)) < 1e-8
    base, xr = twist_inverse(p[1:], act)
    assert np.allclose(xr, x[1:], atol=1e-10)
    # equal up to the circle action: same radius and same orbit invariants
    assert np.max(np.abs(np.linalg.norm(base, axis=-1) - np.linalg.norm(m0[1:], axis=-1))) < 1e-7
    assert np.max(np.abs(moment_map(act, base))) < 1e-8


def test_standard_action_level_radius(rng):
    m0 = zero_level_points(2, 10, rng)
    x1 = rng.uniform(0.1, 5, 10)
    p = twist_map(m0, np.stack([x1, 0 * x1, 0 * x1], -1), STD2)
    r0 = np.sum(m0**2, -1)
    assert np.max(np.abs(np.sum(p**2, -1) - tc_level_rho2(r0, x1))) < 1e-8


def test_twist_equivariance(rng):
    m0 = zero_level_points(2, 10, rng, weights=(1, 2))
    x = rng.standard_normal((10, 3))
    q = random_unit_quaternions(rng, 10)
    R = np.stack([covering_phi(Quaternion.from_array(r)) for r in q])
    lhs = twist_map(sp1_act_array(q, m0), np.einsum("zij,zj->zi", R, x), W12)
    rhs = sp1_act_array(q, twist_map(m0, x, W12))
    assert np.max(np.abs(moment_map(W12, lhs) - moment_map(W12, rhs))) < 1e-8
    assert np.max(np.abs(np.linalg.norm(lhs, axis=-1) - np.linalg.norm(rhs, axis=-1))) < 1e-8


@pytest.mark.parametrize("a", [1.0, 2.0])
def test_pullback_blocks(a, rng):
    m0 = zero_level_points(2, 1, rng, radius=2.0)[0]
    tp = TwistPoint(m0, np.array([0.7, 0, 0]))
    G = pullback_metric(tp, STD2, a)
    p = twist_map(m0, tp.x, STD2)[0]
    T = circle_generator(STD2, p)
    V = 1.0 / np.sum(T * T)
    k = 4
    assert abs(G[k + 1, k + 1] / (V + a * a) - 1) < 1e-5
    assert abs(G[k + 1, k + 2]) < 1e-6
    assert abs(G[k, k] - 1 / (V + a * a)) < 1e-6
    M = model_metric(tp, STD2, a).matrix
    assert np.allclose(M, M.T)


def test_model_fiber_scales_inverse_square(rng):
    m0 = zero_level_points(2, 1, rng, radius=3.0)[0]
    tp = TwistPoint(m0, np.array([0.5, 0.2, 0]))
    f1 = model_metric(tp, STD2, 1.0).matrix[4, 4]
    f2 = model_metric(tp, STD2, 2.0).matrix[4, 4]
    assert f1 / f2 == pytest.approx(4.0, rel=1e-12)
    with pytest.raises(ValueError):
        model_metric(tp, STD2, 0.0)


def test_deviation_decays_along_ray(rng):
    u = zero_level_points(2, 1, rng)[0]
    xhat = np.array([1.0, 0, 0])
    dev = [asymptotic_deviation(TwistPoint(r * u, r * xhat), STD2, 1.0) for r in (8.0, 16.0, 32.0)]
    assert dev[0] > dev[1] > dev[2]
    assert dev[2] < 0.05


def test_radial_length_scaling(rng):
    m0 = zero_level_points(2, 1, rng, radius=1.5)[0]
    direct = [radial_length(m0, s, STD2, nodes=16) for s in (0.1, 10.0)]
    scaled = radial_length(m0 / np.sqrt(10.0), 1.0, STD2, nodes=16) * np.sqrt(10.0)
    assert scaled == pytest.approx(direct[1], rel=1e-6)
    assert max(d / 1.5 for d in direct) < 5.0
