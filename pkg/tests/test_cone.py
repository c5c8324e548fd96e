import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import random_points
from taubnut.cone import (
    CircleAction,
    DegenerateActionError,
    circle_generator,
    connection_data,
    from_complex,
    horizontal_projector,
    moment_differentials,
    moment_map,
    moment_map_closed_form,
    orbit_frame,
    to_complex,
)
from taubnut.quaternions import Quaternion, covering_phi, sp1_act

ACTIONS = [CircleAction((1,)), CircleAction((3,)), CircleAction((1, 1)), CircleAction((1, 2)),
           CircleAction((2, -1, 3))]


@pytest.mark.parametrize("act", ACTIONS, ids=str)
def test_moment_map_matches_complex_formula(act, rng):
    m = random_points(act.n, 200, rng)
    assert np.allclose(moment_map(act, m), moment_map_closed_form(act, m), atol=1e-13)


def test_standard_n1_moment_norm_is_half_rho_squared(rng):
    act = CircleAction.standard(1)
    m = random_points(1, 100, rng)
    assert np.allclose(np.linalg.norm(moment_map(act, m), axis=-1), 0.5 * np.sum(m * m, axis=-1))


def test_complex_round_trip(rng):
    m = rng.standard_normal((5, 12))
    z, w = to_complex(m)
    assert np.allclose(from_complex(z, w), m)


@pytest.mark.parametrize("act", ACTIONS, ids=str)
def test_moment_map_is_circle_invariant_and_sp1_equivariant(act, rng):
    m = random_points(act.n, 50, rng)
    assert np.allclose(moment_map(act, m @ act.orbit_matrix(0.7).T), moment_map(act, m), atol=1e-13)
    q = Quaternion.from_array(np.array([0.3, -0.5, 0.1, 0.8]) / np.linalg.norm([0.3, -0.5, 0.1, 0.8]))
    lhs = moment_map(act, sp1_act(q, m))
    rhs = moment_map(act, m) @ covering_phi(q).T
    assert np.allclose(lhs, rhs, atol=1e-13)


@pytest.mark.parametrize("act", ACTIONS, ids=str)
def test_moment_differentials_match_finite_differences(act, rng):
    m = random_points(act.n, 3, rng)
    h = 1e-6
    for b in range(m.shape[0]):
        J = np.stack([(moment_map(act, m[b] + h * e) - moment_map(act, m[b] - h * e)) / (2 * h)
                      for e in np.eye(act.dim)], axis=-1)
        assert np.allclose(J, moment_differentials(act, m[b]), atol=1e-8)


def test_orbit_is_periodic_and_generated_by_T(rng):
    act = CircleAction((1, 2))
    assert np.allclose(act.orbit_matrix(2 * np.pi), np.eye(8), atol=1e-12)
    m = rng.standard_normal(8)
    t = 1e-6
    d = (act.orbit_matrix(t) @ m - act.orbit_matrix(-t) @ m) / (2 * t)
    assert np.allclose(d, circle_generator(act, m), atol=1e-8)


@pytest.mark.parametrize("act", ACTIONS, ids=str)
def test_orbit_frame_orthogonal_and_projector_rank(act, rng):
    m = random_points(act.n, 10, rng)
    F = orbit_frame(act, m)
    G = np.einsum("bia,bja->bij", F, F)
    t2 = G[:, 0, 0]
    assert np.allclose(G, t2[:, None, None] * np.eye(4), atol=1e-12)
    P = horizontal_projector(act, m)
    assert np.allclose(P @ P, P, atol=1e-12)
    assert np.allclose(np.trace(P, axis1=-2, axis2=-1), act.dim - 4)


def test_connection_eta_of_T_is_one(rng):
    act = CircleAction((1, 2))
    m = random_points(2, 20, rng)
    cd = connection_data(act, m)
    assert np.allclose(np.sum(cd.eta * circle_generator(act, m), axis=-1), 1.0)


def test_degenerate_point_rejected():
    act = CircleAction((1, 0))
    m = np.zeros(8)
    m[4] = 1.0
    with pytest.raises(DegenerateActionError):
        connection_data(act, m)


@given(st.lists(st.integers(-5, 5), min_size=1, max_size=3))
def test_generator_antisymmetric_and_commutes_with_structures(w):
    act = CircleAction(w)
    A = act.generator_matrix
    assert np.allclose(A, -A.T)
    for Ij in act.structures:
        assert np.allclose(A @ Ij, Ij @ A)


def test_non_integer_weights_rejected():
    with pytest.raises(ValueError):
        CircleAction((1.5,))
