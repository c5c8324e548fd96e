import numpy as np
import pytest

from conftest import random_points
from taubnut import fd
from taubnut.cone import CircleAction, circle_generator, from_complex, moment_differentials
from taubnut.deformation import (
    alpha_positivity,
    alpha_threshold,
    dc_K1a,
    dc_K1a_formula,
    decomposition_check,
    deformed_metric,
    deformed_one_form,
    deformed_structure,
    dkdck_bound,
    dkdck_constant,
    grad_K1a,
    one_form_typing_residual,
    potential_K1a,
    undeformed_structure,
    wedge,
)
from taubnut.identities import closedness_residuals, moment_residual, potential_residual
from taubnut.quaternions import Quaternion, covering_phi, quaternionic_residual, sp1_matrix

ACTIONS = [CircleAction((1,)), CircleAction((1, 1)), CircleAction((1, 2))]


@pytest.mark.parametrize("act", ACTIONS, ids=str)
def test_zero_deformation_is_flat(act, rng):
    m = random_points(act.n, 50, rng)
    S, S0 = deformed_structure(act, 0.0, m), undeformed_structure(act, m)
    assert np.max(np.abs(S.g - S0.g)) < 1e-13
    assert np.max(np.abs(S.I - S0.I)) < 1e-13
    assert np.max(np.abs(S.omega - S0.omega)) < 1e-13


@pytest.mark.parametrize("act", ACTIONS, ids=str)
@pytest.mark.parametrize("a", [0.5, 1.0, 2.0])
def test_symplectic_forms_shift_by_moment_wedge(act, a, rng):
    m = random_points(act.n, 50, rng)
    S, S0 = deformed_structure(act, a, m), undeformed_structure(act, m)
    dx = moment_differentials(act, m)
    for i, (j, k) in enumerate(((1, 2), (2, 0), (0, 1))):
        expect = S0.omega[:, i] + a * a * wedge(dx[:, j], dx[:, k])
        assert np.max(np.abs(S.omega[:, i] - expect)) < 1e-12 * (1 + a * a)


@pytest.mark.parametrize("act", ACTIONS, ids=str)
@pytest.mark.parametrize("a", [0.5, 1.0, 2.0])
def test_structures_quaternionic_and_metric_positive(act, a, rng):
    m = random_points(act.n, 1000, rng)
    S = deformed_structure(act, a, m)
    assert quaternionic_residual(np.moveaxis(S.I, 1, 0)) < 1e-10
    assert np.all(np.linalg.eigvalsh(S.g)[:, 0] > 0)


def test_potential_example():
    act = CircleAction.standard(1)
    m = from_complex([1.0], [0.0])
    assert potential_K1a(act, 2.0, m) == pytest.approx(1.5, abs=1e-15)
    assert potential_K1a(act, 0.0, 3 * m) == pytest.approx(4.5)


@pytest.mark.parametrize("act", ACTIONS, ids=str)
def test_potential_gradient_and_dc_formula(act, rng):
    m = random_points(act.n, 5, rng)
    g = fd.gradient(lambda p: potential_K1a(act, 1.3, p), m, h=np.full(5, 1e-3))
    assert np.allclose(g, grad_K1a(act, 1.3, m), atol=1e-9)
    assert np.allclose(dc_K1a(act, 1.3, m), dc_K1a_formula(act, 1.3, m), atol=1e-12)


@pytest.mark.parametrize("act", ACTIONS, ids=str)
@pytest.mark.parametrize("a", [0.0, 1.0, 2.0])
def test_differential_identities(act, a, rng):
    m = random_points(act.n, 10, rng)
    assert closedness_residuals(act, a, m) < 1e-6
    assert moment_residual(act, a, m) < 1e-7
    assert potential_residual(act, a, m) < 1e-6


def test_one_form_examples():
    act = CircleAction.standard(1)
    m = from_complex([1.0], [0.0])[None]
    dz1 = np.array([[1.0, 1j, 0, 0]])  # dz = dq0 + i dq1
    psi = deformed_one_form(dz1, 1, act, 1.0, m)
    S = deformed_structure(act, 1.0, m)
    assert one_form_typing_residual(psi, S.I[:, 0]) < 1e-12
    assert np.allclose(deformed_one_form(dz1, 1, act, 0.0, m), dz1)
    # alpha(T) = 0 leaves alpha unchanged: dw at (1, 0) pairs to zero with T = (0, 1, 0, 0)
    dw = np.array([[0, 0, 1.0, 1j]])
    assert np.allclose(np.sum(dw * circle_generator(act, m), axis=-1), 0)
    assert np.allclose(deformed_one_form(dw, 1, act, 2.0, m), dw)
    with pytest.raises(ValueError):
        deformed_one_form(np.array([[1.0, -1j, 0, 0]]), 1, act, 1.0, m)


@pytest.mark.parametrize("a", [0.0, 1.0])
def test_decomposition_reconstructs(a, rng):
    act = CircleAction.standard(2)
    m = random_points(2, 1000, rng)
    r = decomposition_check(act, a, m)
    assert r["metric"] < 1e-10 and r["omega"] < 1e-10
    assert r["projector_idempotence"] < 1e-13


def test_sp1_isometry_and_rotation_of_structures(rng):
    act = CircleAction((1, 2))
    a = 1.5
    m = random_points(2, 20, rng)
    v = rng.standard_normal(4)
    q = Quaternion.from_array(v / np.linalg.norm(v))
    Q = sp1_matrix(q, 2)
    qm = m @ Q.T
    G, Gq = deformed_metric(act, a, m), deformed_metric(act, a, qm)
    assert np.max(np.abs(Q.T @ Gq @ Q - G)) < 1e-9
    # dq o I_1^a = I_x^a o dq with x = phi(q) e1
    x = covering_phi(q)[:, 0]
    S, Sq = deformed_structure(act, a, m), deformed_structure(act, a, qm)
    Ix = np.einsum("i,bijk->bjk", x, Sq.I)
    assert np.max(np.abs(Q @ S.I[:, 0] - Ix @ Q)) < 1e-9


def test_circle_invariance_of_metric(rng):
    act = CircleAction((1, 2))
    m = random_points(2, 20, rng)
    E = act.orbit_matrix(0.37)
    G, Gt = deformed_metric(act, 1.0, m), deformed_metric(act, 1.0, m @ E.T)
    assert np.max(np.abs(E.T @ Gt @ E - G)) < 1e-8


def test_dkdck_flat_constant_and_scaling(rng):
    act = CircleAction.standard(2)
    m = random_points(2, 500, rng)
    # flat: |d(rho^2/2)|^2 + |d^c(rho^2/2)|^2 = 2 rho^2 |X|^2 cos^2-type bound, so C <= 4
    C0 = dkdck_bound(act, 0.0, m)
    assert C0 <= 4.0 + 1e-12
    # brute-force Rayleigh quotient on random vectors never exceeds the returned constant
    X = rng.standard_normal((500, 8))
    g = m
    c = -np.einsum("ba,zb->za", act.structures[0], g)
    lhs = np.sum(g * X, -1) ** 2 + np.sum(c * X, -1) ** 2
    rhs = dkdck_constant(act, 0.0, m) * potential_K1a(act, 0.0, m) * np.sum(X * X, -1)
    assert np.all(lhs <= rhs * (1 + 1e-10))
    C10 = dkdck_bound(act, 1.0, 10 * random_points(2, 500, rng, 10, 20))
    C100 = dkdck_bound(act, 1.0, 10 * random_points(2, 500, rng, 100, 200))
    assert abs(C100 / C10 - 1) < 0.10


def test_alpha_positivity_near_one(rng):
    act = CircleAction.standard(1)
    m = random_points(1, 2000, rng, 0.1, 50)
    assert alpha_positivity(act, 1.0, 1.0, m) > 0
    assert alpha_positivity(act, 1.0, 0.95, m) > 0
    th = alpha_threshold(act, 1.0, m[:300])
    assert th is not None and th <= 0.95
    with pytest.raises(ValueError):
        alpha_positivity(act, 1.0, 1.5, m)
