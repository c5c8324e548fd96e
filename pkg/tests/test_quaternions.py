import numpy as np
import pytest
from hypothesis import example, given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from taubnut.quaternions import (
    BASIS,
    I,
    J,
    K,
    ONE,
    Quaternion,
    complex_structures,
    covering_phi,
    hamilton,
    quaternionic_residual,
    rotation_to_axis,
    sp1_act,
    sp1_matrix,
)

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)
quat4 = arrays(np.float64, 4, elements=finite)


def unit(v):
    n = np.linalg.norm(v)
    return None if n < 1e-3 else Quaternion.from_array(v / n)


def test_hamilton_relations():
    assert I * J == K and J * K == I and K * I == J
    for q in (I, J, K):
        assert q * q == -ONE
    assert I * J * K == -ONE


@given(quat4, quat4)
def test_norm_is_multiplicative(p, q):
    P, Q = Quaternion.from_array(p), Quaternion.from_array(q)
    assert abs((P * Q).norm() - P.norm() * Q.norm()) <= 1e-12 * max(1.0, P.norm() * Q.norm())


@given(quat4, quat4, quat4)
def test_associative(p, q, r):
    a = hamilton(hamilton(p, q), r)
    b = hamilton(p, hamilton(q, r))
    assert np.allclose(a, b, atol=1e-9 * max(1.0, np.abs(a).max()))


@pytest.mark.parametrize("n", [1, 2, 3])
def test_flat_structures_are_quaternionic(n):
    Is = complex_structures(n)
    assert quaternionic_residual(Is) == 0.0
    for A in Is:
        assert np.allclose(A.T @ A, np.eye(4 * n))
        assert np.allclose(A.T, -A)


@given(quat4, quat4)
def test_covering_is_a_homomorphism_onto_so3(p, q):
    P, Q = unit(p), unit(q)
    if P is None or Q is None:
        return
    R = covering_phi(P)
    assert np.allclose(R.T @ R, np.eye(3), atol=1e-12)
    assert abs(np.linalg.det(R) - 1.0) < 1e-12
    assert np.allclose(covering_phi(P * Q), R @ covering_phi(Q), atol=1e-12)
    # two-to-one: q and -q give the same rotation
    assert np.allclose(covering_phi(-P), R, atol=1e-15)


def test_covering_of_basis():
    assert np.allclose(covering_phi(ONE), np.eye(3))
    # i acts as rotation by pi about the first axis
    assert np.allclose(covering_phi(I), np.diag([1.0, -1.0, -1.0]))


@given(arrays(np.float64, 3, elements=finite))
@example(np.array([-1.0, 1e-9, 1e-9]))
def test_rotation_to_axis_maps_e1(x):
    if np.linalg.norm(x) < 1e-3:
        return
    q = Quaternion.from_array(rotation_to_axis(x))
    assert q.is_unit()
    assert np.allclose(covering_phi(q)[:, 0], x / np.linalg.norm(x), atol=1e-12)


def test_rotation_to_axis_conventions():
    assert np.allclose(rotation_to_axis(np.array([2.0, 0, 0])), [1, 0, 0, 0])
    assert np.allclose(rotation_to_axis(np.array([-1.0, 0, 0])), [0, 0, 0, 1])


def test_sp1_action_commutes_with_right_structures_and_is_orthogonal(rng):
    q = Quaternion.from_array(rng.standard_normal(4) / 1.0)
    q = Quaternion.from_array(q.as_array() / q.norm())
    M = sp1_matrix(q, 2)
    assert np.allclose(M.T @ M, np.eye(8))
    m = rng.standard_normal(8)
    assert np.allclose(sp1_act(q, m), M @ m)


def test_non_unit_rejected():
    with pytest.raises(ValueError):
        sp1_matrix(Quaternion(2.0), 1)
    with pytest.raises(ValueError):
        covering_phi(Quaternion(0.5, 0.5))


def test_basis_order():
    assert [b.as_array().argmax() for b in BASIS] == [0, 1, 2, 3]
