import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oulab.errors import ModelError, UnrepresentableError
from oulab.linalg import (expm, expm_many, hermitian_ratio_sup, kernel_basis, numerical_range,
                          numerical_rank, pencil_eigvals, pencil_sup_ratio, pseudo_apply, range_basis)
from helpers import taylor_expm

JORDAN = np.array([[-1.0, 1.0], [0.0, -1.0]])


# ---- expm

def test_expm_zero_generator():
    assert np.array_equal(expm([[0.0]], 1.0), [[1.0]])


def test_expm_t_zero_is_identity():
    assert np.array_equal(expm(JORDAN, 0.0), np.eye(2))


@pytest.mark.parametrize("t", [0.1, 1.0, 3.7, 20.0])
def test_expm_jordan_block_closed_form(t):
    expected = math.exp(-t) * np.array([[1.0, t], [0.0, 1.0]])
    np.testing.assert_allclose(expm(JORDAN, t), expected, rtol=1e-13, atol=1e-300)


def test_expm_matches_taylor_oracle(rng):
    for _ in range(10):
        A = rng.normal(size=(4, 4))
        np.testing.assert_allclose(expm(A, 0.3), taylor_expm(A, 0.3, 20), rtol=1e-10, atol=1e-12)


def test_expm_defective_uses_pade_route():
    # a 3x3 Jordan block: eigenvector matrix is singular
    J = -2 * np.eye(3) + np.diag([1.0, 1.0], 1)
    t = 0.7
    expected = math.exp(-2 * t) * np.array([[1, t, t * t / 2], [0, 1, t], [0, 0, 1]])
    np.testing.assert_allclose(expm(J, t), expected, rtol=1e-12)


@pytest.mark.parametrize("n", [2, 5, 10, 25, 50])
def test_expm_semigroup_property(rng, n):
    A = rng.normal(size=(n, n)) / math.sqrt(n)
    A -= (np.max(np.linalg.eigvals(A).real) + 0.1) * np.eye(n)
    s, t = 0.37, 1.21
    lhs = expm(A, s) @ expm(A, t)
    rhs = expm(A, s + t)
    assert np.linalg.norm(lhs - rhs) <= 1e-8 * np.linalg.norm(rhs)


def test_expm_overflow_is_reported():
    with pytest.raises(UnrepresentableError):
        expm([[1.0]], 1e4)
    with pytest.raises(UnrepresentableError):
        expm(np.array([[1.0, 1.0], [0.0, 1.0]]), 1e4)


def test_expm_rejects_bad_input():
    with pytest.raises(ModelError):
        expm(np.ones((2, 3)))
    with pytest.raises(ValueError):
        expm(JORDAN, -1.0)


def test_expm_many_matches_single(rng):
    A = rng.normal(size=(3, 3)) - 2 * np.eye(3)
    times = [0.0, 0.5, 2.0]
    stack = expm_many(A, times)
    for E, t in zip(stack, times):
        np.testing.assert_allclose(E, expm(A, t), atol=1e-12)


# ---- pencils

def test_pencil_trivial_ratio():
    r = pencil_sup_ratio(np.diag([0.0, 1.0]), np.eye(2))
    assert r.sup_ratio == pytest.approx(1.0)
    assert not r.kernel_violation


def test_pencil_kernel_violation():
    r = pencil_sup_ratio(np.diag([1.0, 0.0]), np.diag([0.0, 1.0]))
    assert r.sup_ratio == math.inf and r.kernel_violation
    np.testing.assert_allclose(np.abs(r.argmax_vector), [1.0, 0.0])


def test_pencil_invariant_covariance_not_in_noise_space():
    Qinf = 0.25 * np.array([[1.0, 1.0], [1.0, 2.0]])
    r = pencil_sup_ratio(Qinf, np.diag([0.0, 1.0]))
    assert r.sup_ratio == math.inf and r.kernel_violation


def test_pencil_rejects_asymmetric():
    with pytest.raises(ModelError):
        pencil_sup_ratio(np.array([[1.0, 1.0], [0.0, 1.0]]), np.eye(2))
    with pytest.raises(ModelError):
        pencil_sup_ratio(np.eye(2), np.eye(3))


def test_pencil_zero_numerator():
    assert pencil_sup_ratio(np.zeros((2, 2)), np.eye(2)).sup_ratio == 0.0


def _random_psd(rng, n, rank):
    B = rng.normal(size=(n, rank))
    return B @ B.T


@pytest.mark.parametrize("seed", range(5))
def test_pencil_bound_holds_on_random_vectors(seed):
    rng = np.random.default_rng(seed)
    n = 5
    R = _random_psd(rng, n, n)
    Q = _random_psd(rng, n, 3)
    r = pencil_sup_ratio(Q, R)
    assert math.isfinite(r.sup_ratio)
    X = rng.normal(size=(1000, n))
    X /= np.linalg.norm(X, axis=1, keepdims=True)
    q = np.einsum("ij,jk,ik->i", X, Q, X)
    rr = np.einsum("ij,jk,ik->i", X, R, X)
    assert np.all(q <= (r.sup_ratio + 1e-8) * rr)
    x = r.argmax_vector
    assert (x @ Q @ x) / (x @ R @ x) == pytest.approx(r.sup_ratio, rel=1e-9)


@pytest.mark.parametrize("seed", range(5))
def test_pencil_rank_deficient_nested_ranges(seed):
    rng = np.random.default_rng(100 + seed)
    B = rng.normal(size=(6, 3))
    R = B @ B.T
    C = B @ rng.normal(size=(3, 2))
    Q = C @ C.T
    r = pencil_sup_ratio(Q, R)
    assert math.isfinite(r.sup_ratio) and not r.kernel_violation


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 6), st.integers(1, 6), st.integers(0, 2 ** 32 - 1))
def test_pencil_self_ratio_is_one(n, k, seed):
    rng = np.random.default_rng(seed)
    Q = _random_psd(rng, n, min(k, n))
    assert pencil_sup_ratio(Q, Q).sup_ratio == pytest.approx(1.0, rel=1e-8)


def test_pencil_eigvals_known():
    vals = pencil_eigvals(np.diag([2.0, 3.0]), np.diag([1.0, 2.0]))
    np.testing.assert_allclose(vals, [2.0, 1.5])


def test_hermitian_ratio_sup():
    B = np.array([[0, -2j], [2j, 0]])
    assert hermitian_ratio_sup(B, np.eye(2)).sup_ratio == pytest.approx(2.0)
    r = hermitian_ratio_sup(np.array([[0, 1j], [-1j, 0]]), np.diag([0.0, 1.0]))
    assert r.sup_ratio == math.inf and r.kernel_violation
    assert hermitian_ratio_sup(np.diag([0.0, 1.0]), np.diag([0.0, 1.0])).sup_ratio == pytest.approx(1.0)


# ---- least norm

def test_pseudo_apply_identity(rng):
    y = rng.normal(size=4)
    res = pseudo_apply(np.eye(4), y)
    np.testing.assert_allclose(res.solution, y)
    assert res.residual == pytest.approx(0.0, abs=1e-15) and res.in_range


def test_pseudo_apply_outside_range():
    res = pseudo_apply([[1.0], [0.0]], [0.0, 1.0])
    np.testing.assert_allclose(res.solution, [0.0])
    assert res.residual == pytest.approx(1.0)
    assert not res.in_range


def test_pseudo_apply_recovers_row_space_projection(rng):
    B = rng.normal(size=(5, 3))
    u0 = rng.normal(size=3)
    res = pseudo_apply(B, B @ u0)
    np.testing.assert_allclose(res.solution, u0, atol=1e-10)
    assert res.residual <= 1e-10
    # rank-deficient factor: least-norm solution is the projection on the row space
    B2 = np.hstack([B, B[:, :1]])
    u1 = rng.normal(size=4)
    res2 = pseudo_apply(B2, B2 @ u1)
    P = np.linalg.pinv(B2) @ B2
    np.testing.assert_allclose(res2.solution, P @ u1, atol=1e-10)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 6), st.integers(1, 6), st.integers(0, 2 ** 32 - 1))
def test_pseudo_apply_residual_property(n, m, seed):
    rng = np.random.default_rng(seed)
    B = rng.normal(size=(n, m))
    u = rng.normal(size=m)
    y = B @ u
    res = pseudo_apply(B, y)
    assert res.residual <= 1e-10 * max(np.linalg.norm(y), 1e-300) + 1e-300
    assert res.in_range


def test_rank_helpers():
    M = np.array([[1.0, 2.0], [2.0, 4.0]])
    assert numerical_rank(M) == 1
    assert range_basis(M).shape == (2, 1)
    K = kernel_basis(M)
    assert K.shape == (2, 1)
    np.testing.assert_allclose(M @ K, 0.0, atol=1e-14)


# ---- numerical range

def test_numerical_range_diagonal_is_real_segment():
    s = numerical_range(np.diag([-1.0, -2.0]), 90)
    assert np.all(np.abs(s.boundary_points.imag) < 1e-12)
    assert np.all(s.boundary_points.real >= -2 - 1e-12) and np.all(s.boundary_points.real <= -1 + 1e-12)
    assert s.sector_ratio() == pytest.approx(0.0, abs=1e-12)


def test_numerical_range_jordan_block_is_disk():
    s = numerical_range(JORDAN, 360)
    np.testing.assert_allclose(np.abs(s.boundary_points + 1.0), 0.5, atol=1e-10)
    # dense Rayleigh-quotient sampling stays inside the disk and fills it out
    rng = np.random.default_rng(3)
    Z = rng.normal(size=(20000, 2)) + 1j * rng.normal(size=(20000, 2))
    Z /= np.linalg.norm(Z, axis=1, keepdims=True)
    w = np.einsum("ij,jk,ik->i", Z.conj(), JORDAN, Z)
    d = np.abs(w + 1.0)
    assert d.max() <= 0.5 + 1e-12
    assert d.max() > 0.49


def test_numerical_range_zero_matrix():
    s = numerical_range(np.zeros((3, 3)), 16)
    assert np.all(s.boundary_points == 0)
    assert s.sector_ratio() == 0.0


def test_numerical_range_points_are_rayleigh_quotients(rng):
    M = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    s = numerical_range(M, 64)
    for z, p in zip(s.vectors, s.boundary_points):
        assert abs(np.linalg.norm(z) - 1) < 1e-12
        assert abs(z.conj() @ M @ z - p) < 1e-10


def test_numerical_range_refinement_adds_points():
    s = numerical_range(np.array([[-1.0, 2.0], [-2.0, -1.0]]), 32, refine=True)
    assert s.boundary_points.size > 32
    assert s.sector_ratio() == pytest.approx(2.0, rel=1e-12)


def test_sector_ratio_infinite_when_touching_imaginary_axis():
    s = numerical_range(np.array([[0.0, 1.0], [-1.0, 0.0]]), 32)
    assert s.sector_ratio() == math.inf
