import math

import numpy as np
import pytest
from scipy.linalg import solve_discrete_are

from conftest import random_schur
from hotmrac.exceptions import ConvergenceError, DimensionError, StabilityError
from hotmrac.lti import (
    StateSpace,
    discretize_zoh,
    is_controllable,
    is_schur_stable,
    solve_dare_iterative,
    solve_dlqr,
    solve_dlyap,
    spectral_radius,
)
from oracles import scalar_lqr_p, zoh_series


@pytest.mark.parametrize(
    "A, expected",
    [
        (np.zeros((2, 2)), True),
        (np.eye(2), False),
        (np.diag([0.5, -0.9]), True),
        (np.array([[0.0, 1.0], [-1.0, 0.0]]), False),
    ],
)
def test_is_schur_stable(A, expected):
    assert is_schur_stable(A, tol=1e-12) is expected


def test_schur_rejects_non_square():
    with pytest.raises(DimensionError):
        is_schur_stable(np.zeros((2, 3)))


def test_state_space_rank_check():
    with pytest.raises(ValueError):
        StateSpace(np.eye(2), np.array([[1.0, 2.0], [2.0, 4.0]]))
    with pytest.raises(DimensionError):
        StateSpace(np.eye(2), np.ones((3, 1)))


@pytest.mark.parametrize(
    "A, Q, P",
    [
        (np.zeros((2, 2)), np.eye(2), np.eye(2)),
        (np.array([[0.5]]), np.array([[1.0]]), np.array([[4.0 / 3.0]])),
    ],
)
def test_dlyap_closed_form(A, Q, P):
    np.testing.assert_allclose(solve_dlyap(A, Q), P, rtol=1e-14, atol=1e-14)


def test_dlyap_random_residual(rng):
    for _ in range(100):
        n = int(rng.integers(1, 6))
        A = random_schur(rng, n, rng.uniform(0.1, 0.99))
        L = rng.normal(size=(n, n))
        Q = L @ L.T + 0.1 * np.eye(n)
        P = solve_dlyap(A, Q)
        res = np.linalg.norm(A.T @ P @ A - P + Q)
        assert res <= 1e-10 * np.linalg.norm(Q)
        assert np.linalg.norm(P - P.T) <= 1e-12 * np.linalg.norm(P)
        assert np.linalg.eigvalsh(P).min() > 0


def test_dlyap_matches_stability(rng):
    # Schur-stable iff a positive-definite solution exists
    for _ in range(100):
        n = int(rng.integers(1, 5))
        A = random_schur(rng, n, rng.uniform(0.2, 1.8))
        if spectral_radius(A) < 1:
            P = solve_dlyap(A, np.eye(n))
            assert np.linalg.eigvalsh(P).min() > 0
        else:
            with pytest.raises(StabilityError):
                solve_dlyap(A, np.eye(n))


def test_dlyap_rejects_indefinite_q():
    with pytest.raises(ValueError):
        solve_dlyap(np.zeros((2, 2)), np.diag([1.0, -1.0]))
    with pytest.raises(ValueError):
        solve_dlyap(np.zeros((2, 2)), np.array([[1.0, 0.5], [0.0, 1.0]]))


def test_zoh_trivial():
    ss = discretize_zoh(np.zeros((2, 2)), np.eye(2), 0.01)
    np.testing.assert_allclose(ss.A, np.eye(2), atol=1e-15)
    np.testing.assert_allclose(ss.B, 0.01 * np.eye(2), rtol=1e-14)


def test_zoh_scalar_closed_form():
    ss = discretize_zoh(np.array([[-1.0]]), np.array([[1.0]]), 0.01)
    assert ss.A[0, 0] == pytest.approx(math.exp(-0.01), rel=1e-14)
    assert ss.B[0, 0] == pytest.approx(1 - math.exp(-0.01), rel=1e-10)


def test_zoh_matches_series(rng):
    for _ in range(100):
        A_c = rng.normal(size=(3, 3))
        B_c = rng.normal(size=(3, 1))
        ss = discretize_zoh(A_c, B_c, 0.01)
        A_ref, B_ref = zoh_series(A_c, B_c, 0.01)
        np.testing.assert_allclose(ss.A, A_ref, rtol=1e-9, atol=1e-12)
        np.testing.assert_allclose(ss.B, B_ref, rtol=1e-9, atol=1e-12)


@pytest.mark.parametrize("dt", [1e-3, 1e-2, 0.05])
def test_zoh_small_dt_bound(rng, dt):
    A_c = rng.normal(size=(3, 3))
    if dt > 1 / (2 * np.linalg.norm(A_c, 2)):
        A_c *= 1 / (2 * dt * np.linalg.norm(A_c, 2))
    ss = discretize_zoh(A_c, np.ones((3, 1)), dt)
    assert np.linalg.norm(ss.A - np.eye(3), 2) <= 2 * np.linalg.norm(A_c, 2) * dt


@pytest.mark.parametrize("dt", [0.0, -0.1])
def test_zoh_rejects_bad_dt(dt):
    with pytest.raises(ValueError):
        discretize_zoh(np.zeros((1, 1)), np.ones((1, 1)), dt)


def test_dlqr_deadbeat_scalar():
    K = solve_dlqr(StateSpace([[0.0]], [[1.0]]), [[1.0]], [[1.0]])
    assert K[0, 0] == pytest.approx(0.0, abs=1e-15)


def test_dlqr_integrator_scalar():
    p = scalar_lqr_p(1.0, 1.0, 1.0, 1.0)
    assert p == pytest.approx((1 + math.sqrt(5)) / 2, rel=1e-14)
    ss = StateSpace([[1.0]], [[1.0]])
    P = solve_dare_iterative(ss, [[1.0]], [[1.0]])
    assert P[0, 0] == pytest.approx(p, rel=1e-11)
    K = solve_dlqr(ss, [[1.0]], [[1.0]])
    assert K[0, 0] == pytest.approx(-p / (1 + p), rel=1e-11)


def _riccati_residual(A, B, Q, R, P):
    rhs = Q + A.T @ P @ A - A.T @ P @ B @ np.linalg.solve(R + B.T @ P @ B, B.T @ P @ A)
    return np.linalg.norm(P - rhs) / np.linalg.norm(P)


def test_dlqr_random(rng):
    done = 0
    while done < 100:
        A = rng.normal(size=(3, 3))
        B = rng.normal(size=(3, 1))
        if not is_controllable(A, B):
            continue
        Q, R = np.eye(3), np.eye(1)
        ss = StateSpace(A, B)
        P = solve_dare_iterative(ss, Q, R)
        assert _riccati_residual(A, B, Q, R, P) <= 1e-12
        np.testing.assert_allclose(P, solve_discrete_are(A, B, Q, R), rtol=1e-8)
        K = solve_dlqr(ss, Q, R)
        assert spectral_radius(A + B @ K) < 1
        done += 1


def test_dlqr_iteration_cap():
    with pytest.raises(ConvergenceError):
        solve_dare_iterative(StateSpace([[3.0]], [[1.0]]), [[1.0]], [[1.0]], max_iter=2)


def test_controllability():
    A = np.diag([0.5, 0.7])
    assert is_controllable(A, np.array([[1.0], [1.0]]))
    assert not is_controllable(A, np.array([[1.0], [0.0]]))
