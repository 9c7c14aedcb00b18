"""Discrete-time LTI support: stability, Lyapunov and Riccati solvers, ZOH."""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from .exceptions import ConvergenceError, DimensionError, StabilityError

__all__ = [
    "StateSpace",
    "is_schur_stable",
    "spectral_radius",
    "solve_dlyap",
    "discretize_zoh",
    "solve_dlqr",
    "solve_dare_iterative",
    "riccati_step",
    "matrix_rank",
    "is_controllable",
]

RANK_RTOL = 1e-10


def _square(A, name="A"):
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {A.shape}")
    return A


def matrix_rank(M, rtol=RANK_RTOL):
    """Numerical rank with threshold ``rtol`` times the largest singular value."""
    s = np.linalg.svd(np.atleast_2d(M), compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.sum(s > rtol * s[0]))


@dataclass(frozen=True)
class StateSpace:
    """Discrete-time pair ``x+ = A x + B u`` sampled every ``dt`` seconds."""

    A: np.ndarray
    B: np.ndarray
    dt: float = 1.0

    def __post_init__(self):
        A = _square(self.A)
        B = np.asarray(self.B, dtype=float)
        if B.ndim == 1:
            B = B[:, None]
        if B.ndim != 2 or B.shape[0] != A.shape[0] or B.shape[1] < 1:
            raise DimensionError(f"B must be {A.shape[0]}xm, got shape {B.shape}")
        if matrix_rank(B) != B.shape[1]:
            raise ValueError("columns of B must be linearly independent")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def m(self):
        return self.B.shape[1]


def spectral_radius(A):
    A = _square(A)
    return float(np.max(np.abs(np.linalg.eigvals(A))))


def is_schur_stable(A, tol=1e-12):
    """True iff every eigenvalue of ``A`` has modulus below ``1 - tol``."""
    return spectral_radius(A) < 1.0 - tol


def _is_spd(Q):
    if not np.allclose(Q, Q.T, rtol=0.0, atol=1e-12 * max(1.0, np.abs(Q).max())):
        return False
    try:
        np.linalg.cholesky(Q)
    except np.linalg.LinAlgError:
        return False
    return True


def solve_dlyap(A, Q):
    """Solve ``A^T P A - P = -Q`` for symmetric positive-definite ``P``.

    Uses the Kronecker (vectorized) form, so keep ``n`` small (a few tens).

    Raises
    ------
    StabilityError
        If ``A`` is not Schur-stable (no positive-definite solution exists).
    ValueError
        If ``Q`` is not symmetric positive-definite.
    """
    A = _square(A)
    Q = _square(Q, "Q")
    n = A.shape[0]
    if Q.shape != A.shape:
        raise DimensionError(f"Q must be {n}x{n}, got {Q.shape}")
    if not _is_spd(Q):
        raise ValueError("Q must be symmetric positive-definite")
    if not is_schur_stable(A, tol=0.0):
        raise StabilityError(f"A is not Schur-stable (spectral radius {spectral_radius(A):.6g})")
    # vec(A^T P A) = (A^T kron A^T) vec(P) in column-major order
    At = A.T
    lhs = np.kron(At, At) - np.eye(n * n)
    vecP = np.linalg.solve(lhs, -Q.reshape(-1, order="F"))
    P = vecP.reshape((n, n), order="F")
    return 0.5 * (P + P.T)


def discretize_zoh(A_c, B_c, dt):
    """Zero-order-hold discretization via the augmented matrix exponential."""
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    A_c = _square(A_c, "A_c")
    B_c = np.asarray(B_c, dtype=float)
    if B_c.ndim == 1:
        B_c = B_c[:, None]
    n, m = B_c.shape
    if n != A_c.shape[0]:
        raise DimensionError(f"B_c must have {A_c.shape[0]} rows, got {n}")
    M = np.zeros((n + m, n + m))
    M[:n, :n] = A_c
    M[:n, n:] = B_c
    E = expm(M * dt)
    return StateSpace(E[:n, :n], E[:n, n:], dt=float(dt))


def solve_dare_iterative(ss, Q, R, max_iter=100_000, rtol=1e-12):
    """Stabilizing solution ``P`` of the discrete algebraic Riccati equation.

    Iterates the Riccati recursion from ``P = Q`` until successive iterates
    agree to ``rtol`` (relative, Frobenius norm).

    Raises
    ------
    ConvergenceError
        If the recursion has not reached a fixed point after ``max_iter`` steps.
    """
    A, B = ss.A, ss.B
    n, m = B.shape
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    R = np.atleast_2d(np.asarray(R, dtype=float))
    if Q.shape != (n, n) or R.shape != (m, m):
        raise DimensionError(f"Q must be {n}x{n} and R {m}x{m}")
    if not np.allclose(Q, Q.T) or np.linalg.eigvalsh(0.5 * (Q + Q.T)).min() < -1e-12:
        raise ValueError("Q must be symmetric positive semi-definite")
    if not _is_spd(R):
        raise ValueError("R must be symmetric positive-definite")

    P = Q.copy()
    for _ in range(max_iter):
        P_next = riccati_step(A, B, Q, R, P)
        if np.linalg.norm(P_next - P) <= rtol * np.linalg.norm(P_next):
            return P_next
        P = P_next
    raise ConvergenceError(f"Riccati recursion did not converge in {max_iter} iterations")


def solve_dlqr(ss, Q, R, max_iter=100_000, rtol=1e-12):
    """Infinite-horizon discrete LQR gain.

    Returns ``K`` such that ``u = K x`` minimizes the quadratic cost, i.e. the
    closed loop is ``A + B K`` (note the sign).
    """
    P = solve_dare_iterative(ss, Q, R, max_iter=max_iter, rtol=rtol)
    R = np.atleast_2d(np.asarray(R, dtype=float))
    return -np.linalg.solve(R + ss.B.T @ P @ ss.B, ss.B.T @ P @ ss.A)


def riccati_step(A, B, Q, R, P):
    """One step ``Q + A'PA - A'PB (R + B'PB)^-1 B'PA`` (symmetrized)."""
    BtPA = B.T @ P @ A
    P_next = Q + A.T @ P @ A - BtPA.T @ np.linalg.solve(R + B.T @ P @ B, BtPA)
    return 0.5 * (P_next + P_next.T)


def is_controllable(A, B, rtol=RANK_RTOL):
    """Kalman rank test on ``[B, AB, ..., A^(n-1) B]``."""
    A = _square(A)
    B = np.atleast_2d(np.asarray(B, dtype=float))
    n = A.shape[0]
    blocks = [B]
    for _ in range(n - 1):
        blocks.append(A @ blocks[-1])
    return matrix_rank(np.hstack(blocks), rtol) == n
