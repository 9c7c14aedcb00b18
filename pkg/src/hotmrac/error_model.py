"""Causal algebraic error model and the normalized loss it induces.

The dynamical error model ``e+ = A_m e + B Theta~ phi`` is converted into the
algebraic form ``eps+ = Theta~ phi`` by applying the left inverse of ``B`` to
measured states only; ``Theta~`` itself never appears here.
"""

import numpy as np
from scipy.linalg import qr, solve_triangular

from .exceptions import DimensionError
from .lti import RANK_RTOL

__all__ = [
    "LeftInverse",
    "prediction_error",
    "normalizer",
    "loss",
    "normalized_gradient",
    "a_posteriori_gradient",
]


class LeftInverse:
    """Cached ``(B^T B)^-1 B^T`` computed through a reduced QR factorization."""

    def __init__(self, B):
        B = np.asarray(B, dtype=float)
        if B.ndim == 1:
            B = B[:, None]
        Qf, Rf = qr(B, mode="economic")
        d = np.abs(np.diag(Rf))
        if d.size == 0 or d.min() <= RANK_RTOL * d.max():
            raise ValueError("B is rank deficient; the prediction error is undefined")
        self.B = B
        self.matrix = solve_triangular(Rf, Qf.T)

    def __call__(self, v):
        return (self.matrix @ np.asarray(v, dtype=float)[..., None])[..., 0]


def prediction_error(B, e_next, e, A_m, left_inverse=None):
    """``eps_{k+1} = (B^T B)^-1 B^T (e_{k+1} - A_m e_k)``."""
    L = left_inverse if left_inverse is not None else LeftInverse(B)
    e = np.asarray(e, dtype=float)
    A_m = np.asarray(A_m, dtype=float)
    return L(np.asarray(e_next, dtype=float) - (A_m @ e[..., None])[..., 0])


def normalizer(phi, mu):
    """``N = max(mu, |phi|^2)``."""
    if not mu > 0:
        raise ValueError(f"mu must be positive, got {mu}")
    phi = np.asarray(phi, dtype=float)
    return np.maximum(mu, np.sum(phi * phi, axis=-1))


def loss(eps):
    eps = np.asarray(eps, dtype=float)
    return 0.5 * np.sum(eps * eps, axis=-1)


def _outer_over(v, phi, N):
    N = np.asarray(N, dtype=float)
    if np.any(N <= 0):
        raise ValueError("normalizer must be positive")
    return v[..., :, None] * phi[..., None, :] / N[..., None, None]


def normalized_gradient(eps, phi, N):
    """Gradient ``eps phi^T / N`` of the normalized loss at the current estimate."""
    return _outer_over(np.asarray(eps, dtype=float), np.asarray(phi, dtype=float), N)


def a_posteriori_gradient(theta_next, theta, eps, phi, N):
    """Gradient of the same loss at ``theta_next``, without re-measuring the plant.

    ``((theta_next - theta) phi + eps) phi^T / N``
    """
    theta_next = np.asarray(theta_next, dtype=float)
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    if theta_next.shape != theta.shape or theta.shape[-1] != phi.shape[-1]:
        raise DimensionError("estimate and regressor dimensions disagree")
    shifted = ((theta_next - theta) @ phi[..., None])[..., 0] + eps
    return _outer_over(shifted, phi, N)
