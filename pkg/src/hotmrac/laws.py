"""Adaptive laws: normalized gradient descent and the high-order tuner.

Both laws see only the regressor ``phi_k`` and the measured prediction error
``eps_{k+1}``; the true parameters never enter.  All functions broadcast over
leading batch axes: estimates are ``(..., m, q)``, regressors ``(..., q)`` and
prediction errors ``(..., m)``.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import region
from .error_model import a_posteriori_gradient, normalized_gradient, normalizer
from .exceptions import GainConditionError

__all__ = [
    "GdLaw",
    "HotLaw",
    "GainReport",
    "gd_update",
    "hot_update",
    "hot_alpha",
    "nesterov_update",
    "validate_gains",
    "make_law",
]

PROPOSITION = "proposition"
EXTENDED = "extended-region"
GAIN_MODES = (PROPOSITION, EXTENDED)


@dataclass(frozen=True)
class GainReport:
    ok: bool
    violation: str = None
    alpha: float = None
    c_min: float = None
    d_min: float = None

    def __bool__(self):
        return self.ok


def hot_alpha(gamma, beta):
    return region.proposition_alpha(gamma, beta)


def validate_gains(law, gamma, beta=None, mu=1.0, mode=PROPOSITION, resolution=1001):
    """Check gains against the stability conditions of ``law`` ("gd" or "hot").

    Returns a :class:`GainReport` naming the first violated condition; never
    raises for bad gains.
    """
    if not mu > 0:
        return GainReport(False, "mu > 0")
    if law == "gd":
        if not 0 < gamma < 2:
            return GainReport(False, "0 < gamma < 2")
        return GainReport(True)
    if law != "hot":
        raise ValueError(f"unknown law {law!r}")
    if mode not in GAIN_MODES:
        raise ValueError(f"unknown gain mode {mode!r}; expected one of {GAIN_MODES}")
    if beta is None or not 0 < beta < 2:
        return GainReport(False, "0 < beta < 2")
    if not gamma > 0:
        return GainReport(False, "gamma > 0")
    if mode == PROPOSITION:
        if not gamma < math.sqrt((2 - beta) / beta):
            return GainReport(False, "gamma < sqrt((2 - beta) / beta)")
        alpha = hot_alpha(gamma, beta)
        if not alpha > 0:
            return GainReport(False, "alpha > 0", alpha=alpha)
        return GainReport(True, alpha=alpha)
    _, c_min, d_min = region.check_point(gamma, beta, resolution)
    if not gamma * beta < 1:
        # the grid values are still reported so callers can see the region verdict
        return GainReport(False, "gamma * beta < 1", c_min=c_min, d_min=d_min)
    if not c_min > 0:
        return GainReport(False, "c(gamma, beta) > 0", c_min=c_min, d_min=d_min)
    if not d_min > 0:
        return GainReport(False, "d(gamma, beta) > 0", c_min=c_min, d_min=d_min)
    return GainReport(True, c_min=c_min, d_min=d_min)


def _require(report):
    if not report.ok:
        raise GainConditionError(report.violation)
    return report


def gd_update(law, theta, phi, eps):
    """``Theta+ = Theta - gamma eps phi^T / N``."""
    N = normalizer(phi, law.mu)
    return np.asarray(theta, dtype=float) - law.gamma * normalized_gradient(eps, phi, N)


def hot_update(law, theta, xi, phi, eps):
    """One high-order-tuner step.

    Returns ``(theta_next, xi_next, theta_bar)``; ``xi`` is the auxiliary
    estimate received from the previous iteration.
    """
    theta = np.asarray(theta, dtype=float)
    g, b = law.gamma, law.beta
    N = normalizer(phi, law.mu)
    grad = normalized_gradient(eps, phi, N)
    theta_bar = theta - g * b * grad
    theta_next = theta_bar - b * (theta_bar - xi)
    grad_next = a_posteriori_gradient(theta_next, theta, eps, phi, N)
    xi_next = xi - g * grad_next
    return theta_next, xi_next, theta_bar


@dataclass(frozen=True)
class GdLaw:
    """Normalized gradient descent; stateless apart from its gains."""

    gamma: float
    mu: float = 1.0
    tag = "gd"

    def __post_init__(self):
        _require(validate_gains("gd", self.gamma, mu=self.mu))

    def update(self, theta, phi, eps):
        return gd_update(self, theta, phi, eps)

    def reset(self):
        pass


@dataclass
class HotLaw:
    """High-order tuner with owned auxiliary estimate ``xi``.

    ``xi`` starts as ``None`` and is set to the first estimate passed to
    :meth:`update`.  Use one instance per trajectory (or per batch).

    The algorithm is often called the "projected" high-order tuner, but no
    projection set enters the update; none is applied here either.
    """

    gamma: float
    beta: float
    mu: float = 1.0
    gain_mode: str = PROPOSITION
    xi: np.ndarray = field(default=None, repr=False)
    theta_bar: np.ndarray = field(default=None, repr=False)
    tag = "hot"

    def __post_init__(self):
        self.report = _require(validate_gains("hot", self.gamma, self.beta, self.mu, self.gain_mode))

    @property
    def alpha(self):
        return self.report.alpha

    @property
    def d_min(self):
        return self.report.d_min

    def update(self, theta, phi, eps):
        if self.xi is None:
            self.xi = np.array(theta, dtype=float)
        theta_next, self.xi, self.theta_bar = hot_update(self, theta, self.xi, phi, eps)
        return theta_next

    def reset(self):
        self.xi = None
        self.theta_bar = None


def nesterov_update(theta, theta_prev, phi, theta_star, gamma, beta, mu):
    """Nesterov step on the constant-regressor loss (oracle only: needs ``theta_star``).

    ``Y = theta + (1 - beta)(theta - theta_prev)``, then
    ``theta+ = Y - gamma beta (Y - theta_star) phi phi^T / N``.
    """
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    momentum, step = 1.0 - beta, gamma * beta
    y = theta + momentum * (theta - np.asarray(theta_prev, dtype=float))
    N = normalizer(phi, mu)
    residual = ((y - theta_star) @ phi[..., None])[..., 0]
    return y - step * normalized_gradient(residual, phi, N)


def make_law(spec):
    """Build a law from ``{"law": "gd"|"hot", "gamma", "beta", "mu", "gain_mode"}``."""
    kind = spec.get("law", "gd")
    mu = spec.get("mu", 1.0)
    if kind == "gd":
        return GdLaw(spec["gamma"], mu)
    if kind == "hot":
        return HotLaw(spec["gamma"], spec["beta"], mu, spec.get("gain_mode", PROPOSITION))
    raise ValueError(f"unknown law {kind!r}")
