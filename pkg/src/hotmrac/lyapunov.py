"""Lyapunov certificates for the adaptive laws, usable as runtime monitors.

Monitors need the true parameters, so they only make sense in simulation.
"""

from dataclasses import dataclass

import numpy as np

from .exceptions import CertificateViolation, GainConditionError
from .laws import EXTENDED, GdLaw, HotLaw, hot_alpha

__all__ = [
    "CertificateRecord",
    "CertificateMonitor",
    "gd_lyapunov",
    "hot_lyapunov",
    "gd_increment_bound",
    "hot_increment_bound",
    "region_increment_bound",
    "SLACK",
]

SLACK = 1e-9


def _fro2(M):
    M = np.asarray(M, dtype=float)
    return np.sum(M * M, axis=(-2, -1))


def _eps2(eps):
    eps = np.asarray(eps, dtype=float)
    return np.sum(eps * eps, axis=-1)


def gd_lyapunov(theta, theta_star):
    """``|Theta - Theta*|_F^2``"""
    return _fro2(np.asarray(theta, dtype=float) - theta_star)


def hot_lyapunov(theta, xi, theta_star):
    """``|Xi - Theta*|_F^2 + |Theta - Xi|_F^2``"""
    xi = np.asarray(xi, dtype=float)
    return _fro2(xi - theta_star) + _fro2(np.asarray(theta, dtype=float) - xi)


def gd_increment_bound(gamma, eps, N):
    return -gamma * (2.0 - gamma) * _eps2(eps) / N


def hot_increment_bound(gamma, beta, eps, N):
    """``-g alpha (1 - g b)^2 (1 - alpha / (2 + alpha)) |eps|^2 / N``.

    Raises
    ------
    GainConditionError
        If ``2 - (1 + g^2) b <= 0`` or ``alpha <= 0``.
    """
    if not 2.0 - (1.0 + gamma * gamma) * beta > 0:
        raise GainConditionError("2 - (1 + gamma^2) beta > 0")
    alpha = hot_alpha(gamma, beta)
    if not alpha > 0:
        raise GainConditionError("alpha > 0")
    rate = gamma * alpha * (1.0 - gamma * beta) ** 2 * (1.0 - alpha / (2.0 + alpha))
    return -rate * _eps2(eps) / N


def region_increment_bound(d_min, eps, N):
    """``-d(gamma, beta) |eps|^2 / N`` for extended-region gains."""
    return -d_min * _eps2(eps) / N


@dataclass(frozen=True)
class CertificateRecord:
    V: float
    dV: float
    bound: float
    law_tag: str

    @property
    def slack(self):
        return self.bound - self.dV

    @property
    def holds(self):
        return self.dV <= self.bound + SLACK * (1.0 + self.V)


class CertificateMonitor:
    """Evaluates ``V``, ``dV`` and the proved bound for one law.

    Call :meth:`before` with the estimate about to be updated (and before the
    law mutates its state), then :meth:`after` with the update result.
    Violations are counted; with ``fail_fast`` the first one raises.
    """

    def __init__(self, law, theta_star, fail_fast=False, slack=SLACK):
        self.law = law
        self.theta_star = np.asarray(theta_star, dtype=float)
        self.fail_fast = fail_fast
        self.slack = slack
        self.violations = 0
        if isinstance(law, GdLaw):
            self._bound = lambda eps, N: gd_increment_bound(law.gamma, eps, N)
        elif isinstance(law, HotLaw) and law.gain_mode == EXTENDED:
            self._bound = lambda eps, N: region_increment_bound(law.d_min, eps, N)
        elif isinstance(law, HotLaw):
            self._bound = lambda eps, N: hot_increment_bound(law.gamma, law.beta, eps, N)
        else:
            raise TypeError(f"no certificate known for {type(law).__name__}")

    def value(self, theta):
        if isinstance(self.law, HotLaw):
            xi = self.law.xi if self.law.xi is not None else theta
            return hot_lyapunov(theta, xi, self.theta_star)
        return gd_lyapunov(theta, self.theta_star)

    def before(self, theta):
        self._V = self.value(theta)
        return self._V

    def after(self, theta_next, eps, N, step=None):
        """Return ``(V, dV, bound, ok)`` arrays for the step just taken."""
        V, V_next = self._V, self.value(theta_next)
        dV = V_next - V
        bound = self._bound(eps, N)
        ok = dV <= bound + self.slack * (1.0 + V)
        bad = int(np.size(ok) - np.count_nonzero(ok))
        if bad:
            self.violations += bad
            if self.fail_fast:
                i = int(np.flatnonzero(~np.atleast_1d(ok))[0])
                raise CertificateViolation(step, float(np.atleast_1d(dV)[i]), float(np.atleast_1d(bound)[i]))
        return V, dV, bound, ok
