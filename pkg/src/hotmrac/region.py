"""Allowable high-order-tuner gains from the a/b/c/d decomposition of the
Lyapunov increment.

With ``lam = |phi|^2 / N`` in ``[0, 1]`` and ``M = Theta_bar - Xi_hat`` the
increment is bounded by

    -a eps^2 / N + 2 b (M phi)^T eps / N - c |M phi|^2 / N,

so completing the square gives ``dV <= -d eps^2 / N`` with ``d = a - b^2 / c``
whenever ``c > 0``.  The region where ``min_lam c > 0`` and ``min_lam d > 0`` is
found by a dense grid over ``lam``.
"""

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.optimize import brentq, minimize_scalar

__all__ = [
    "abc",
    "d_value",
    "minimize_over_lambda",
    "check_point",
    "proposition_alpha",
    "proposition_admissible",
    "proposition_gamma_max",
    "RegionGrid",
    "build_region_grid",
    "write_region_csv",
    "DISALLOWED_SENTINEL",
]

GAMMA_RANGE = (0.0, 4.0)
BETA_RANGE = (0.0, 2.0)
# -inf stand-in for CSV exports; the allowable column carries the flag
DISALLOWED_SENTINEL = -1.0e300


def _abc(g, b, lam):
    one_gl = 1.0 - g * lam
    one_gbl = 1.0 - g * b * lam
    a = g * (2.0 * one_gl * one_gbl**2 + g * b * b * lam)
    bb = g * (2.0 * b * one_gl * one_gbl - b + 2.0 * (1.0 - b) * one_gbl)
    c = b * (2.0 * g * b * one_gl + 2.0 - b + 4.0 * g * (1.0 - b))
    return a, bb, c


def abc(gamma, beta, lam):
    """Coefficients ``(a, b, c)`` of the increment quadratic form."""
    lam_arr = np.asarray(lam, dtype=float)
    if np.any((lam_arr < 0.0) | (lam_arr > 1.0)):
        raise ValueError("lambda must lie in [0, 1]")
    a, b, c = _abc(float(gamma), float(beta), lam_arr)
    if np.ndim(lam) == 0:
        return float(a), float(b), float(c)
    return a, b, c


def d_value(gamma, beta, lam):
    """``d = a - b^2 / c``; ``-inf`` flags the singular point ``c = 0``."""
    a, b, c = abc(gamma, beta, lam)
    if c == 0.0:
        return -math.inf
    return a - b * b / c


def _d_from_abc(a, b, c):
    with np.errstate(divide="ignore", invalid="ignore"):
        d = a - b * b / c
    return np.where(c > 0.0, d, -np.inf)


def minimize_over_lambda(gamma, beta, resolution=1001, refine=False):
    """Minima of ``c`` and ``d`` over a uniform ``lam`` grid on ``[0, 1]``.

    Any grid point with ``c <= 0`` forces ``d_min = -inf``.  With ``refine``
    the grid minimizer of ``d`` is polished by a bounded scalar search on the
    neighbouring grid cells, so the returned ``d_min`` is a true lower value to
    near machine precision rather than a grid approximation.
    """
    if resolution < 2:
        raise ValueError("resolution must be at least 2")
    lam = np.linspace(0.0, 1.0, int(resolution))
    a, b, c = _abc(float(gamma), float(beta), lam)
    c_min = float(c.min())
    if c_min <= 0.0:
        return c_min, -math.inf
    d = a - b * b / c
    i = int(np.argmin(d))
    d_min = float(d[i])
    if refine:
        lo, hi = lam[max(i - 1, 0)], lam[min(i + 1, lam.size - 1)]
        res = minimize_scalar(
            lambda t: d_value(gamma, beta, t), bounds=(lo, hi), method="bounded",
            options={"xatol": 1e-13},
        )
        d_min = min(d_min, float(res.fun), d_value(gamma, beta, lo), d_value(gamma, beta, hi))
    return c_min, d_min


def check_point(gamma, beta, resolution=1001, refine=True):
    """``(allowable, c_min, d_min)`` for a single gain pair."""
    c_min, d_min = minimize_over_lambda(gamma, beta, resolution, refine=refine)
    return (c_min > 0.0 and d_min > 0.0), c_min, d_min


def proposition_alpha(gamma, beta):
    """``alpha = 2(1 - g) - g (2 - 3b)^2 / (b (2 - (1 + g^2) b))``; nan where undefined."""
    g = np.asarray(gamma, dtype=float)
    b = np.asarray(beta, dtype=float)
    den = b * (2.0 - (1.0 + g * g) * b)
    with np.errstate(divide="ignore", invalid="ignore"):
        alpha = 2.0 * (1.0 - g) - g * (2.0 - 3.0 * b) ** 2 / den
    alpha = np.where(den > 0.0, alpha, np.nan)
    return float(alpha) if alpha.ndim == 0 else alpha


def proposition_admissible(gamma, beta):
    """Elementwise: ``0 < b < 2``, ``0 < g < sqrt((2-b)/b)`` and ``alpha > 0``."""
    g = np.asarray(gamma, dtype=float)
    b = np.asarray(beta, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        g_cap = np.sqrt(np.where(b > 0, (2.0 - b) / np.where(b > 0, b, 1.0), 0.0))
        alpha = proposition_alpha(g, b)
        ok = (b > 0) & (b < 2) & (g > 0) & (g < g_cap) & (np.nan_to_num(alpha, nan=-1.0) > 0)
    return bool(ok) if ok.ndim == 0 else ok


def proposition_gamma_max(beta):
    """Supremum of admissible ``gamma`` for fixed ``beta`` (root of ``alpha``).

    ``alpha`` decreases in ``gamma`` and diverges to ``-inf`` at
    ``sqrt((2-b)/b)``, so the admissible set is an interval ``(0, g_max)``.
    """
    b = float(beta)
    if not 0.0 < b < 2.0:
        return 0.0
    g_cap = math.sqrt((2.0 - b) / b)
    hi = g_cap * (1.0 - 1e-15)
    # rounding can make the denominator vanish right below the cap
    while not np.isfinite(proposition_alpha(hi, b)):
        hi = g_cap - 2.0 * (g_cap - hi) - 1e-15
    if proposition_alpha(hi, b) > 0:
        return g_cap
    return brentq(lambda g: proposition_alpha(g, b), 0.0, hi, xtol=1e-14, rtol=1e-14)


@dataclass
class RegionGrid:
    """Scan results; matrices are indexed ``[beta_index, gamma_index]``."""

    gamma_axis: np.ndarray
    beta_axis: np.ndarray
    c_min: np.ndarray
    d_min: np.ndarray
    allowable: np.ndarray
    prop3_allowable: np.ndarray
    prop3_gamma_max: np.ndarray
    lambda_resolution: int

    def gamma_extent(self, beta):
        """Largest allowable grid ``gamma`` on the row nearest ``beta`` (0 if none)."""
        j = int(np.argmin(np.abs(self.beta_axis - beta)))
        row = self.allowable[j]
        return float(self.gamma_axis[row].max()) if row.any() else 0.0

    def rows(self):
        """Yield CSV rows ordered by beta, then gamma."""
        for j, b in enumerate(self.beta_axis):
            for i, g in enumerate(self.gamma_axis):
                yield g, b, self.c_min[j, i], self.d_min[j, i], self.allowable[j, i], self.prop3_allowable[j, i]


def build_region_grid(gamma_steps=401, beta_steps=201, lambda_resolution=1001):
    """Scan ``gamma in [0, 4]`` x ``beta in [0, 2]``, minimizing over ``lam``."""
    if min(gamma_steps, beta_steps, lambda_resolution) < 2:
        raise ValueError("all step counts must be at least 2")
    g = np.linspace(*GAMMA_RANGE, int(gamma_steps))
    b = np.linspace(*BETA_RANGE, int(beta_steps))
    lam = np.linspace(0.0, 1.0, int(lambda_resolution))
    c_min = np.empty((b.size, g.size))
    d_min = np.empty((b.size, g.size))
    G, L = g[:, None], lam[None, :]
    for j, bj in enumerate(b):
        a_, b_, c_ = _abc(G, bj, L)
        c_min[j] = c_.min(axis=1)
        d_min[j] = _d_from_abc(a_, b_, c_).min(axis=1)
    allowable = (c_min > 0) & (d_min > 0)
    prop3 = proposition_admissible(g[None, :], b[:, None])
    g_max = np.array([proposition_gamma_max(bj) for bj in b])
    return RegionGrid(g, b, c_min, d_min, allowable, prop3, g_max, int(lambda_resolution))


def write_region_csv(grid, path):
    """Write ``gamma,beta,c_min,d_min,allowable,disallowed,prop3_allowable``.

    Disallowed points carry ``DISALLOWED_SENTINEL`` in ``d_min``.
    """
    path = Path(path)
    try:
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["gamma", "beta", "c_min", "d_min", "allowable", "disallowed", "prop3_allowable"])
            for g, b, c, d, ok, p3 in grid.rows():
                d = d if np.isfinite(d) else DISALLOWED_SENTINEL
                w.writerow([repr(float(g)), repr(float(b)), repr(float(c)), repr(float(d)), int(ok), int(not ok), int(p3)])
    except OSError as exc:
        raise OSError(f"cannot write region grid to {path}: {exc}") from exc
    return path
