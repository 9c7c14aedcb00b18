"""Plant, reference model, regressor and certainty-equivalence control."""

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .exceptions import DimensionError, ReferenceBoundError, StabilityError
from .lti import is_controllable, is_schur_stable, matrix_rank, spectral_radius

__all__ = [
    "BasisFunction",
    "NonlinearBasis",
    "PlantModel",
    "ReferenceModel",
    "basis_function",
    "BASIS_CATALOG",
    "build_regressor",
    "control_input",
    "step_plant",
    "step_reference",
    "matching_gain",
    "lipschitz_envelope_constant",
    "check_estimate",
    "true_parameters",
]

MATCH_RTOL = 1e-8


@dataclass(frozen=True)
class BasisFunction:
    """A known nonlinearity ``f: R^n -> R`` with ``f(0) = 0``.

    ``func`` must accept arrays of shape ``(..., n)`` and return shape ``(...)``
    so that whole batches of trajectories can be evaluated at once.
    """

    func: Callable[[np.ndarray], np.ndarray]
    lipschitz: float
    name: str = "custom"
    params: dict = field(default_factory=dict)

    def __call__(self, x):
        return self.func(np.asarray(x, dtype=float))


def _component(params, n_hint=None):
    idx = int(params.get("index", 0))
    if idx < 0 or (n_hint is not None and idx >= n_hint):
        raise ValueError(f"basis index {idx} out of range")
    return idx


def _make_linear(params):
    i, c = _component(params), float(params.get("amp", 1.0))
    return (lambda x: c * x[..., i]), abs(c)


def _make_sin(params):
    i = _component(params)
    amp, w = float(params.get("amp", 1.0)), float(params.get("freq", 1.0))
    return (lambda x: amp * np.sin(w * x[..., i])), abs(amp * w)


def _make_tanh(params):
    i = _component(params)
    amp, w = float(params.get("amp", 1.0)), float(params.get("freq", 1.0))
    return (lambda x: amp * np.tanh(w * x[..., i])), abs(amp * w)


def _make_sin_dot(params):
    w = np.asarray(params["weights"], dtype=float)
    amp = float(params.get("amp", 1.0))
    return (lambda x: amp * np.sin(x @ w)), abs(amp) * float(np.linalg.norm(w))


def _make_satpow(params):
    # amp * clip(x_i, -s, s)^k is globally Lipschitz with constant |amp| k s^(k-1)
    i = _component(params)
    k = int(params.get("power", 3))
    s = float(params.get("limit", 1.0))
    amp = float(params.get("amp", 1.0))
    if k < 1 or s <= 0:
        raise ValueError("satpow needs power >= 1 and limit > 0")
    return (lambda x: amp * np.clip(x[..., i], -s, s) ** k), abs(amp) * k * s ** (k - 1)


BASIS_CATALOG = {
    "linear": _make_linear,
    "sin": _make_sin,
    "tanh": _make_tanh,
    "sin_dot": _make_sin_dot,
    "satpow": _make_satpow,
}


def basis_function(name, params=None, lipschitz=None):
    """Instantiate a catalog basis function.

    The catalog knows each form's Lipschitz constant; a declared ``lipschitz``
    must not be smaller than that (it may be a looser upper bound).
    """
    params = dict(params or {})
    try:
        maker = BASIS_CATALOG[name]
    except KeyError:
        raise ValueError(f"unknown basis function {name!r}; known: {sorted(BASIS_CATALOG)}")
    func, M = maker(params)
    if lipschitz is None:
        lipschitz = M
    elif lipschitz < M * (1 - 1e-12):
        raise ValueError(f"declared lipschitz {lipschitz} below the true constant {M} for {name}")
    return BasisFunction(func, float(lipschitz), name, params)


@dataclass(frozen=True)
class NonlinearBasis:
    """Ordered collection ``f_1..f_p`` of known nonlinearities on ``R^n``."""

    functions: tuple = ()
    n: int = 0

    def __post_init__(self):
        object.__setattr__(self, "functions", tuple(self.functions))
        zero = np.zeros(self.n)
        for f in self.functions:
            if f.lipschitz < 0:
                raise ValueError("Lipschitz constants must be non-negative")
            v = float(f(zero))
            if abs(v) > 1e-12:
                raise ValueError(f"basis function {f.name} has f(0) = {v}, must be 0")

    @property
    def p(self):
        return len(self.functions)

    @property
    def lipschitz(self):
        return np.array([f.lipschitz for f in self.functions])

    def evaluate(self, x):
        """Stack ``f_i(x)`` along the last axis; ``x`` has shape ``(..., n)``."""
        x = np.asarray(x, dtype=float)
        if not self.functions:
            return np.zeros(x.shape[:-1] + (0,))
        return np.stack([np.broadcast_to(f(x), x.shape[:-1]) for f in self.functions], axis=-1)


def _as_matrix(M, name, rows=None, cols=None):
    M = np.asarray(M, dtype=float)
    if M.ndim == 1 and rows is not None and cols == 1:
        M = M[:, None]
    if M.ndim != 2 or (rows is not None and M.shape[0] != rows) or (cols is not None and M.shape[1] != cols):
        raise DimensionError(f"{name} has shape {M.shape}, expected ({rows}, {cols})")
    return M


@dataclass(frozen=True)
class PlantModel:
    """``x+ = A_p x + B (sum_i a_i f_i(x) + u) [+ B_r r]``.

    ``a`` is the m-by-p matrix whose columns are the coefficient vectors a_i.
    ``B_r`` is an optional separate reference-input matrix; when present the
    reference enters the plant through it instead of through ``u``.
    """

    A_p: np.ndarray
    B: np.ndarray
    basis: NonlinearBasis = None
    a: np.ndarray = None
    B_r: np.ndarray = None

    def __post_init__(self):
        A_p = _as_matrix(self.A_p, "A_p")
        n = A_p.shape[0]
        if A_p.shape != (n, n):
            raise DimensionError(f"A_p must be square, got {A_p.shape}")
        B = self.B
        B = _as_matrix(B, "B", rows=n, cols=None if np.ndim(B) == 2 else 1)
        m = B.shape[1]
        if matrix_rank(B) != m:
            raise ValueError("columns of B must be linearly independent")
        if not is_controllable(A_p, B):
            raise ValueError("(A_p, B) must be controllable")
        basis = self.basis if self.basis is not None else NonlinearBasis((), n)
        if basis.n != n:
            raise DimensionError(f"basis is defined on R^{basis.n}, plant state is R^{n}")
        a = np.zeros((m, basis.p)) if self.a is None else np.asarray(self.a, dtype=float)
        if a.shape != (m, basis.p):
            raise DimensionError(f"a must be {m}x{basis.p}, got {a.shape}")
        B_r = self.B_r
        if B_r is not None:
            B_r = _as_matrix(B_r, "B_r", rows=n, cols=None if np.ndim(B_r) == 2 else 1)
        for k, v in (("A_p", A_p), ("B", B), ("basis", basis), ("a", a), ("B_r", B_r)):
            object.__setattr__(self, k, v)

    @property
    def n(self):
        return self.A_p.shape[0]

    @property
    def m(self):
        return self.B.shape[1]

    @property
    def p(self):
        return self.basis.p

    @property
    def reference_matrix(self):
        """Matrix through which ``r`` drives the reference model."""
        return self.B if self.B_r is None else self.B_r


@dataclass(frozen=True)
class ReferenceModel:
    """Schur-stable reference model ``x_m+ = A_m x_m + B r`` with ``|r| <= r_max``."""

    A_m: np.ndarray
    B: np.ndarray
    r_max: float = np.inf

    def __post_init__(self):
        A_m = _as_matrix(self.A_m, "A_m")
        n = A_m.shape[0]
        B = _as_matrix(self.B, "B", rows=n, cols=None if np.ndim(self.B) == 2 else 1)
        if not is_schur_stable(A_m):
            raise StabilityError(f"A_m is not Schur-stable (spectral radius {spectral_radius(A_m):.6g})")
        if not self.r_max >= 0:
            raise ValueError("r_max must be non-negative")
        object.__setattr__(self, "A_m", A_m)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "r_max", float(self.r_max))

    def check_input(self, r):
        r = np.asarray(r, dtype=float)
        norm = float(np.linalg.norm(r))
        if norm > self.r_max * (1 + 1e-12):
            raise ReferenceBoundError(f"|r| = {norm:.6g} exceeds r_max = {self.r_max:.6g}")
        return r


def build_regressor(x_p, basis):
    """``phi = [x_p, -f_1(x_p), ..., -f_p(x_p)]`` (works on batches)."""
    x_p = np.asarray(x_p, dtype=float)
    if x_p.shape[-1] != basis.n:
        raise DimensionError(f"state has dimension {x_p.shape[-1]}, basis expects {basis.n}")
    return np.concatenate([x_p, -basis.evaluate(x_p)], axis=-1)


def control_input(theta, phi, r):
    """Certainty-equivalence input ``u = Theta_hat phi + r``."""
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    if theta.shape[-1] != phi.shape[-1]:
        raise DimensionError(f"Theta has {theta.shape[-1]} columns, phi has length {phi.shape[-1]}")
    return (theta @ phi[..., None])[..., 0] + r


def step_plant(plant, x_p, u, r=None):
    """Advance the plant one step.  ``r`` is only used when the plant has ``B_r``."""
    x_p = np.asarray(x_p, dtype=float)
    drive = (plant.a @ plant.basis.evaluate(x_p)[..., None])[..., 0] + u
    x_next = (plant.A_p @ x_p[..., None])[..., 0] + (plant.B @ drive[..., None])[..., 0]
    if plant.B_r is not None:
        if r is None:
            raise ValueError("plant has a reference-input matrix; pass r")
        x_next = x_next + (plant.B_r @ np.asarray(r, dtype=float)[..., None])[..., 0]
    return x_next


def step_reference(ref, x_m, r):
    r = ref.check_input(r)
    return ref.A_m @ np.asarray(x_m, dtype=float) + ref.B @ r


def matching_gain(plant, A_m):
    """Least-squares ``K*`` with ``A_m = A_p + B K*``, or ``None`` if no exact match."""
    B = plant.B
    if matrix_rank(B) != B.shape[1]:
        raise ValueError("B is rank deficient")
    A_m = np.asarray(A_m, dtype=float)
    D = A_m - plant.A_p
    K, *_ = np.linalg.lstsq(B, D, rcond=None)
    residual = np.linalg.norm(D - B @ K)
    if residual > MATCH_RTOL * (1.0 + np.linalg.norm(A_m)):
        return None
    return K


def lipschitz_envelope_constant(basis):
    """``C`` with ``|phi|^2 <= C |x|^2``."""
    return 1.0 + float(np.sum(basis.lipschitz ** 2))


def check_estimate(theta, m, q):
    """Validate an m-by-q parameter estimate and return it as a float array."""
    theta = np.asarray(theta, dtype=float)
    if theta.shape[-2:] != (m, q):
        raise DimensionError(f"estimate has shape {theta.shape}, expected (..., {m}, {q})")
    if not np.all(np.isfinite(theta)):
        raise ValueError("estimate has non-finite entries")
    return theta


def true_parameters(plant, K_star):
    """``Theta* = [K*, a_1, ..., a_p]``."""
    return np.hstack([np.asarray(K_star, dtype=float), plant.a])
