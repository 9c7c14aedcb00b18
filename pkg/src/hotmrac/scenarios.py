"""Canned plants and configs used by the examples, CLI defaults and tests."""

from dataclasses import dataclass

import numpy as np

from .lti import discretize_zoh, is_controllable
from .plant import NonlinearBasis, PlantModel, ReferenceModel, basis_function, true_parameters
from .sim import Ensemble

__all__ = [
    "scalar_config",
    "sine_config",
    "shortperiod_config",
    "scalar_models",
    "sine_models",
    "PlantGroup",
    "random_battery",
    "SINE_A_C",
]

# continuous companion form with a triple pole at -1, sampled at 0.1 s
SINE_A_C = [[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [-1.0, -3.0, -3.0]]
SINE_K_STAR = [[0.8, -0.5, 0.3]]


def scalar_config(law="gd", gamma=1.0, beta=None, r=0.0, horizon=1000, x_p0=1.0):
    """Unstable scalar plant ``A_p = 1.2`` regulated to ``A_m = 0.5``; ``K* = -0.7``."""
    law_spec = {"law": law, "gamma": gamma, "mu": 1.0}
    if beta is not None:
        law_spec["beta"] = beta
    return {
        "name": "scalar",
        "plant": {"A": [[1.2]], "B": [[1.0]]},
        "reference": {"A_m": [[0.5]]},
        "law": law_spec,
        "reference_input": {"constant": [r]},
        "horizon": horizon,
        "x_p0": [x_p0],
        "x_m0": [0.0],
        "theta0": "zero",
        "monitor": {"enabled": True, "fail_fast": False},
    }


def _sine_a_m():
    return discretize_zoh(np.array(SINE_A_C), np.zeros((3, 1)) + [[0.0], [0.0], [1.0]], 0.1).A


def sine_config(law="gd", gamma=1.0, beta=None, r=5.0, horizon=10000):
    """Three-state plant with ``0.5 sin(x_0)`` entering through the input channel."""
    A_m = _sine_a_m()
    B = np.array([[0.0], [0.0], [1.0]])
    A_p = A_m - B @ np.array(SINE_K_STAR)
    law_spec = {"law": law, "gamma": gamma, "mu": 1.0}
    if beta is not None:
        law_spec["beta"] = beta
    return {
        "name": "sine3",
        "plant": {
            "A": A_p.tolist(),
            "B": B.tolist(),
            "basis": [{"name": "sin", "params": {"index": 0}, "lipschitz": 1.0}],
            "a": [[0.5]],
        },
        "reference": {"A_m": A_m.tolist()},
        "law": law_spec,
        "reference_input": {"constant": [r]},
        "horizon": horizon,
        "theta0": "zero",
        "monitor": {"enabled": True, "fail_fast": False},
    }


def shortperiod_config(law="gd", gamma=1.0, beta=None, trials=200, horizon=2000, seed=2020):
    """Stand-in for a short-period pitch loop with integral action.

    States are angle of attack, pitch rate and the integrated pitch-rate
    tracking error.  The reference enters only through ``B_r``.
    """
    law_spec = {"law": law, "gamma": gamma, "mu": 1.0}
    if beta is not None:
        law_spec["beta"] = beta
    return {
        "name": "shortperiod",
        "plant": {
            "A": [[-0.8, 1.0, 0.0], [-8.0, -1.6, 0.0], [0.0, 1.0, 0.0]],
            "B": [[-0.05], [-10.0], [0.0]],
            "B_r": [[0.0], [0.0], [-1.0]],
            "continuous": True,
            "dt": 0.01,
        },
        "reference": {"lqr": {"Q": [[0.0, 0.0, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, 1.0]], "R": [[1.0]]}},
        "law": law_spec,
        "reference_input": {"constant": [5.0]},
        "horizon": horizon,
        "theta0": "nominal",
        "seed": seed,
        "monitor": {"enabled": False, "fail_fast": False},
        "montecarlo": {"trials": trials, "low": -0.5, "high": 2.0},
    }


def scalar_models():
    """``(plant, reference, theta_star)`` for the scalar regulation problem."""
    plant = PlantModel(np.array([[1.2]]), np.array([[1.0]]))
    return plant, ReferenceModel(np.array([[0.5]]), plant.B), np.array([[-0.7]])


def sine_models():
    cfg = sine_config()
    basis = NonlinearBasis((basis_function("sin", {"index": 0}, 1.0),), 3)
    plant = PlantModel(np.array(cfg["plant"]["A"]), np.array(cfg["plant"]["B"]), basis, np.array([[0.5]]))
    ref = ReferenceModel(np.array(cfg["reference"]["A_m"]), plant.B)
    return plant, ref, true_parameters(plant, np.array(SINE_K_STAR))


@dataclass
class PlantGroup:
    """Plants sharing ``(n, m, p)`` and one basis, packed for batched simulation."""

    ensemble: Ensemble
    r_seq: np.ndarray
    x_p0: np.ndarray
    x_m0: np.ndarray

    @property
    def shape(self):
        e = self.ensemble
        return e.n, e.m, e.basis.p


def _random_basis(rng, n, p):
    funcs = []
    for _ in range(p):
        kind = rng.choice(["sin", "tanh", "sin_dot", "satpow", "linear"])
        if kind == "sin_dot":
            funcs.append(basis_function(kind, {"weights": rng.normal(size=n).tolist()}))
        elif kind == "satpow":
            funcs.append(basis_function(kind, {"index": int(rng.integers(n)), "power": 3, "limit": 1.5}))
        else:
            funcs.append(basis_function(kind, {"index": int(rng.integers(n)),
                                               "amp": float(rng.uniform(0.5, 2.0))}))
    return NonlinearBasis(tuple(funcs), n)


def _random_schur(rng, n):
    M = rng.normal(size=(n, n))
    rho = np.max(np.abs(np.linalg.eigvals(M)))
    return M * rng.uniform(0.2, 0.95) / rho


def random_battery(count=100, group_size=10, horizon=2000, seed=0, max_open_loop=1.3):
    """Random matched plants with ``n <= 4``, ``m <= 2``, ``p <= 2``.

    Each group shares a shape and a basis.  Reference inputs are per-plant
    sinusoids plus an offset, and initial plant states are random.  Open-loop
    linear parts with spectral radius above ``max_open_loop`` are redrawn so
    that transients stay in a range where double-precision residuals are
    meaningful.
    """
    rng = np.random.default_rng(seed)
    groups = []
    k = np.arange(horizon)[:, None, None]
    made = 0
    while made < count:
        size = min(group_size, count - made)
        n = int(rng.integers(1, 5))
        m = int(rng.integers(1, min(2, n) + 1))
        p = int(rng.integers(0, 3))
        basis = _random_basis(rng, n, p)
        plants, refs, stars = [], [], []
        while len(plants) < size:
            B = rng.normal(size=(n, m))
            A_m = _random_schur(rng, n)
            K = rng.normal(scale=0.5, size=(m, n))
            A_p = A_m - B @ K
            if np.max(np.abs(np.linalg.eigvals(A_p))) > max_open_loop:
                continue
            if np.linalg.matrix_rank(B) < m or not is_controllable(A_p, B):
                continue
            plant = PlantModel(A_p, B, basis, rng.normal(scale=0.5, size=(m, p)))
            plants.append(plant)
            refs.append(ReferenceModel(A_m, B))
            stars.append(true_parameters(plant, K))
        amp = rng.uniform(0.0, 2.0, size=(1, size, m))
        freq = rng.uniform(0.01, 0.5, size=(1, size, m))
        offset = rng.normal(size=(1, size, m))
        r_seq = offset + amp * np.sin(freq * k)
        groups.append(PlantGroup(Ensemble.from_models(plants, refs, stars), r_seq,
                                 rng.normal(size=(size, n)), np.zeros((size, n))))
        made += size
    return groups
