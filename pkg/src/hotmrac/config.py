"""Strict JSON run configuration and scenario construction.

Matrices are row-major nested lists.  Unknown keys anywhere are rejected.
A minimal config::

    {
      "plant": {"A": [[1.2]], "B": [[1.0]]},
      "reference": {"A_m": [[0.5]]},
      "law": {"law": "gd", "gamma": 1.0, "mu": 1.0},
      "reference_input": {"constant": [0.0]},
      "horizon": 1000,
      "x_p0": [1.0]
    }
"""

import copy
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .exceptions import ConfigError
from .laws import PROPOSITION, make_law
from .lti import StateSpace, discretize_zoh, solve_dlqr
from .plant import NonlinearBasis, PlantModel, ReferenceModel, basis_function, matching_gain, true_parameters

__all__ = [
    "RunConfig",
    "Scenario",
    "load_config",
    "parse_config",
    "apply_overrides",
    "build_scenario",
    "DEFAULT_HORIZON",
]

DEFAULT_HORIZON = 2000

# allowed keys per section; a nested dict means a sub-section
SCHEMA = {
    "name": None,
    "plant": {"A": None, "B": None, "B_r": None, "continuous": None, "dt": None, "basis": None, "a": None},
    "reference": {"A_m": None, "lqr": {"Q": None, "R": None}, "r_max": None},
    "uncertainty": {"K_star": None},
    "law": {"law": None, "gamma": None, "beta": None, "mu": None, "gain_mode": None},
    "reference_input": {"constant": None, "file": None},
    "horizon": None,
    "x_p0": None,
    "x_m0": None,
    "theta0": None,
    "seed": None,
    "monitor": {"enabled": None, "fail_fast": None},
    "montecarlo": {"trials": None, "low": None, "high": None},
    "region": {"gamma_steps": None, "beta_steps": None, "lambda_resolution": None},
}
BASIS_KEYS = {"name", "params", "lipschitz"}


def _check_keys(raw, schema, prefix=""):
    if not isinstance(raw, dict):
        raise ConfigError(f"section {prefix.rstrip('.') or '<root>'} must be an object", prefix.rstrip("."))
    for key, value in raw.items():
        path = prefix + key
        if key not in schema:
            raise ConfigError("unknown key", path)
        if isinstance(schema[key], dict):
            _check_keys(value, schema[key], path + ".")
    for i, entry in enumerate(raw.get("basis", []) if prefix == "plant." else []):
        if not isinstance(entry, dict) or "name" not in entry:
            raise ConfigError(f"plant.basis[{i}] needs a name", f"plant.basis[{i}]")
        extra = set(entry) - BASIS_KEYS
        if extra:
            raise ConfigError(f"unknown key plant.basis[{i}].{sorted(extra)[0]}", f"plant.basis[{i}]")


@dataclass
class LawSpec:
    law: str = "gd"
    gamma: float = 1.0
    beta: float = None
    mu: float = 1.0
    gain_mode: str = PROPOSITION

    def as_dict(self):
        return {"law": self.law, "gamma": self.gamma, "beta": self.beta, "mu": self.mu, "gain_mode": self.gain_mode}


@dataclass
class MonitorSpec:
    enabled: bool = False
    fail_fast: bool = False


@dataclass
class MonteCarloSpec:
    trials: int = 200
    low: float = -0.5
    high: float = 2.0


@dataclass
class RegionSpec:
    gamma_steps: int = 401
    beta_steps: int = 201
    lambda_resolution: int = 1001


@dataclass
class RunConfig:
    """Validated run configuration.  ``raw`` keeps the source dictionary."""

    plant: dict
    reference: dict
    law: LawSpec
    reference_input: dict
    horizon: int = DEFAULT_HORIZON
    x_p0: list = None
    x_m0: list = None
    theta0: object = "zero"
    seed: int = 0
    uncertainty: dict = field(default_factory=dict)
    monitor: MonitorSpec = field(default_factory=MonitorSpec)
    montecarlo: MonteCarloSpec = field(default_factory=MonteCarloSpec)
    region: RegionSpec = field(default_factory=RegionSpec)
    name: str = ""
    raw: dict = field(default_factory=dict, repr=False)
    base_dir: Path = None


def _typed(section, cls, prefix):
    try:
        return cls(**section)
    except TypeError as exc:
        raise ConfigError(f"bad {prefix} section: {exc}", prefix) from exc


def parse_config(raw, base_dir=None):
    """Validate a config dictionary and return a :class:`RunConfig`."""
    _check_keys(raw, SCHEMA)
    for key in ("plant", "reference", "law"):
        if key not in raw:
            raise ConfigError(f"missing required section {key!r}", key)
    for key in ("A", "B"):
        if key not in raw["plant"]:
            raise ConfigError(f"missing plant.{key}", f"plant.{key}")
    ref = raw["reference"]
    if ("A_m" in ref) == ("lqr" in ref):
        raise ConfigError("reference needs exactly one of A_m or lqr", "reference")
    if raw["plant"].get("continuous") and "dt" not in raw["plant"]:
        raise ConfigError("continuous plant needs dt", "plant.dt")
    horizon = raw.get("horizon", DEFAULT_HORIZON)
    if not isinstance(horizon, int) or isinstance(horizon, bool) or horizon < 1:
        raise ConfigError("horizon must be an integer >= 1", "horizon")
    seed = raw.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
        raise ConfigError("seed must be a non-negative integer", "seed")
    rin = raw.get("reference_input", {"constant": None})
    if len(rin) != 1:
        raise ConfigError("reference_input needs exactly one of constant or file", "reference_input")
    law = _typed(raw["law"], LawSpec, "law")
    if law.law not in ("gd", "hot"):
        raise ConfigError(f"unknown law {law.law!r}", "law.law")
    if law.law == "hot" and law.beta is None:
        raise ConfigError("hot law needs beta", "law.beta")
    mc = _typed(raw.get("montecarlo", {}), MonteCarloSpec, "montecarlo")
    if not isinstance(mc.trials, int) or mc.trials < 1:
        raise ConfigError("montecarlo.trials must be an integer >= 1", "montecarlo.trials")
    theta0 = raw.get("theta0", "zero")
    if isinstance(theta0, str) and theta0 not in ("zero", "nominal", "true"):
        raise ConfigError(f"theta0 must be zero, nominal, true or a matrix, got {theta0!r}", "theta0")
    return RunConfig(
        plant=raw["plant"], reference=ref, law=law, reference_input=rin, horizon=horizon,
        x_p0=raw.get("x_p0"), x_m0=raw.get("x_m0"), theta0=theta0, seed=seed,
        uncertainty=raw.get("uncertainty", {}),
        monitor=_typed(raw.get("monitor", {}), MonitorSpec, "monitor"), montecarlo=mc,
        region=_typed(raw.get("region", {}), RegionSpec, "region"),
        name=raw.get("name", ""), raw=raw, base_dir=Path(base_dir) if base_dir else None,
    )


def _parse_value(text):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(raw, overrides):
    """Apply ``KEY=VALUE`` strings with dotted keys; values are parsed as JSON when possible."""
    raw = copy.deepcopy(raw)
    for item in overrides or ():
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not KEY=VALUE", item)
        key, text = item.split("=", 1)
        parts = key.strip().split(".")
        schema, node = SCHEMA, raw
        for i, part in enumerate(parts):
            if not isinstance(schema, dict) or part not in schema:
                raise ConfigError("unknown override key", key)
            if i == len(parts) - 1:
                node[part] = _parse_value(text)
            else:
                node = node.setdefault(part, {})
                if not isinstance(node, dict):
                    raise ConfigError(f"override {key!r} descends into a non-object", key)
                schema = schema[part]
    return raw


def load_config(path, overrides=()):
    """Read, override and validate a JSON config file."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    return parse_config(apply_overrides(raw, overrides), base_dir=path.parent)


def _matrix(value, key, cols=None):
    try:
        M = np.asarray(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{key} is not a numeric matrix", key) from exc
    if M.ndim == 1 and cols == 1:
        M = M[:, None]
    if M.ndim != 2:
        raise ConfigError(f"{key} must be a 2-D matrix", key)
    return M


def _vector(value, n, key):
    if value is None:
        return np.zeros(n)
    v = np.asarray(value, dtype=float).ravel()
    if v.size != n:
        raise ConfigError(f"{key} must have length {n}", key)
    return v


@dataclass
class Scenario:
    """Everything needed to run: models, nominal gain, initial data and inputs."""

    plant: PlantModel
    reference: ReferenceModel
    K_nominal: np.ndarray
    K_star: np.ndarray
    theta_star: np.ndarray
    theta0_spec: object
    r_seq: np.ndarray
    x_p0: np.ndarray
    x_m0: np.ndarray
    law_spec: dict

    @property
    def theta0(self):
        return self.theta0_for(self.theta_star)

    def theta0_for(self, theta_star):
        m, p = self.plant.m, self.plant.p
        spec = self.theta0_spec
        if isinstance(spec, str):
            if spec == "zero":
                return np.zeros((m, self.plant.n + p))
            if spec == "nominal":
                return np.hstack([self.K_nominal, np.zeros((m, p))])
            return np.array(theta_star, dtype=float)
        return np.asarray(spec, dtype=float)

    def make_law(self):
        return make_law(self.law_spec)


def _build_basis(entries, n):
    funcs = []
    for i, entry in enumerate(entries or ()):
        try:
            funcs.append(basis_function(entry["name"], entry.get("params", {}), entry.get("lipschitz")))
        except (KeyError, ValueError, TypeError) as exc:
            raise ConfigError(f"plant.basis[{i}]: {exc}", f"plant.basis[{i}]") from exc
    return NonlinearBasis(tuple(funcs), n)


def build_scenario(cfg):
    """Construct models, ``K*``, ``Theta*``, ``Theta_0`` and the reference sequence."""
    try:
        return _build_scenario(cfg)
    except ConfigError:
        raise
    except ValueError as exc:
        # dimension, stability, rank and controllability failures
        raise ConfigError(str(exc)) from exc


def _build_scenario(cfg):
    pl = cfg.plant
    A = _matrix(pl["A"], "plant.A")
    n = A.shape[0]
    B = _matrix(pl["B"], "plant.B", cols=1)
    B_r = _matrix(pl["B_r"], "plant.B_r", cols=1) if pl.get("B_r") is not None else None
    if pl.get("continuous"):
        dt = float(pl["dt"])
        nominal = discretize_zoh(A, B, dt)
        A, B = nominal.A, nominal.B
        if B_r is not None:
            B_r = discretize_zoh(_matrix(pl["A"], "plant.A"), B_r, dt).B
    else:
        nominal = StateSpace(A, B, float(pl.get("dt", 1.0)))
    m = B.shape[1]
    basis = _build_basis(pl.get("basis"), n)
    a = np.zeros((m, basis.p)) if pl.get("a") is None else _matrix(pl["a"], "plant.a", cols=1)
    if a.shape != (m, basis.p):
        raise ConfigError(f"plant.a must be {m}x{basis.p}", "plant.a")

    ref = cfg.reference
    if "A_m" in ref:
        A_m = _matrix(ref["A_m"], "reference.A_m")
    else:
        lqr = ref["lqr"]
        try:
            K_lqr = solve_dlqr(nominal, _matrix(lqr["Q"], "reference.lqr.Q"), _matrix(lqr["R"], "reference.lqr.R"))
        except KeyError as exc:
            raise ConfigError(f"reference.lqr needs {exc.args[0]}", "reference.lqr") from exc
        A_m = A + B @ K_lqr
    B_ref = B if B_r is None else B_r
    reference = ReferenceModel(A_m, B_ref, float(ref.get("r_max", np.inf)))

    nominal_plant = PlantModel(A, B, basis, a, B_r)
    K_nom = matching_gain(nominal_plant, A_m)
    if K_nom is None:
        raise ConfigError("matching condition A_m = A_p + B K has no solution for the nominal plant", "reference")
    K_star = K_nom
    plant = nominal_plant
    if cfg.uncertainty.get("K_star") is not None:
        K_star = _matrix(cfg.uncertainty["K_star"], "uncertainty.K_star")
        if K_star.shape != (m, n):
            raise ConfigError(f"uncertainty.K_star must be {m}x{n}", "uncertainty.K_star")
        plant = PlantModel(A_m - B @ K_star, B, basis, a, B_r)
    theta_star = true_parameters(plant, K_star)

    q = n + basis.p
    theta0 = cfg.theta0
    if not isinstance(theta0, str):
        theta0 = _matrix(theta0, "theta0", cols=1)
        if theta0.shape != (m, q):
            raise ConfigError(f"theta0 must be {m}x{q}", "theta0")

    m_r = B_ref.shape[1]
    rin = cfg.reference_input
    if "file" in rin:
        fpath = Path(rin["file"])
        if cfg.base_dir is not None and not fpath.is_absolute():
            fpath = cfg.base_dir / fpath
        try:
            seq = np.loadtxt(fpath, delimiter=",", ndmin=2)
        except OSError as exc:
            raise ConfigError(f"cannot read reference_input.file {fpath}: {exc}", "reference_input.file") from exc
        if seq.shape[1] != m_r or seq.shape[0] < cfg.horizon:
            raise ConfigError(f"reference sequence must have >= {cfg.horizon} rows of {m_r} values",
                              "reference_input.file")
        r_seq = seq[: cfg.horizon]
    else:
        r0 = _vector(rin.get("constant"), m_r, "reference_input.constant")
        r_seq = np.broadcast_to(r0, (cfg.horizon, m_r))
    norms = np.linalg.norm(r_seq, axis=1)
    if np.any(norms > reference.r_max * (1 + 1e-12)):
        k = int(np.argmax(norms > reference.r_max * (1 + 1e-12)))
        raise ConfigError(f"reference input at step {k} exceeds r_max = {reference.r_max}", "reference_input")

    return Scenario(
        plant=plant, reference=reference, K_nominal=K_nom, K_star=K_star, theta_star=theta_star,
        theta0_spec=theta0, r_seq=r_seq, x_p0=_vector(cfg.x_p0, n, "x_p0"),
        x_m0=_vector(cfg.x_m0, n, "x_m0"), law_spec=cfg.law.as_dict(),
    )
