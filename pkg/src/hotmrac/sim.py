"""Closed-loop simulation, Monte Carlo protocol and CSV output.

The engine integrates a whole batch of independent trajectories at once:
every model matrix may either be shared (2-D) or given per trajectory with a
leading batch axis.  A single run is simply a batch of one.
"""

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .error_model import LeftInverse, normalizer
from .exceptions import CertificateViolation, DimensionError, DivergenceError
from .lyapunov import CertificateMonitor
from .plant import build_regressor, control_input

__all__ = [
    "Ensemble",
    "Trajectory",
    "StepRecord",
    "TrialStats",
    "simulate",
    "run_closed_loop",
    "run_monte_carlo",
    "trial_rng",
    "nearest_rank",
    "trial_stats",
    "emit_csv",
    "read_csv",
    "DIVERGENCE_THRESHOLD",
]

DIVERGENCE_THRESHOLD = 1e12
PERCENTILES = (5, 25, 75, 95)


def _mv(M, v):
    return (M @ v[..., None])[..., 0]


@dataclass
class Ensemble:
    """Arrays describing a batch of closed loops sharing dimensions and basis.

    ``a`` is ``(..., m, p)``; ``left_inverse`` is ``(B^T B)^-1 B^T``;
    ``theta_star`` is optional and only used by diagnostics.
    """

    A_p: np.ndarray
    B: np.ndarray
    a: np.ndarray
    basis: object
    A_m: np.ndarray
    B_ref: np.ndarray
    size: int = 1
    B_r: np.ndarray = None
    left_inverse: np.ndarray = None
    theta_star: np.ndarray = None

    def __post_init__(self):
        if self.left_inverse is None:
            B = np.asarray(self.B)
            if B.ndim == 2:
                self.left_inverse = LeftInverse(B).matrix
            else:
                self.left_inverse = np.stack([LeftInverse(b).matrix for b in B])

    @property
    def n(self):
        return self.A_p.shape[-1]

    @property
    def m(self):
        return self.B.shape[-1]

    @property
    def q(self):
        return self.n + self.basis.p

    @classmethod
    def from_models(cls, plants, references, theta_stars=None):
        """Stack plant/reference models; shared arrays stay 2-D."""
        plants = list(plants)
        if not isinstance(references, (list, tuple)):
            references = [references] * len(plants)
        if len(references) != len(plants):
            raise DimensionError("need one reference model per plant")
        basis = plants[0].basis
        if any(p.basis is not basis for p in plants) and basis.p:
            raise ValueError("all plants in an ensemble must share one basis object")
        has_br = plants[0].B_r is not None
        if any((p.B_r is not None) != has_br for p in plants):
            raise ValueError("either every plant or none has a reference-input matrix")

        def pack(mats):
            first = mats[0]
            if all(M is first or np.array_equal(M, first) for M in mats[1:]):
                return np.asarray(first, dtype=float)
            return np.stack(mats).astype(float)

        for p, ref in zip(plants, references):
            if not np.allclose(ref.B, p.reference_matrix):
                raise ValueError("reference model must be driven through the plant's reference matrix")
        ts = None
        if theta_stars is not None:
            ts = pack([np.asarray(t, dtype=float) for t in theta_stars])
        return cls(
            A_p=pack([p.A_p for p in plants]),
            B=pack([p.B for p in plants]),
            a=pack([p.a for p in plants]),
            basis=basis,
            A_m=pack([r.A_m for r in references]),
            B_ref=pack([r.B for r in references]),
            size=len(plants),
            B_r=pack([p.B_r for p in plants]) if has_br else None,
            theta_star=ts,
        )


@dataclass
class StepRecord:
    """Everything known at step ``k``; ``eps`` is the error measured at ``k+1``."""

    k: int
    x_p: np.ndarray
    x_m: np.ndarray
    eps: np.ndarray
    u: np.ndarray
    phi: np.ndarray
    N: float
    V: float = None
    dV: float = None
    bound: float = None
    ok: bool = None

    @property
    def e(self):
        return self.x_p - self.x_m

    @property
    def e_norm(self):
        return float(np.linalg.norm(self.e))

    @property
    def eps_norm(self):
        return float(np.linalg.norm(self.eps))


@dataclass
class Trajectory:
    """Per-step arrays with shape ``(T, batch, ...)``; ``theta`` has ``T + 1`` rows."""

    e_norm: np.ndarray
    eps_norm: np.ndarray
    N: np.ndarray
    diverged_step: np.ndarray
    x_p_final: np.ndarray
    x_m_final: np.ndarray
    x_p: np.ndarray = None
    x_m: np.ndarray = None
    u: np.ndarray = None
    phi: np.ndarray = None
    eps: np.ndarray = None
    theta: np.ndarray = None
    xi: np.ndarray = None
    V: np.ndarray = None
    dV: np.ndarray = None
    bound: np.ndarray = None
    ok: np.ndarray = None
    model_residual: np.ndarray = None
    state_residual: np.ndarray = None
    violations: int = 0

    @property
    def horizon(self):
        return self.e_norm.shape[0]

    @property
    def e_final_norm(self):
        return np.linalg.norm(self.x_p_final - self.x_m_final, axis=-1)

    def records(self, trial=0):
        if self.x_p is None:
            raise ValueError("trajectory was simulated without full recording")
        mon = self.V is not None
        return [
            StepRecord(
                k, self.x_p[k, trial], self.x_m[k, trial], self.eps[k, trial], self.u[k, trial],
                self.phi[k, trial], float(self.N[k, trial]),
                float(self.V[k, trial]) if mon else None,
                float(self.dV[k, trial]) if mon else None,
                float(self.bound[k, trial]) if mon else None,
                bool(self.ok[k, trial]) if mon else None,
            )
            for k in range(self.horizon)
        ]


def simulate(ens, law, theta0, r_seq, x_p0=None, x_m0=None, *, monitor=False,
             fail_fast=False, record="full", divergence_threshold=DIVERGENCE_THRESHOLD):
    """Run the direct adaptive controller on every trajectory of ``ens``.

    Each step: receive ``r_k``; form ``phi_k``; apply ``u_k = Theta_k phi_k + r_k``
    (``r_k`` is routed through ``B_r`` instead when the plant has one); measure
    ``x_p(k+1)``; advance the reference model; form ``e_(k+1)`` and
    ``eps_(k+1)`` from states; call ``law.update(Theta_k, phi_k, eps_(k+1))``.

    ``monitor`` evaluates the Lyapunov certificate and error-model residuals
    (needs ``ens.theta_star``).  Diverged trajectories are flagged in
    ``diverged_step`` and their later values are meaningless.
    """
    if record not in ("full", "norms"):
        raise ValueError("record must be 'full' or 'norms'")
    Bt, n, m, q = ens.size, ens.n, ens.m, ens.q
    r_seq = np.asarray(r_seq, dtype=float)
    if r_seq.ndim == 1:
        r_seq = r_seq[:, None]
    # (T, m) is shared by the batch, (T, batch, m) is per trajectory
    T = r_seq.shape[0]
    if T < 1:
        raise ValueError("horizon must be at least 1")
    x = np.array(np.broadcast_to(np.zeros(n) if x_p0 is None else x_p0, (Bt, n)), dtype=float)
    xm = np.array(np.broadcast_to(np.zeros(n) if x_m0 is None else x_m0, (Bt, n)), dtype=float)
    theta = np.array(np.broadcast_to(theta0, (Bt, m, q)), dtype=float)
    route_r = ens.B_r is not None
    zero_r = np.zeros(m)

    law.reset()
    mon = None
    if monitor:
        if ens.theta_star is None:
            raise ValueError("monitoring needs the true parameters")
        mon = CertificateMonitor(law, ens.theta_star)
    full = record == "full"

    out = {name: np.empty((T, Bt)) for name in ("e_norm", "eps_norm", "N")}
    if full:
        out.update(x_p=np.empty((T, Bt, n)), x_m=np.empty((T, Bt, n)), u=np.empty((T, Bt, m)),
                   phi=np.empty((T, Bt, q)), eps=np.empty((T, Bt, m)), theta=np.empty((T + 1, Bt, m, q)))
        out["theta"][0] = theta
        if law.tag == "hot":
            out["xi"] = np.empty((T + 1, Bt, m, q))
    if mon:
        for name in ("V", "dV", "bound", "model_residual", "state_residual"):
            out[name] = np.empty((T, Bt))
        out["ok"] = np.empty((T, Bt), dtype=bool)
    alive = np.ones(Bt, dtype=bool)
    diverged = np.full(Bt, -1)
    violations = 0

    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(T):
            r = r_seq[k]
            fx = ens.basis.evaluate(x)
            phi = np.concatenate([x, -fx], axis=-1)
            u = control_input(theta, phi, zero_r if route_r else r)
            x_next = _mv(ens.A_p, x) + _mv(ens.B, _mv(ens.a, fx) + u)
            if route_r:
                x_next += _mv(ens.B_r, r)
            xm_next = _mv(ens.A_m, xm) + _mv(ens.B_ref, r)
            e = x - xm
            e_next = x_next - xm_next
            A_m_e = _mv(ens.A_m, e)
            eps = _mv(ens.left_inverse, e_next - A_m_e)
            N = normalizer(phi, law.mu)

            if "xi" in out:
                out["xi"][k] = theta if law.xi is None else law.xi
            if mon:
                mon.before(theta)
            theta_next = law.update(theta, phi, eps)

            out["e_norm"][k] = np.sqrt(np.sum(e * e, axis=-1))
            out["eps_norm"][k] = np.sqrt(np.sum(eps * eps, axis=-1))
            out["N"][k] = N
            if full:
                out["x_p"][k], out["x_m"][k], out["u"][k] = x, xm, u
                out["phi"][k], out["eps"][k] = phi, eps
                out["theta"][k + 1] = theta_next
            if mon:
                V, dV, bound, ok = mon.after(theta_next, eps, N)
                ok = ok | ~alive
                out["V"][k], out["dV"][k], out["bound"][k], out["ok"][k] = V, dV, bound, ok
                bad = int(Bt - np.count_nonzero(ok))
                if bad:
                    violations += bad
                    if fail_fast:
                        i = int(np.flatnonzero(~ok)[0])
                        raise CertificateViolation(k, float(dV[i]), float(bound[i]))
                pred = _mv(theta - ens.theta_star, phi)
                out["model_residual"][k] = np.max(np.abs(eps - pred), axis=-1)
                res = e_next - A_m_e - _mv(ens.B, eps)
                out["state_residual"][k] = np.sqrt(np.sum(res * res, axis=-1))

            size = np.sqrt(np.sum(x_next * x_next, axis=-1))
            blown = alive & ~(size <= divergence_threshold)
            if blown.any():
                diverged[blown] = k
                alive &= ~blown
            x, xm, theta = x_next, xm_next, theta_next
        if "xi" in out:
            out["xi"][T] = law.xi

    return Trajectory(diverged_step=diverged, x_p_final=x, x_m_final=xm, violations=violations, **out)


def run_closed_loop(cfg, *, fail_fast=None):
    """Single trajectory for a run config; returns its list of :class:`StepRecord`.

    Raises
    ------
    DivergenceError
        If the state blows up.
    """
    traj = simulate_config(cfg, fail_fast=fail_fast)
    return traj.records(0)


def simulate_config(cfg, *, fail_fast=None, record="full"):
    from .config import build_scenario

    sc = build_scenario(cfg)
    ens = Ensemble.from_models([sc.plant], sc.reference,
                               [sc.theta_star] if sc.theta_star is not None else None)
    ff = cfg.monitor.fail_fast if fail_fast is None else fail_fast
    traj = simulate(ens, sc.make_law(), sc.theta0, sc.r_seq, sc.x_p0, sc.x_m0,
                    monitor=cfg.monitor.enabled and sc.theta_star is not None,
                    fail_fast=ff, record=record)
    if traj.diverged_step[0] >= 0:
        raise DivergenceError(int(traj.diverged_step[0]))
    return traj


def trial_rng(seed, trial):
    """Counter-based generator keyed by ``(seed, trial)``; independent of run order."""
    ss = np.random.SeedSequence([int(seed), int(trial)])
    return np.random.Generator(np.random.Philox(ss))


def nearest_rank(sorted_vals, pct, axis=-1):
    """Nearest-rank percentile of data already sorted along ``axis``."""
    count = sorted_vals.shape[axis]
    rank = max(1, math.ceil(pct / 100.0 * count))
    return np.take(sorted_vals, rank - 1, axis=axis)


@dataclass
class TrialStats:
    """Per-step summary over trials of ``|e_k|`` and ``|eps_(k+1)|``."""

    e_mean: np.ndarray
    e_pct: dict
    eps_mean: np.ndarray
    eps_pct: dict
    diverged: list = field(default_factory=list)
    trials: int = 0
    e_peak: np.ndarray = None
    e_final: np.ndarray = None

    @property
    def horizon(self):
        return self.e_mean.shape[0]

    @property
    def diverged_count(self):
        return len(self.diverged)


def trial_stats(e_norm, eps_norm, diverged_step, e_final=None):
    """Aggregate ``(T, trials)`` arrays, excluding diverged trials."""
    keep = diverged_step < 0
    diverged = [(int(i), int(s)) for i, s in enumerate(diverged_step) if s >= 0]
    T = e_norm.shape[0]

    def summarize(v):
        v = v[:, keep]
        if v.shape[1] == 0:
            nan = np.full(T, np.nan)
            return nan, {p: nan for p in PERCENTILES}
        s = np.sort(v, axis=1)
        return v.mean(axis=1), {p: nearest_rank(s, p, axis=1) for p in PERCENTILES}

    e_mean, e_pct = summarize(e_norm)
    eps_mean, eps_pct = summarize(eps_norm)
    return TrialStats(
        e_mean, e_pct, eps_mean, eps_pct, diverged, int(keep.sum()),
        e_peak=e_norm[:, keep].max(axis=0) if keep.any() else np.array([]),
        e_final=(e_final[keep] if e_final is not None else e_norm[-1, keep]),
    )


def run_monte_carlo(cfg, trials=None, perturb=None, seed=None, chunk=256):
    """Monte Carlo over random true gains ``K* = K_nominal * U`` (elementwise).

    ``U`` has i.i.d. ``Uniform(low, high)`` entries drawn from the trial's own
    stream; the true plant is ``A_p = A_m - B K*``.  Returns :class:`TrialStats`.
    """
    from .config import build_scenario

    mc = cfg.montecarlo
    trials = mc.trials if trials is None else int(trials)
    low, high = (mc.low, mc.high) if perturb is None else (perturb["low"], perturb["high"])
    seed = cfg.seed if seed is None else int(seed)
    if trials < 1:
        raise ValueError("trials must be at least 1")
    if not low <= high:
        raise ValueError("perturbation range must satisfy low <= high")
    sc = build_scenario(cfg)
    K_nom = sc.K_nominal
    B = sc.plant.B

    e_parts, eps_parts, div_parts, final_parts = [], [], [], []
    for start in range(0, trials, chunk):
        idx = range(start, min(trials, start + chunk))
        K_star = np.stack([K_nom * trial_rng(seed, t).uniform(low, high, size=K_nom.shape) for t in idx])
        A_p = sc.reference.A_m - B @ K_star
        theta_star = np.concatenate([K_star, np.broadcast_to(sc.plant.a, (len(idx),) + sc.plant.a.shape)], axis=-1)
        ens = Ensemble(A_p=A_p, B=B, a=sc.plant.a, basis=sc.plant.basis, A_m=sc.reference.A_m,
                       B_ref=sc.reference.B, size=len(idx), B_r=sc.plant.B_r, theta_star=theta_star)
        theta0 = sc.theta0_for(theta_star)
        traj = simulate(ens, sc.make_law(), theta0, sc.r_seq, sc.x_p0, sc.x_m0,
                        monitor=cfg.monitor.enabled, fail_fast=cfg.monitor.fail_fast, record="norms")
        e_parts.append(traj.e_norm)
        eps_parts.append(traj.eps_norm)
        div_parts.append(np.where(traj.diverged_step >= 0, traj.diverged_step, -1))
        final_parts.append(traj.e_final_norm)
    return trial_stats(np.concatenate(e_parts, axis=1), np.concatenate(eps_parts, axis=1),
                       np.concatenate(div_parts), np.concatenate(final_parts))


TRAJECTORY_TAIL = ["N", "V", "dV", "bound", "allowable_flag"]
STATS_COLUMNS = ["k", "e_mean", "e_p05", "e_p25", "e_p75", "e_p95",
                 "eps_mean", "eps_p05", "eps_p25", "eps_p75", "eps_p95", "diverged_count"]


def trajectory_columns(n, m):
    return (["k"] + [f"x_p{i}" for i in range(n)] + [f"x_m{i}" for i in range(n)]
            + ["e_norm", "eps_norm"] + [f"u{i}" for i in range(m)] + TRAJECTORY_TAIL)


def _fmt(v):
    return "" if v is None else repr(float(v))


def emit_csv(data, path, n=None, m=None):
    """Write a trajectory (list of :class:`StepRecord`) or :class:`TrialStats`.

    Floats are written with ``repr`` so they round-trip exactly.
    """
    path = Path(path)
    try:
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            if isinstance(data, TrialStats):
                w.writerow(STATS_COLUMNS)
                for k in range(data.horizon):
                    w.writerow([k, _fmt(data.e_mean[k])] + [_fmt(data.e_pct[p][k]) for p in PERCENTILES]
                               + [_fmt(data.eps_mean[k])] + [_fmt(data.eps_pct[p][k]) for p in PERCENTILES]
                               + [data.diverged_count])
                return path
            records = list(data)
            if records:
                n, m = records[0].x_p.size, records[0].u.size
            w.writerow(trajectory_columns(n or 0, m or 0))
            for rec in records:
                flag = "" if rec.ok is None else int(rec.ok)
                w.writerow([rec.k] + [_fmt(v) for v in rec.x_p] + [_fmt(v) for v in rec.x_m]
                           + [_fmt(rec.e_norm), _fmt(rec.eps_norm)] + [_fmt(v) for v in rec.u]
                           + [_fmt(rec.N), _fmt(rec.V), _fmt(rec.dV), _fmt(rec.bound), flag])
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
    return path


def read_csv(path):
    """Parse a file written by :func:`emit_csv` into ``{column: float array}``."""
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    cols = {}
    for j, name in enumerate(header):
        cols[name] = np.array([float(r[j]) if r[j] != "" else np.nan for r in body])
    return cols
