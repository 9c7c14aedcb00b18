"""Command line entry point ``hotmrac``.

Human-readable progress goes to stderr; each command ends by printing one
JSON summary line on stdout.  Exit codes: 0 success, 2 config error, 3 gain
violation, 4 divergence or certificate breach.
"""

import argparse
import json
import math
import sys

from .config import RegionSpec, load_config
from .exceptions import CertificateViolation, ConfigError, DivergenceError, GainConditionError
from .laws import GAIN_MODES, PROPOSITION, validate_gains
from .region import build_region_grid, write_region_csv
from .sim import emit_csv, run_monte_carlo, simulate_config

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_GAINS = 3
EXIT_BREACH = 4


def _log(msg):
    print(msg, file=sys.stderr)


def _summary(**fields):
    print(json.dumps(fields, sort_keys=True, allow_nan=True))


def _load(args):
    cfg = load_config(args.config, args.set)
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    if getattr(args, "fail_fast", False):
        cfg.monitor.enabled = True
        cfg.monitor.fail_fast = True
    return cfg


def _check_cfg_gains(cfg):
    law = cfg.law
    report = validate_gains(law.law, law.gamma, law.beta, law.mu, law.gain_mode)
    if not report.ok:
        raise GainConditionError(report.violation)
    return report


def cmd_simulate(args):
    cfg = _load(args)
    _check_cfg_gains(cfg)
    traj = simulate_config(cfg)
    records = traj.records(0)
    emit_csv(records, args.out)
    e_final = float(traj.e_final_norm[0])
    eps_final = records[-1].eps_norm
    _log(f"wrote {len(records)} steps to {args.out}")
    _log(f"terminal |e| = {e_final:.6e}, terminal |eps| = {eps_final:.6e}")
    if traj.V is not None:
        _log(f"certificate violations: {traj.violations}")
    _summary(command="simulate", steps=len(records), e_final=e_final, eps_final=eps_final,
             violations=traj.violations, out=str(args.out))
    return EXIT_OK


def cmd_montecarlo(args):
    cfg = _load(args)
    _check_cfg_gains(cfg)
    stats = run_monte_carlo(cfg, trials=args.trials)
    emit_csv(stats, args.out)
    e_final = float(stats.e_mean[-1])
    _log(f"{stats.trials} trials kept, {stats.diverged_count} diverged; stats written to {args.out}")
    for trial, step in stats.diverged:
        _log(f"  trial {trial} diverged at step {step}")
    _log(f"final mean |e| = {e_final:.6e}")
    _summary(command="montecarlo", trials=stats.trials + stats.diverged_count, diverged=stats.diverged_count,
             e_mean_final=e_final, out=str(args.out))
    return EXIT_BREACH if stats.diverged_count else EXIT_OK


def _parse_grid(text):
    try:
        parts = [int(v) for v in text.lower().split("x")]
    except ValueError:
        parts = []
    if len(parts) != 3 or min(parts) < 2:
        raise ConfigError(f"--grid expects GxBxL with every count >= 2, got {text!r}", "--grid")
    return RegionSpec(*parts)


def cmd_region(args):
    spec = load_config(args.config, args.set).region if args.config else RegionSpec()
    if args.grid:
        spec = _parse_grid(args.grid)
    grid = build_region_grid(spec.gamma_steps, spec.beta_steps, spec.lambda_resolution)
    write_region_csv(grid, args.out)
    n_allow = int(grid.allowable.sum())
    n_prop = int(grid.prop3_allowable.sum())
    _log(f"{grid.allowable.size} grid points: {n_allow} allowable, {n_prop} proposition-admissible")
    _summary(command="region", points=int(grid.allowable.size), allowable=n_allow, proposition=n_prop,
             gamma_extent_beta_0_5=grid.gamma_extent(0.5), out=str(args.out))
    return EXIT_OK


def cmd_check_gains(args):
    if args.config:
        law = load_config(args.config, args.set).law
        kind, gamma, beta, mu, mode = law.law, law.gamma, law.beta, law.mu, law.gain_mode
    else:
        if args.gamma is None:
            raise ConfigError("check-gains needs --gamma or --config", "--gamma")
        kind, gamma, beta, mu, mode = args.law, args.gamma, args.beta, args.mu, args.mode
    report = validate_gains(kind, gamma, beta, mu, mode)
    detail = {}
    if report.alpha is not None:
        detail["alpha"] = report.alpha
    if report.d_min is not None:
        detail.update(c_min=report.c_min, d_min=report.d_min)
    if report.ok:
        extra = ", ".join(f"{k} = {v:.6g}" for k, v in detail.items())
        _log(f"{kind} gains ok" + (f" ({extra})" if extra else ""))
    else:
        _log(f"{kind} gains violate: {report.violation}")
        if report.c_min is not None:
            _log(f"grid verdict: c_min = {report.c_min:.6g}, d_min = {report.d_min:.6g}")
    clean = {k: (v if math.isfinite(v) else None) for k, v in detail.items()}
    _summary(command="check-gains", law=kind, mode=mode, ok=report.ok, violation=report.violation, **clean)
    return EXIT_OK if report.ok else EXIT_GAINS


def build_parser():
    parser = argparse.ArgumentParser(prog="hotmrac", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config_required=True):
        p.add_argument("--config", required=config_required, help="JSON run config")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override a config entry by dotted key (repeatable)")

    p = sub.add_parser("simulate", help="single closed-loop run to a trajectory CSV")
    common(p)
    p.add_argument("--out", required=True, help="trajectory CSV path")
    p.add_argument("--fail-fast", action="store_true", help="enable the certificate monitor and stop on breach")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("montecarlo", help="Monte Carlo sweep to a statistics CSV")
    common(p)
    p.add_argument("--out", required=True, help="statistics CSV path")
    p.add_argument("--trials", type=int, help="override montecarlo.trials")
    p.add_argument("--seed", type=int, help="override seed")
    p.add_argument("--fail-fast", action="store_true", help="enable the certificate monitor and stop on breach")
    p.set_defaults(func=cmd_montecarlo)

    p = sub.add_parser("region", help="export the allowable high-order tuner gain grid")
    common(p, config_required=False)
    p.add_argument("--out", required=True, help="region grid CSV path")
    p.add_argument("--grid", metavar="GxBxL", help="gamma x beta x lambda resolutions")
    p.set_defaults(func=cmd_region)

    p = sub.add_parser("check-gains", help="validate adaptive-law gains")
    common(p, config_required=False)
    p.add_argument("--law", choices=("gd", "hot"), default="gd")
    p.add_argument("--gamma", type=float, help="step size")
    p.add_argument("--beta", type=float, help="high-order tuner momentum gain")
    p.add_argument("--mu", type=float, default=1.0, help="normalization floor (default 1)")
    p.add_argument("--mode", choices=GAIN_MODES, default=PROPOSITION)
    p.set_defaults(func=cmd_check_gains)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        _log(f"config error: {exc}")
        _summary(command=args.command, error="config", message=str(exc))
        return EXIT_CONFIG
    except GainConditionError as exc:
        _log(f"gain violation: {exc}")
        _summary(command=args.command, error="gains", violation=str(exc))
        return EXIT_GAINS
    except DivergenceError as exc:
        _log(f"diverged: {exc}")
        _summary(command=args.command, error="divergence", step=exc.step)
        return EXIT_BREACH
    except CertificateViolation as exc:
        _log(f"certificate breach: {exc}")
        _summary(command=args.command, error="certificate", step=exc.step)
        return EXIT_BREACH
    except OSError as exc:
        _log(f"i/o error: {exc}")
        _summary(command=args.command, error="io", message=str(exc))
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
