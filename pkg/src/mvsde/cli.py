"""Command-line front end: config parsing, experiment dispatch, CSV emission.

Subcommands: simulate | convergence | chaos | moments | fg-rate | oracle-mean.
Flags may also be supplied through a flat JSON config file (--config); flags
given on the command line override file values, and unknown file keys are
rejected.  Step sizes and horizons are parsed as exact rationals ("1/1024",
"0.25"); bare binary floats are never accepted for grid quantities.

Exit codes: 0 success, 1 runtime error (e.g. a reported blow-up), 2 config
error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional

from .engine import TamingConfig, simulate
from .errors import ConfigError, MvsdeError, NonFiniteState
from .experiments import (chaos_study, convergence_study, meanfield_oracle,
                          moment_sweep)
from .measure import fg_rate_check
from .models import ModelSpec, builtin, builtin_names
from .report import ExperimentReport, make_run_id
from . import grid as grid_mod

__all__ = ["RunConfig", "parse", "run", "main"]

OUTPUT_DIR_ENV = "MVSDE_OUT"

_SUBCOMMANDS = ("simulate", "convergence", "chaos", "moments", "fg-rate",
                "oracle-mean")


@dataclass
class RunConfig:
    """Validated invocation: one subcommand plus its parameters."""

    subcommand: str
    model: str = "example1"
    params: Dict = field(default_factory=dict)
    horizon: Fraction = Fraction(4)
    delta: Optional[Fraction] = None
    deltas: List[Fraction] = field(default_factory=list)
    snapshots: List[Fraction] = field(default_factory=list)
    finest_exponent: int = 13
    level_exponents: List[int] = field(default_factory=lambda: [12, 11, 10, 9])
    gamma: float = 0.5
    tamed: bool = True
    n_particles: int = 100
    n_list: List[int] = field(default_factory=list)
    n_reference: int = 0
    probe_count: int = 16
    p: float = 2.0
    replications: int = 20
    sampler: str = "normal"
    seed: int = 0
    seeds: int = 20
    snap: bool = True
    workers: int = 0
    out_dir: str = "."


def _rational(text: str, name: str) -> Fraction:
    """Parse 'num/den' or a decimal string to an exact Fraction."""
    try:
        value = Fraction(str(text))
    except (ValueError, ZeroDivisionError):
        raise ConfigError(f"{name}: cannot parse {text!r} as a rational") from None
    return value


def _check(config: RunConfig) -> RunConfig:
    if config.subcommand not in _SUBCOMMANDS:
        raise ConfigError(f"subcommand: unknown {config.subcommand!r}")
    if config.tamed and not 0 < config.gamma <= 0.5:
        raise ConfigError(f"gamma: must lie in (0, 1/2], got {config.gamma}")
    if config.delta is not None and not 0 < config.delta < 1:
        raise ConfigError(f"delta: must lie in (0, 1), got {config.delta}")
    for d in config.deltas:
        if not 0 < d < 1:
            raise ConfigError(f"deltas: entry {d} outside (0, 1)")
    if config.horizon <= 0:
        raise ConfigError(f"horizon: must be positive, got {config.horizon}")
    if config.n_particles < 1:
        raise ConfigError(f"n_particles: must be >= 1, got {config.n_particles}")
    if config.p < 1:
        raise ConfigError(f"p: must be >= 1, got {config.p}")
    if config.workers < 0:
        raise ConfigError(f"workers: must be >= 0, got {config.workers}")
    if config.model not in builtin_names():
        raise ConfigError(
            f"model: unknown {config.model!r}; available: {', '.join(builtin_names())}"
        )
    return config


def _parse_params(pairs: List[str]) -> Dict:
    out = {}
    for pair in pairs:
        if "=" not in pair:
            raise ConfigError(f"param: expected key=value, got {pair!r}")
        key, value = pair.split("=", 1)
        try:
            out[key.strip()] = float(Fraction(value.strip()))
        except (ValueError, ZeroDivisionError):
            raise ConfigError(f"param {key!r}: cannot parse {value!r}") from None
    return out


def _int_list(text: str, name: str) -> List[int]:
    try:
        return [int(x) for x in str(text).split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"{name}: expected comma-separated integers") from None


_FILE_KEYS = {
    "model", "params", "horizon", "delta", "deltas", "snapshots",
    "finest_exponent", "level_exponents", "gamma", "tamed", "n_particles",
    "n_list", "n_reference", "probe_count", "p", "replications", "sampler",
    "seed", "seeds", "snap", "workers", "out_dir",
}


def _load_config_file(path: str) -> Dict:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"config: cannot read {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config: {path} is not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError("config: file must hold a flat JSON object")
    unknown = set(data) - _FILE_KEYS
    if unknown:
        raise ConfigError(f"config: unknown keys {sorted(unknown)}")
    for key in ("delta", "horizon"):
        if key in data and isinstance(data[key], float):
            raise ConfigError(
                f"config: {key} must be a string rational like \"1/1024\", not a float"
            )
    return data


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mvsde",
        description="Interacting-particle tamed Euler-Maruyama simulator "
                    "for neutral multiple-delay mean-field SDEs",
    )
    sub = parser.add_subparsers(dest="subcommand")

    def common(sp):
        sp.add_argument("--config", default=None, help="flat JSON config file")
        sp.add_argument("--model", default=None, choices=builtin_names())
        sp.add_argument("--param", action="append", default=[],
                        metavar="KEY=VALUE", help="model parameter override")
        sp.add_argument("-T", "--horizon", default=None,
                        help="time horizon as a rational string")
        sp.add_argument("--gamma", type=float, default=None)
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--snap", dest="snap", action="store_true", default=None,
                        help="snap delays to the grid (default)")
        sp.add_argument("--no-snap", dest="snap", action="store_false")
        sp.add_argument("--workers", type=int, default=None,
                        help="worker threads for independent runs (0 = auto)")
        sp.add_argument("--out", dest="out_dir", default=None,
                        help=f"output directory (default ${OUTPUT_DIR_ENV} or .)")

    sp = sub.add_parser("simulate", help="run one ensemble, write terminal states")
    common(sp)
    sp.add_argument("--delta", default=None, help="step size as a rational string")
    sp.add_argument("-N", "--n-particles", type=int, default=None)
    sp.add_argument("--untamed", action="store_true", help="classical EM contrast run")
    sp.add_argument("--snapshots", default=None,
                    help="comma-separated grid times to record besides T")

    sp = sub.add_parser("convergence", help="strong error vs step size")
    common(sp)
    sp.add_argument("--finest", dest="finest_exponent", type=int, default=None,
                    help="reference level: delta_ref = 2^-finest")
    sp.add_argument("--levels", dest="level_exponents", default=None,
                    help="comma-separated comparison exponents")
    sp.add_argument("-N", "--n-particles", type=int, default=None)

    sp = sub.add_parser("chaos", help="proxy error vs particle count")
    common(sp)
    sp.add_argument("--delta", default=None)
    sp.add_argument("--n-list", default=None, help="comma-separated ensemble sizes")
    sp.add_argument("--n-ref", dest="n_reference", type=int, default=None)
    sp.add_argument("--probes", dest="probe_count", type=int, default=None)
    sp.add_argument("-p", type=float, dest="p", default=None)

    sp = sub.add_parser("moments", help="path-sup moments vs step size")
    common(sp)
    sp.add_argument("--deltas", default=None, help="comma-separated rational steps")
    sp.add_argument("-N", "--n-particles", type=int, default=None)
    sp.add_argument("--seeds", type=int, default=None, help="number of seeds (0..k-1)")
    sp.add_argument("-p", type=float, dest="p", default=None)
    sp.add_argument("--untamed", action="store_true")

    sp = sub.add_parser("fg-rate", help="empirical-measure distance vs sample count")
    common(sp)
    sp.add_argument("--sampler", default=None, choices=("normal", "uniform", "point"))
    sp.add_argument("--n-list", default=None)
    sp.add_argument("--replications", type=int, default=None)
    sp.add_argument("-p", type=float, dest="p", default=None)

    sp = sub.add_parser("oracle-mean", help="particle mean vs delay-ODE oracle")
    common(sp)
    sp.add_argument("--delta", default=None)
    sp.add_argument("-N", "--n-particles", type=int, default=None)

    return parser


def parse(argv: List[str]) -> RunConfig:
    """Parse argv (and optional config file) into a validated RunConfig."""
    parser = _build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits with 2 on bad flags; normalize to ConfigError unless
        # the user asked for --help (exit code 0).
        if exc.code == 0:
            raise
        raise ConfigError("invalid command line") from None
    if ns.subcommand is None:
        raise ConfigError("missing subcommand; see --help")

    file_values = _load_config_file(ns.config) if getattr(ns, "config", None) else {}
    config = RunConfig(subcommand=ns.subcommand)

    def pick(flag_name, file_key=None):
        value = getattr(ns, flag_name, None)
        if value is not None:
            return value
        return file_values.get(file_key or flag_name)

    model = pick("model")
    if model is not None:
        config.model = model
    params = _parse_params(ns.param) if ns.param else {}
    if not params and isinstance(file_values.get("params"), dict):
        params = {k: float(v) for k, v in file_values["params"].items()}
    config.params = params

    horizon = pick("horizon")
    if horizon is not None:
        config.horizon = _rational(horizon, "horizon")
    delta = pick("delta")
    if delta is not None:
        config.delta = _rational(delta, "delta")
    deltas = pick("deltas")
    if deltas is not None:
        if isinstance(deltas, str):
            deltas = [d for d in deltas.split(",") if d.strip()]
        config.deltas = [_rational(d, "deltas") for d in deltas]
    snapshots = pick("snapshots")
    if snapshots is not None:
        if isinstance(snapshots, str):
            snapshots = [s for s in snapshots.split(",") if s.strip()]
        config.snapshots = [_rational(s, "snapshots") for s in snapshots]
    for name in ("gamma", "n_particles", "n_reference", "probe_count", "p",
                 "replications", "seed", "seeds", "workers",
                 "finest_exponent"):
        value = pick(name)
        if value is not None:
            setattr(config, name, type(getattr(config, name))(value))
    level_exponents = pick("level_exponents")
    if level_exponents is not None:
        if isinstance(level_exponents, str):
            level_exponents = _int_list(level_exponents, "levels")
        config.level_exponents = [int(e) for e in level_exponents]
    n_list = pick("n_list")
    if n_list is not None:
        if isinstance(n_list, str):
            n_list = _int_list(n_list, "n-list")
        config.n_list = [int(n) for n in n_list]
    sampler = pick("sampler")
    if sampler is not None:
        config.sampler = str(sampler)
    snap = pick("snap")
    if snap is not None:
        config.snap = bool(snap)
    if getattr(ns, "untamed", False) or file_values.get("tamed") is False:
        config.tamed = False
    out_dir = pick("out_dir")
    if out_dir is not None:
        config.out_dir = str(out_dir)
    else:
        config.out_dir = os.environ.get(OUTPUT_DIR_ENV, ".")
    return _check(config)


def _make_model(config: RunConfig) -> ModelSpec:
    return builtin(config.model, **config.params)


def _simulate_report(config: RunConfig) -> ExperimentReport:
    if config.delta is None:
        raise ConfigError("delta: required for simulate")
    model = _make_model(config)
    run_grid = grid_mod.build(model.lags, config.horizon, config.delta,
                              snap=config.snap)
    snapshot_steps = []
    for t in config.snapshots:
        ratio = t / run_grid.delta
        if ratio.denominator != 1 or not 0 <= ratio <= run_grid.big_mt:
            raise ConfigError(
                f"snapshots: {t} is not a grid time in [0, {config.horizon}]")
        snapshot_steps.append(int(ratio))
    taming = TamingConfig(gamma=config.gamma, tamed=config.tamed)
    result = simulate(model, run_grid, taming, config.n_particles, config.seed,
                      snapshot_steps=tuple(snapshot_steps))
    captured = dict(result.snapshots)
    captured[run_grid.big_mt] = result.terminal
    rows = []
    for step_index in sorted(captured):
        states = captured[step_index]
        time_f = float(run_grid.time(step_index))
        for i in range(config.n_particles):
            for comp in range(model.dim_state):
                rows.append({
                    "particle": i,
                    "component": comp,
                    "time": time_f,
                    "value": float(states[i, comp]),
                    "wall_ms": 0.0,
                })
    cfg = {
        "model": config.model, "params": config.params,
        "horizon": str(config.horizon), "delta": str(config.delta),
        "snapshots": [str(t) for t in config.snapshots],
        "gamma": config.gamma, "tamed": config.tamed,
        "n_particles": config.n_particles, "seed": config.seed,
        "snap": config.snap,
    }
    return ExperimentReport(
        kind="trajectory",
        columns=("run_id", "particle", "component", "time", "value"),
        rows=rows,
        config=cfg,
        annotations={
            "terminal_mean": [float(x) for x in result.terminal.mean(axis=0)],
            "terminal_second_moment": float((result.terminal**2).sum(1).mean()),
            "sup_max": float(result.running_sup.max()),
        },
    )


def _dispatch(config: RunConfig) -> ExperimentReport:
    workers = config.workers if config.workers > 0 else (os.cpu_count() or 1)
    if config.subcommand == "simulate":
        return _simulate_report(config)
    if config.subcommand == "convergence":
        return convergence_study(
            _make_model(config), config.horizon, config.gamma,
            config.n_particles, config.finest_exponent, config.level_exponents,
            config.seed, snap=config.snap, workers=workers,
        )
    if config.subcommand == "chaos":
        if config.delta is None:
            raise ConfigError("delta: required for chaos")
        n_list = config.n_list or [64, 128, 256, 512, 1024]
        n_ref = config.n_reference or 4 * max(n_list)
        return chaos_study(
            _make_model(config), config.horizon, config.gamma, config.delta,
            n_list, n_ref, config.probe_count, config.p, config.seed,
            snap=config.snap, workers=workers,
        )
    if config.subcommand == "moments":
        if not config.deltas:
            raise ConfigError("deltas: required for moments")
        return moment_sweep(
            _make_model(config), config.horizon, config.gamma, config.deltas,
            config.n_particles, config.p, config.seeds, tamed=config.tamed,
            snap=config.snap, workers=workers,
        )
    if config.subcommand == "fg-rate":
        n_list = config.n_list or [2**k for k in range(5, 13)]
        return fg_rate_check(config.sampler, config.p, n_list,
                             config.replications, config.seed)
    if config.subcommand == "oracle-mean":
        if config.delta is None:
            raise ConfigError("delta: required for oracle-mean")
        return meanfield_oracle(config.params, config.horizon, config.gamma,
                                config.delta, config.n_particles, config.seed)
    raise ConfigError(f"subcommand: unknown {config.subcommand!r}")


def run(config: RunConfig) -> int:
    """Execute one validated config; write CSV + sidecar; print a summary."""
    os.makedirs(config.out_dir, exist_ok=True)
    try:
        report = _dispatch(config)
    except NonFiniteState as exc:
        run_id = make_run_id(config.subcommand, {"seed": config.seed})
        print(f"run {run_id}: blow-up reported: {exc}", file=sys.stderr)
        return 1
    except ConfigError:
        raise
    except MvsdeError as exc:
        run_id = make_run_id(config.subcommand, {"seed": config.seed})
        print(f"run {run_id}: {exc}", file=sys.stderr)
        return 1
    base = os.path.join(config.out_dir, f"{report.kind}_{report.run_id}")
    report.write_csv(base + ".csv")
    report.write_jsonl(base + ".jsonl")
    if report.kind == "trajectory":
        ann = report.annotations
        print(f"trajectory run {report.run_id}: terminal mean "
              f"{ann['terminal_mean']}, wrote {base}.csv")
    elif report.kind == "oracle":
        row = report.rows[0]
        print(f"oracle run {report.run_id}: gap {row['gap']:.3e} within "
              f"band {report.annotations['tolerance']:.3e}, wrote {base}.csv")
    elif report.kind == "moments":
        ratio = report.annotations["max_min_ratio"]
        ratio_text = f"{ratio:.3f}" if ratio is not None else "n/a"
        print(f"moments run {report.run_id}: max/min ratio {ratio_text}, "
              f"blowups {report.annotations['total_blowups']}, wrote {base}.csv")
    else:
        print(f"{report.summary()}, wrote {base}.csv")
    return 0


def main(argv: Optional[List[str]] = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        config = parse(argv)
        return run(config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except MvsdeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
