"""Command line entry point: experiment sweeps, simulation and calibration."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import io
from .completion import CompletionOptions
from .delay import DelaySearchConfig, estimate_delay
from .errors import ConfigError
from .geometry import generate_ring_layout
from .harness import METHODS, PRESETS, SWEEP_VARS, agg_path, config_from_dict, load_config, preset, run_sweep
from .observation import MODES, synthesize_observation
from .pipeline import localize
from .units import parse_length, parse_time


def _lengths(text: str) -> list:
    return [parse_length(t) for t in text.split(",") if t.strip()]


def _ints(text: str) -> list:
    return [int(t) for t in text.split(",") if t.strip()]


def _add_overrides(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", help="record CSV path; aggregates go to <out>.agg.csv")
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--method", choices=METHODS, action="append", help="method tag (repeatable)")
    p.add_argument("--mode", choices=MODES, help="how close pairs enter the completion")
    p.add_argument("--trials", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--refresh", action="store_true", default=None,
                   help="enable the weak-direction refresh in the completion solver")


def _apply_overrides(cfg, args):
    for name in ("out", "seed", "method", "mode", "trials", "workers"):
        v = getattr(args, name, None)
        if v is not None:
            setattr(cfg, name, v)
    if getattr(args, "refresh", None):
        cfg.completion = {**cfg.completion, "refresh": True}
    return cfg.validate()


def _report(cfg, records) -> int:
    failed = [r for r in records if not r.ok]
    print(f"{cfg.experiment_id}: {len(records)} trials, {len(failed)} failed")
    if cfg.out:
        print(f"records: {cfg.out}\naggregate: {agg_path(cfg.out)}")
    for r in failed[:10]:
        print(f"  {r.method} n={r.n} a={r.a_m} sigma={r.sigma_m} trial={r.trial}: {r.status}", file=sys.stderr)
    return 1 if failed else 0


def _print_agg(rows) -> None:
    for row in rows:
        series = f" [{row['series']}]" if row["series"] else ""
        print(f"  {row['method']}{series} {row['sweep_value']}: mean d = {row['mean_d_metric']:.3e} m^2"
              f" (n_trials={row['n_trials']})")


def cmd_run(args) -> int:
    cfg = _apply_overrides(load_config(args.config), args)
    records, rows = run_sweep(cfg)
    _print_agg(rows)
    return _report(cfg, records)


def cmd_sweep(args) -> int:
    raw = {
        "experiment_id": args.experiment_id, "sweep": args.var, "n": _ints(args.n), "a": _lengths(args.a),
        "sigma": _lengths(args.sigma), "r0": parse_length(args.r0), "delta": args.delta, "p_miss": args.p_miss,
        "c0": args.c0, "eta": args.eta,
    }
    if args.t0 is not None:
        raw["t0"] = args.t0
    else:
        raw["d0"] = args.d0
    cfg = _apply_overrides(config_from_dict(raw), args)
    records, rows = run_sweep(cfg)
    _print_agg(rows)
    return _report(cfg, records)


def cmd_demo(args) -> int:
    name = args.command.removeprefix("demo-")
    cfg = preset(name, out=args.out or f"{name}.csv")
    cfg = _apply_overrides(cfg, args)
    records, rows = run_sweep(cfg)
    _print_agg(rows)
    return _report(cfg, records)


def cmd_simulate(args) -> int:
    r0, a = parse_length(args.r0), parse_length(args.a)
    d0 = parse_time(args.t0) * args.c0 if args.t0 is not None else parse_length(args.d0)
    layout = generate_ring_layout(args.n, r0, a, args.seed)
    obs = synthesize_observation(
        layout, args.delta, 1.0 - args.p_miss, parse_length(args.sigma), d0, args.seed, mode=args.mode, c0=args.c0
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    io.write_layout_csv(out / "layout.csv", layout)
    mtx, side = io.write_observation(out / "observation.mtx", obs)
    print(f"wrote {out / 'layout.csv'}, {mtx}, {side}")
    return 0


def cmd_calibrate(args) -> int:
    obs = io.read_observation(args.observation)
    opts = CompletionOptions(refresh=bool(args.refresh), max_iters=args.max_iters)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.d0 is not None:
        est, _, res = localize(obs, parse_length(args.d0), opts, args.eta)
        d0_hat = parse_length(args.d0)
    else:
        d_max = parse_length(args.d_max) if args.d_max is not None else None
        cfg = DelaySearchConfig(parse_length(args.d_min), d_max, args.grid, not args.no_refine, opts, args.eta,
                                args.workers)
        search = estimate_delay(obs, cfg)
        est, res, d0_hat = search.best_positions, search.best_completion, search.d0_hat
        io.write_cost_curve_csv(out / "delay_cost.csv", search)
    reference = io.read_positions_csv(args.reference) if args.reference else None
    io.write_estimate_csv(out / "positions.csv", est, reference)
    io.write_trace_csv(out / "trace.csv", res)
    summary = {"d0_hat_m": d0_hat, "iterations": res.iterations, "converged": res.converged, "cost": res.cost}
    (out / "summary.json").write_text(json.dumps(summary, indent=2))
    print(json.dumps(summary))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ringcal", description="Ring-array self-calibration from time of flight.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a sweep described by a JSON config")
    p.add_argument("--config", required=True)
    _add_overrides(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="run a sweep described by flags")
    p.add_argument("--experiment-id", default="sweep")
    p.add_argument("--var", choices=SWEEP_VARS, default="n", help="variable on the x-axis")
    p.add_argument("--n", default="200", help="comma list of sensor counts")
    p.add_argument("--a", default="10mm", help="comma list of ring widths")
    p.add_argument("--sigma", default="0", help="comma list of noise levels")
    p.add_argument("--r0", default="0.1")
    p.add_argument("--delta", type=float, default=1.0)
    p.add_argument("--p-miss", type=float, default=0.05)
    p.add_argument("--d0", default="0")
    p.add_argument("--t0", help="delay as a time, multiplied by c0")
    p.add_argument("--c0", type=float, default=1500.0)
    p.add_argument("--eta", type=int, default=2)
    _add_overrides(p)
    p.set_defaults(func=cmd_sweep)

    for name in PRESETS:
        p = sub.add_parser(f"demo-{name}", help=f"run the preset {name} parameter set")
        _add_overrides(p)
        p.set_defaults(func=cmd_demo)

    p = sub.add_parser("simulate", help="write a layout and one observation set")
    p.add_argument("--n", type=int, default=200)
    p.add_argument("--r0", default="0.1")
    p.add_argument("--a", default="10mm")
    p.add_argument("--sigma", default="0")
    p.add_argument("--delta", type=float, default=1.0)
    p.add_argument("--p-miss", type=float, default=0.05)
    p.add_argument("--d0", default="0")
    p.add_argument("--t0")
    p.add_argument("--c0", type=float, default=1500.0)
    p.add_argument("--mode", choices=MODES, default="practical")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("calibrate", help="estimate positions (and delay) from an observation file")
    p.add_argument("observation", help="observation .mtx file with its .json sidecar")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--d0", help="known delay; omit to search for it")
    p.add_argument("--d-min", default="0")
    p.add_argument("--d-max")
    p.add_argument("--grid", type=int, default=101)
    p.add_argument("--no-refine", action="store_true")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--eta", type=int, default=2)
    p.add_argument("--max-iters", type=int, default=500)
    p.add_argument("--refresh", action="store_true")
    p.add_argument("--reference", help="true positions CSV to align the output onto")
    p.set_defaults(func=cmd_calibrate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
