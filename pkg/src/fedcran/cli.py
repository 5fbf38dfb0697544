"""Command-line entry points.

Verbs: optimize (one realization, full stage trace), sweep (experiment table
over a sweep axis), flsim (FL precision sweep with bound checks), baselines
(all schemes on one scenario). All verbs take --config/--seed/--out/--format;
sweep-style verbs also take --realizations.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace

import numpy as np

from .channel import sample_channels
from .errors import FedCranError
from .harness import (
    FL_SUMMARY_COLUMNS,
    FL_TRACE_COLUMNS,
    SWEEP_COLUMNS,
    load_config,
    rows_to_text,
    run_experiment,
    run_fl_experiment,
    write_rows,
)
from .optimizer import alternating_optimize


def _add_common(sub, realizations=False):
    sub.add_argument("--config", default=None, help="YAML config path (defaults apply)")
    sub.add_argument("--seed", type=int, default=None, help="base RNG seed")
    sub.add_argument("--out", default=None, help="output file path")
    sub.add_argument("--format", choices=("csv", "json"), default=None)
    if realizations:
        sub.add_argument("--realizations", type=int, default=None,
                         help="channel realizations per sweep value")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fedcran",
        description="Energy modeling and joint resource optimization for "
                    "quantized federated learning over cloud radio access networks",
    )
    subs = parser.add_subparsers(dest="verb", required=True)
    _add_common(subs.add_parser(
        "optimize", help="run the joint optimizer on one channel realization"))
    _add_common(subs.add_parser(
        "sweep", help="run the configured sweep over channel realizations"),
        realizations=True)
    _add_common(subs.add_parser(
        "flsim", help="run the FL simulator precision sweep with bound checks"))
    _add_common(subs.add_parser(
        "baselines", help="run joint and baseline schemes on the configured scenario"),
        realizations=True)
    return parser


def _emit(rows, columns, args, spec_out, spec_fmt):
    out = args.out if args.out is not None else spec_out
    fmt = args.format if args.format is not None else spec_fmt
    if out:
        write_rows(rows, columns, out, fmt)
        print(f"wrote {len(rows)} rows to {out}")
    else:
        sys.stdout.write(rows_to_text(rows, columns, fmt))


def cmd_optimize(args) -> int:
    scn, spec, _, opt_cfg = load_config(args.config)
    seed = args.seed if args.seed is not None else spec.seed
    ch = sample_channels(scn, np.random.default_rng(seed))
    trace = alternating_optimize(scn, ch, cfg=opt_cfg)
    for rec in trace.to_records():
        print(f"[{rec['step']:3d}] {rec['stage']:<10} total={rec['objective']:.6e} J")
    rep = trace.report
    print(f"converged={trace.converged} outer_iterations={trace.outer_iterations}")
    print(f"c_prec={rep.c_prec} rounds={rep.rounds_T:.1f} total={rep.total:.6e} J")
    if args.out:
        payload = {
            "seed": seed,
            "converged": trace.converged,
            "stages": trace.to_records(),
            "report": rep.to_record(),
        }
        with open(args.out, "w") as f:
            json.dump(payload, f, indent=2,
                      default=lambda o: o.item() if hasattr(o, "item") else str(o))
        print(f"wrote trace to {args.out}")
    return 0


def cmd_sweep(args) -> int:
    scn, spec, _, opt_cfg = load_config(args.config)
    if args.seed is not None:
        spec = replace(spec, seed=args.seed)
    if args.realizations is not None:
        spec = replace(spec, realizations=args.realizations)
    rows, failures = run_experiment(scn, spec, opt_cfg)
    if failures:
        print(f"warning: {len(failures)} realization(s) failed", file=sys.stderr)
    _emit(rows, SWEEP_COLUMNS, args, spec.out, spec.format)
    return 0


def cmd_flsim(args) -> int:
    _, _, fl_spec, _ = load_config(args.config)
    if args.seed is not None:
        fl_spec = replace(fl_spec, seed=args.seed)
    summary, traces = run_fl_experiment(fl_spec)
    if fl_spec.traces_out:
        write_rows(traces, FL_TRACE_COLUMNS, fl_spec.traces_out, fl_spec.format)
        print(f"wrote {len(traces)} trace rows to {fl_spec.traces_out}")
    _emit(summary, FL_SUMMARY_COLUMNS, args, fl_spec.out, fl_spec.format)
    return 0


def cmd_baselines(args) -> int:
    scn, spec, _, opt_cfg = load_config(args.config)
    spec = replace(spec, sweep="none", values=[None])
    if args.seed is not None:
        spec = replace(spec, seed=args.seed)
    spec = replace(spec, realizations=args.realizations
                   if args.realizations is not None else 1)
    rows, failures = run_experiment(scn, spec, opt_cfg)
    if failures:
        print(f"warning: {len(failures)} realization(s) failed", file=sys.stderr)
    _emit(rows, SWEEP_COLUMNS, args, spec.out, spec.format)
    return 0


_COMMANDS = {
    "optimize": cmd_optimize,
    "sweep": cmd_sweep,
    "flsim": cmd_flsim,
    "baselines": cmd_baselines,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.verb](args)
    except FedCranError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
