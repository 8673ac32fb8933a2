"""Command line: gen, run, sweep, summarize."""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import bench
from .network import QuantumNetwork, waxman_generate
from .policies import KINDS, PolicyConfig
from .simulator import run_episode


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _parse_values(param: str, raw: str) -> list:
    items = [x.strip() for x in raw.split(",") if x.strip()]
    if param == "dist":
        return items
    if param == "nodes":
        return [int(x) for x in items]
    return [float(x) for x in items]


def cmd_gen(args) -> int:
    net = waxman_generate(args.nodes, (args.width, args.height), seed=args.seed)
    _emit(net.dumps() + "\n", args.out)
    return 0


def cmd_run(args) -> int:
    if args.network:
        net = QuantumNetwork.load(args.network)
    else:
        net = waxman_generate(args.nodes, seed=args.seed)
    if (args.s is None) != (args.d is None):
        print("error: give both --s and --d, or neither", file=sys.stderr)
        return 2
    if args.s is None:
        pairs = bench.band_pairs(net, (args.band_lo, args.band_hi))
        if not pairs:
            print("error: no node pair within the distance band", file=sys.stderr)
            return 2
        s, d = pairs[int(np.random.default_rng(args.seed).integers(len(pairs)))]
    else:
        s, d = args.s, args.d
    res = run_episode(net, PolicyConfig(args.policy, k=args.k), s, d, args.seed,
                      record_estimates=args.estimates)
    _emit(res.trace_text(), args.out)
    status = f"latency={res.latency:.9g}" if res.delivered else "censored"
    print(f"s={s} d={d} {status} swaps={res.swaps_started} digest={res.digest()[:16]}", file=sys.stderr)
    return 0


def cmd_sweep(args) -> int:
    spec = bench.ExperimentSpec.load(args.spec) if args.spec else bench.preset(args.preset)
    changes = {}
    if args.param:
        changes["param"] = args.param
        if not args.values:
            print("error: --param needs --values", file=sys.stderr)
            return 2
    if args.values:
        changes["values"] = _parse_values(args.param or spec.param, args.values)
    if args.policy:
        changes["policies"] = args.policy
    for name in ("reps", "episodes"):
        if getattr(args, name) is not None:
            changes[name] = getattr(args, name)
    if args.seed is not None:
        changes["master_seed"] = args.seed
    spec = replace(spec, **changes)
    try:
        spec.validate()
    except ValueError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    rows = bench.run_sweep(spec, workers=args.workers)
    _emit(bench.rows_to_csv(rows), args.out)
    return 0


def cmd_summarize(args) -> int:
    text = Path(args.csv).read_text() if args.csv != "-" else sys.stdin.read()
    _emit(bench.format_summary(bench.summarize(bench.rows_from_csv(text))), args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="epdist", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="write a random Waxman topology as JSON")
    g.add_argument("--nodes", type=int, default=40)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--width", type=float, default=100.0)
    g.add_argument("--height", type=float, default=100.0)
    g.add_argument("--out")
    g.set_defaults(func=cmd_gen)

    r = sub.add_parser("run", help="simulate one episode and print its trace")
    r.add_argument("--network", help="topology JSON; a Waxman graph is generated when omitted")
    r.add_argument("--nodes", type=int, default=40)
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--policy", choices=KINDS, default="greedy-sp")
    r.add_argument("--k", type=int, default=3)
    r.add_argument("--s", type=int)
    r.add_argument("--d", type=int)
    r.add_argument("--band-lo", type=float, default=20.0)
    r.add_argument("--band-hi", type=float, default=50.0)
    r.add_argument("--estimates", action="store_true", help="record candidate L values in the trace")
    r.add_argument("--out")
    r.set_defaults(func=cmd_run)

    w = sub.add_parser("sweep", help="run an experiment and write CSV")
    w.add_argument("spec", nargs="?", help="ExperimentSpec JSON file")
    w.add_argument("--preset", choices=("default", "small"), default="default")
    w.add_argument("--param", choices=bench.PARAMS)
    w.add_argument("--values", help="comma separated; bands as lo-hi")
    w.add_argument("--policy", action="append", choices=KINDS)
    w.add_argument("--reps", type=int)
    w.add_argument("--episodes", type=int)
    w.add_argument("--seed", type=int)
    w.add_argument("--workers", type=int, default=1)
    w.add_argument("--out")
    w.set_defaults(func=cmd_sweep)

    m = sub.add_parser("summarize", help="adaptive vs static reductions from a sweep CSV")
    m.add_argument("csv", help="CSV path or - for stdin")
    m.add_argument("--out")
    m.set_defaults(func=cmd_summarize)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
