"""Command-line entry point: ``qlfc <command> [options]``.

Exit codes: 0 success, 2 usage error, 3 invalid config, 4 missing input
artifact, 5 any other pipeline failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import pipeline
from .errors import ArtifactError, ConfigError, QlfcError

EXIT_USAGE, EXIT_CONFIG, EXIT_ARTIFACT, EXIT_FAILURE = 2, 3, 4, 5


def cmd_gen_data(args) -> str:
    cfg = pipeline.resolve_config(args.config, seed=args.seed)
    memory = pipeline.gen_data(cfg, Path(args.out))
    table = ", ".join(f"{k}:({g.Kp:g},{g.Ki:g})" for k, g in enumerate(memory.table.entries))
    return f"gen-data: {len(memory.events)} events, {len(memory.samples)} samples, table [{table}] -> {args.out}"


def cmd_train(args) -> str:
    cfg = pipeline.resolve_config(args.config, args.data, args.seed)
    res = pipeline.train_stage(cfg, args.data, Path(args.out))
    return (f"train: {len(res.train_set.events)} train / {len(res.test_set.events)} test events,"
            f" loss {res.history[0]:.4f} -> {min(res.history):.4f} -> {args.out}")


def cmd_eval(args) -> str:
    cfg = pipeline.resolve_config(args.config, args.data, args.seed)
    doc = pipeline.eval_stage(cfg, args.data, args.model, Path(args.out))
    return f"eval: exact accuracy {doc['exact_accuracy']:.4f} on {doc['n_test_samples']} windows"


def cmd_sweep(args) -> str:
    cfg = pipeline.resolve_config(args.config, args.data, args.seed)
    reports, grids, exact = pipeline.sweep_stage(cfg, args.data, args.model, Path(args.out))
    parts = " ".join(f"{r.shots_config}:{r.mean:.3f}" for r in reports)
    green = sum(g.row(reports[-1].shots_config).all() for g in grids)
    return f"sweep-shots: exact {exact:.3f} mean {parts}; {green}/{len(grids)} events all-true at {reports[-1].shots_config} shots"


def cmd_simulate(args) -> str:
    cfg = pipeline.resolve_config(args.config, args.data, args.seed)
    results = pipeline.simulate_stage(cfg, args.data, args.model, Path(args.out), args.event)
    settled = sum(r.result.metrics.settled for r in results)
    return f"simulate: {len(results)} closed-loop runs, {settled} settled -> {args.out}"


def cmd_compare(args) -> str:
    cfg = pipeline.resolve_config(args.config, args.data, args.seed)
    comps = pipeline.compare_stage(cfg, args.data, Path(args.out), args.event)
    ok = sum(c.deltas["ISE"] >= 0 for c in comps)
    return f"compare: {len(comps)} events, optimal ISE no worse in {ok} -> {args.out}"


def cmd_stats(args) -> str:
    cfg = pipeline.resolve_config(args.config, seed=args.seed)
    s = pipeline.stats_stage(args.inp, cfg["deploy"]["pm_offset"])
    return (f"stats: {s.n_runs} runs, f min/mean/max {s.freq_min:.4f}/{s.freq_mean:.4f}/{s.freq_max:.4f} Hz,"
            f" P_m {s.pm_min:.3f}/{s.pm_mean:.3f}/{s.pm_max:.3f} pu")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qlfc", description="Quantum-classifier PI gain scheduling for frequency control.")
    ap.add_argument("--seed", type=int, default=None, help="override the config seed")
    sub = ap.add_subparsers(dest="command", required=True)

    def add(name, func, help_, data=False, model=False, event=None):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", type=Path, default=None,
                       help="JSON config (default: <data>/config.json, else built-in defaults)")
        if data:
            p.add_argument("--data", type=Path, default=Path("data"))
        if model:
            p.add_argument("--model", type=Path, default=Path("model"))
        if event is not None:
            p.add_argument("--event", default=event)
        p.set_defaults(func=func)
        return p

    add("gen-data", cmd_gen_data, "expert search and replay memory").add_argument("--out", type=Path, default=Path("data"))
    add("train", cmd_train, "fit the classifier", data=True).add_argument("--out", type=Path, default=Path("model"))
    add("eval", cmd_eval, "exact test accuracy", data=True, model=True).add_argument("--out", type=Path, default=Path("out"))
    add("sweep-shots", cmd_sweep, "shot-noise sweep and event heatmap", data=True, model=True).add_argument(
        "--out", type=Path, default=Path("out"))
    add("simulate", cmd_simulate, "closed-loop runs (event id or 'test')", data=True, model=True,
        event="test").add_argument("--out", type=Path, default=Path("out"))
    add("compare", cmd_compare, "optimal vs suboptimal static gains (event id or 'all')", data=True,
        event="all").add_argument("--out", type=Path, default=Path("out"))
    add("stats", cmd_stats, "fleet statistics over exported closed-loop series").add_argument(
        "--in", dest="inp", type=Path, default=Path("out"))
    return ap


def _valid_event(value: str) -> bool:
    return value in ("test", "all") or value.lstrip("-").isdigit()


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else 0
    if args.seed is not None and args.seed < 0:
        print("error: --seed must be nonnegative", file=sys.stderr)
        return EXIT_USAGE
    if getattr(args, "event", None) is not None and not _valid_event(str(args.event)):
        print(f"error: --event must be an integer, 'test' or 'all', got {args.event!r}", file=sys.stderr)
        return EXIT_USAGE
    try:
        print(args.func(args))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ArtifactError as exc:
        print(f"missing artifact: {exc}", file=sys.stderr)
        return EXIT_ARTIFACT
    except QlfcError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    return 0


if __name__ == "__main__":
    sys.exit(main())
