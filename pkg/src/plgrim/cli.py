"""Command-line front door: run episodes, compare planners, generate maps,
dump the default config. Exit codes: 0 success, 1 usage error, 2 runtime
error."""
from __future__ import annotations

import argparse
import sys

from .config import Config, format_defaults, parse_config_text
from .gridworld import dump_map
from .harness import (EpisodeConfig, PLANNERS, compare, comparison_to_csv,
                      generate_maze, generate_subway, metrics_to_csv,
                      run_episode)


class UsageError(Exception):
    pass


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="plgrim",
                                description="Grid-world coverage planning "
                                            "simulator and benchmark")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a single episode")
    run.add_argument("--map", help="map file path")
    run.add_argument("--map-gen", help="generator spec, e.g. maze:41x41:d0.1 "
                                       "or subway:2")
    run.add_argument("--planner", required=True)
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--steps", type=int, default=None)
    run.add_argument("--out", required=True, help="metrics CSV path")
    run.add_argument("--config", help="config file (key = value lines)")
    run.add_argument("--set", action="append", default=[], metavar="KEY=VAL",
                     help="override one config key")
    run.add_argument("--no-plot", action="store_true",
                     help="skip rendering the PNG next to the CSV")

    cmp_ = sub.add_parser("compare", help="compare planners over seeds")
    cmp_.add_argument("--planners", required=True,
                      help="comma-separated planner ids")
    cmp_.add_argument("--seeds", required=True,
                      help="range like 1..5 or comma list")
    cmp_.add_argument("--map", help="map file path")
    cmp_.add_argument("--map-gen", help="generator spec")
    cmp_.add_argument("--steps", type=int, default=None)
    cmp_.add_argument("--jobs", type=int, default=1)
    cmp_.add_argument("--out", required=True, help="comparison CSV path")
    cmp_.add_argument("--config", help="config file")
    cmp_.add_argument("--set", action="append", default=[], metavar="KEY=VAL")
    cmp_.add_argument("--no-plot", action="store_true")

    gen = sub.add_parser("genmap", help="generate a map file")
    gen.add_argument("--kind", required=True, choices=["maze", "subway"])
    gen.add_argument("--w", type=int)
    gen.add_argument("--h", type=int)
    gen.add_argument("--scale", type=int, default=1)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--hazard-density", type=float, default=0.0)
    gen.add_argument("--out", required=True)

    sub.add_parser("defaults", help="print every tunable constant")
    return p


def parse_seeds(text: str) -> list[int]:
    if ".." in text:
        lo, _, hi = text.partition("..")
        return list(range(int(lo), int(hi) + 1))
    return [int(v) for v in text.split(",") if v.strip()]


def collect_overrides(args) -> dict:
    overrides: dict[str, float] = {}
    if getattr(args, "config", None):
        with open(args.config) as f:
            overrides.update(parse_config_text(f.read()))
    for item in getattr(args, "set", []):
        if "=" not in item:
            raise UsageError(f"--set expects KEY=VALUE, got {item!r}")
        key, _, value = item.partition("=")
        overrides[key.strip()] = float(value)
    # fail fast on unknown keys
    Config().with_overrides(overrides)
    return overrides


def check_planner(name: str) -> None:
    if name not in PLANNERS:
        raise UsageError(f"unknown planner {name!r}; valid planners: "
                         f"{', '.join(sorted(PLANNERS))}")


def cmd_run(args) -> int:
    check_planner(args.planner)
    if not args.map and not args.map_gen:
        raise UsageError("run requires --map or --map-gen")
    overrides = collect_overrides(args)
    cfg = EpisodeConfig(planner=args.planner, seed=args.seed,
                        map_file=args.map, map_gen=args.map_gen,
                        max_steps=args.steps, overrides=overrides)
    metrics = run_episode(cfg)
    with open(args.out, "w", newline="") as f:
        f.write(metrics_to_csv(metrics))
    if not args.no_plot:
        from .report import plot_metrics

        plot_metrics(metrics, _png_path(args.out),
                     title=f"{args.planner} seed {args.seed}")
    return 0


def cmd_compare(args) -> int:
    planners = [p.strip() for p in args.planners.split(",") if p.strip()]
    if not planners:
        raise UsageError("no planners given")
    for name in planners:
        check_planner(name)
    seeds = parse_seeds(args.seeds)
    if not seeds:
        raise UsageError("no seeds given")
    if not args.map and not args.map_gen:
        raise UsageError("compare requires --map or --map-gen")
    overrides = collect_overrides(args)
    cfgs = [EpisodeConfig(planner=p, seed=0, map_file=args.map,
                          map_gen=args.map_gen, max_steps=args.steps,
                          overrides=overrides) for p in planners]
    rows = compare(cfgs, seeds, jobs=args.jobs)
    with open(args.out, "w", newline="") as f:
        f.write(comparison_to_csv(rows))
    if not args.no_plot:
        from .report import plot_comparison

        plot_comparison(rows, _png_path(args.out))
    return 0


def cmd_genmap(args) -> int:
    if args.kind == "maze":
        if not args.w or not args.h:
            raise UsageError("maze generation requires --w and --h")
        m = generate_maze(args.w, args.h, args.seed, args.hazard_density)
    else:
        m = generate_subway(args.scale, args.seed)
    with open(args.out, "w", newline="") as f:
        f.write(dump_map(m))
    return 0


def _png_path(csv_path: str) -> str:
    base = csv_path[:-4] if csv_path.lower().endswith(".csv") else csv_path
    return base + ".png"


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return 1 if e.code not in (0, None) else 0
    try:
        if args.command == "run":
            return cmd_run(args)
        if args.command == "compare":
            return cmd_compare(args)
        if args.command == "genmap":
            return cmd_genmap(args)
        if args.command == "defaults":
            sys.stdout.write(format_defaults())
            return 0
        raise UsageError(f"unknown command {args.command!r}")
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except (ValueError, KeyError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
