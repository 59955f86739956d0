"""Command-line entry point: ``tdrcap <command> [--config FILE] ...``.

Exit codes: 0 success, 2 configuration error, 3 infeasible search,
4 numerical failures on more than 10% of the evaluated points.
"""

from __future__ import annotations

import argparse
import logging
import sys

from . import experiments as ex

EXIT_OK, EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_NUMERICAL = 0, 2, 3, 4
FAILURE_BUDGET = 0.10

COMMANDS = {
    "surface": (ex.cmd_surface, ex.SURFACE_HEADER, "model and Monte Carlo NMSE over a (d, eta) grid"),
    "robust-params": (ex.cmd_robust_params, ex.ROBUST_PARAMS_HEADER,
                      "NMSE distribution over random parameters and masks"),
    "robust-task": (ex.cmd_robust_task, ex.ROBUST_TASK_HEADER,
                    "NMSE of optimized pools on random misspecified tasks"),
    "optimize": (ex.cmd_optimize, ex.OPTIMIZE_HEADER, "grid search for maximal capacity"),
    "capacity": (ex.cmd_capacity, ex.CAPACITY_HEADER, "capacity at a single parameter point"),
}

log = logging.getLogger("tdrcap")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tdrcap", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, _, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="TOML experiment configuration")
        p.add_argument("--seed", type=int, help="master seed (overrides the config)")
        p.add_argument("--out", help="CSV output path (default: stdout)")
        p.add_argument("--workers", type=int, help="worker processes")
        p.add_argument("--mc", action=argparse.BooleanOptionalAction, default=None,
                       help="run (or skip) the Monte Carlo simulations")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    fn, header, _ = COMMANDS[args.command]

    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.workers is not None:
        overrides["workers"] = args.workers
    if args.out is not None:
        overrides["out"] = args.out
    try:
        cfg = ex.load_config(args.command, args.config, overrides)
    except ex.ConfigError as exc:
        print(f"tdrcap: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    log.info("running %s with seed %d on %d worker(s)", args.command, cfg.seed, cfg.workers)
    try:
        if args.command in ("surface", "capacity"):
            rows = fn(cfg, use_mc=args.mc)
        else:
            rows = fn(cfg)
    except ex.ConfigError as exc:
        print(f"tdrcap: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    ex.write_csv(rows, header, cfg.out)

    if args.command in ("optimize", "robust-task") and any(
        r.get("flag") == "infeasible" for r in rows
    ):
        print("tdrcap: no stable grid point for at least one configuration", file=sys.stderr)
        return EXIT_INFEASIBLE
    failed = ex.numerical_failure_fraction(rows)
    if failed > FAILURE_BUDGET:
        print(f"tdrcap: numerical failures on {failed:.0%} of the points", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
