"""Command line entry point.

Usage::

    stochmcf simulate --config run.yaml --out results/ --frames
    stochmcf contraction --config run.yaml --seed 3

Exit codes: 0 success (including an early stopping-time trigger), 2 invalid
configuration, 3 numerical failure during the run.
"""

import argparse
import logging
import sys

from .config import EXPERIMENTS, RunConfig, from_mapping, load_config, serialize
from .errors import ConfigError, StochMCFError
from .experiments import run_experiment

log = logging.getLogger("stochmcf")


def build_parser():
    ap = argparse.ArgumentParser(prog="stochmcf", description="Stochastic curve-shortening flow in a tubular chart.")
    ap.add_argument("command", choices=EXPERIMENTS + ("show-config",))
    ap.add_argument("--config", help="YAML configuration file (defaults are used if omitted)")
    ap.add_argument("--seed", type=int, help="override solver.seed")
    ap.add_argument("--out", help="output directory (overrides output.dir)")
    ap.add_argument("--frames", action="store_true", help="write SVG frames of the snapshots")
    ap.add_argument("--json", action="store_true", help="mirror tables as JSON")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def resolve_config(args):
    cfg = load_config(args.config) if args.config else from_mapping({})
    data = cfg.to_dict()
    data["experiment"] = args.command if args.command != "show-config" else cfg.experiment
    if args.seed is not None:
        data["solver"]["seed"] = args.seed
    if args.out:
        data["output"]["dir"] = args.out
    if args.frames:
        data["output"]["frames"] = True
    if args.json:
        data["output"]["json"] = True
    return from_mapping(data)


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = resolve_config(args)
    except ConfigError as exc:
        for e in exc.errors:
            print(f"config error: {e}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    if args.command == "show-config":
        sys.stdout.write(serialize(cfg))
        return 0
    try:
        res = run_experiment(cfg)
    except StochMCFError as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return 3
    for k, v in res.summary.items():
        print(f"{k}: {v}")
    for f in res.files:
        log.info("wrote %s", f)
    return 0


if __name__ == "__main__":
    sys.exit(main())
