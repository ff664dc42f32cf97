"""Command line entry point: ``lae2sim <verb> --config FILE --out DIR``."""
from __future__ import annotations

import argparse
import logging
import sys

from . import experiments
from .config import ConfigError, load_config

VERBS = {
    "run-comparison": experiments.run_comparison,
    "run-topk": experiments.run_topk_sweep,
    "run-ablation": experiments.run_ablation,
    "run-containment": experiments.run_containment,
    "gen-trace": None,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lae2sim", description="Trace-driven cache replacement experiments.")
    sub = parser.add_subparsers(dest="verb", required=True)
    for verb in VERBS:
        p = sub.add_parser(verb)
        p.add_argument("--config", required=True, help="key=value experiment config file")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--threads", type=int, default=1, help="worker processes for independent cells")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config, seed=args.seed)
    except (ConfigError, OSError) as exc:
        print(f"lae2sim: {exc}", file=sys.stderr)
        return 1
    if args.verb == "gen-trace":
        outcome = experiments.gen_trace(cfg, args.out)
    else:
        outcome = VERBS[args.verb](cfg, args.out, threads=max(1, args.threads))
    for path in outcome.files:
        print(path)
    for key, err in outcome.failures:
        print(f"cell {key} failed: {err}", file=sys.stderr)
    return 0 if outcome.ok else 2


if __name__ == "__main__":
    sys.exit(main())
