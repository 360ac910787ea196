"""``timebin-lab <experiment> --config <path> [--seed N] [--out path]``."""

from __future__ import annotations

import argparse
import json
import sys
from typing import Sequence

from .config import EXPERIMENTS, SEED_MAX, ConfigError, RunConfig, parse_config, resolve
from .runners import execute, render

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_DOMAIN = 4


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="timebin-lab",
        description="Seeded simulations of HOM-based time-bin measurements.",
    )
    parser.add_argument("experiment", choices=EXPERIMENTS)
    parser.add_argument("--config", help="JSON run configuration (defaults are used when omitted)")
    parser.add_argument("--seed", type=int, help="override the config seed")
    parser.add_argument("--out", help="override output.path; format follows the extension when it is .csv or .json")
    return parser


def run(cfg: RunConfig) -> int:
    """Execute ``cfg`` and write its output; returns a process exit status."""
    for w in cfg.warnings:
        print(f"warning: {w}", file=sys.stderr)
    try:
        result = execute(cfg)
    except (ValueError, ArithmeticError) as exc:
        print(f"error: {cfg.experiment} failed: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    text = render(cfg, result)
    if cfg.output_path is None:
        sys.stdout.write(text)
        return EXIT_OK
    try:
        with open(cfg.output_path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        print(f"error: cannot write {cfg.output_path}: {exc.strerror or exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


def _apply_overrides(cfg: RunConfig, seed: int | None, out: str | None) -> None:
    if seed is not None:
        if not 0 <= seed <= SEED_MAX:
            raise ConfigError(f"--seed: must lie in [0, {SEED_MAX}], got {seed}")
        cfg.seed = seed
    if out is not None:
        cfg.output_path = out
        if out.endswith(".csv"):
            cfg.format = "csv"
        elif out.endswith(".json"):
            cfg.format = "json"
    cfg.resolved = resolve(cfg)


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.config is None:
        text = json.dumps({"experiment": args.experiment})
    else:
        try:
            with open(args.config, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            print(f"error: cannot read config {args.config}: {exc.strerror or exc}", file=sys.stderr)
            return EXIT_IO
    try:
        cfg = parse_config(text, args.experiment)
        _apply_overrides(cfg, args.seed, args.out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
