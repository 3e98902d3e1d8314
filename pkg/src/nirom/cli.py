"""Command line front end for the experiment pipeline."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .core import StageError
from .pipeline import (
    STAGES,
    ExperimentConfig,
    default_config,
    load_config,
    run_pipeline,
    run_stage,
)


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", type=Path, default=None, help="INI experiment file")
    sub.add_argument(
        "--problem",
        choices=("burgers", "convdiff"),
        default=None,
        help="problem name when no config file is given",
    )
    sub.add_argument("--seed", type=int, default=None, help="override the base seed")
    sub.add_argument("--out", type=Path, default=None, help="override the output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nirom",
        description=(
            "Reduced-order modelling experiments: full-order solves, POD, "
            "regression surrogates for the reduced velocity, and error reports."
        ),
    )
    subparsers = parser.add_subparsers(dest="command", required=True)

    run = subparsers.add_parser("run", help="run every stage in order")
    _add_common(run)
    run.add_argument(
        "--stage",
        choices=STAGES,
        default=None,
        help="run only this stage instead of the whole chain",
    )

    for stage in STAGES:
        sub = subparsers.add_parser(stage, help=f"run the {stage} stage")
        _add_common(sub)
        if stage == "verify-dt":
            sub.add_argument(
                "positional",
                nargs="*",
                default=[],
                metavar="ARG",
                help="optional problem name and/or scheme, e.g. 'burgers rk4'",
            )

    return parser


def _config_from_args(args) -> ExperimentConfig:
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.out is not None:
        overrides["out_dir"] = args.out
    if args.config is not None:
        if args.problem is not None:
            overrides["problem"] = args.problem
        return load_config(args.config, overrides)
    problem = args.problem or "burgers"
    cfg = default_config(problem)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.out is not None:
        cfg.out_dir = Path(args.out)
    return cfg


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    command = args.command
    if command == "verify-dt" and getattr(args, "positional", None):
        extra = list(args.positional)
        if extra and extra[0] in ("burgers", "convdiff"):
            args.problem = extra.pop(0)
        if extra:
            scheme = extra.pop(0)
            if scheme not in ("rk4", "backward_euler"):
                print(f"[verify-dt] unknown scheme {scheme!r}", file=sys.stderr)
                return 2
            args.scheme_filter = scheme
        if extra:
            print(f"[verify-dt] unexpected arguments {extra}", file=sys.stderr)
            return 2

    try:
        cfg = _config_from_args(args)
        scheme_filter = getattr(args, "scheme_filter", None)
        if scheme_filter is not None:
            cfg.schemes = (scheme_filter,)
        if command == "run":
            if args.stage is not None:
                run_stage(cfg, args.stage)
            else:
                run_pipeline(cfg)
        else:
            run_stage(cfg, command)
    except StageError as exc:
        print(f"[pipeline] {exc}", file=sys.stderr)
        return 2
    except (ValueError, FileNotFoundError) as exc:
        print(f"[config] {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
