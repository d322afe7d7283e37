"""Command-line entry point.

Subcommands mirror the pipeline stages: ``generate`` synthetic
datasets, ``run`` all detectors over them, ``report`` summary tables,
``rank`` a single dataset file, and ``verify`` the acceptance suite.
Exit codes: 0 success, 1 contract error, 2 acceptance failure under
``verify``.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

from .acceptance import run_all
from .harness import (
    DETECTORS,
    ExperimentConfig,
    ResultsTable,
    cmd_generate,
    cmd_report,
    cmd_run,
    load_config,
    rank_single_dataset,
)

__all__ = ["main"]


def _apply_overrides(config: ExperimentConfig, args) -> ExperimentConfig:
    updates = {}
    if getattr(args, "seed", None) is not None:
        updates["seeds"] = tuple(args.seed)
    if getattr(args, "detectors", None):
        updates["detectors"] = tuple(d.strip() for d in args.detectors.split(",") if d.strip())
    if getattr(args, "mean_range", None):
        updates["mean_range_grid"] = tuple(
            float(v) for v in args.mean_range.split(",") if v.strip()
        )
    return dataclasses.replace(config, **updates) if updates else config


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gamerank",
        description="Benchmark for ranking strategically gaming agents.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, out_default):
        p.add_argument("--config", type=Path, default=None, help="INI config file")
        p.add_argument("--out", type=Path, default=Path(out_default), help="output directory")
        p.add_argument("--seed", type=int, nargs="+", default=None,
                       help="override the seed list")
        p.add_argument("--detectors", type=str, default=None,
                       help=f"comma list from {','.join(DETECTORS)}")
        p.add_argument("--mean-range", dest="mean_range", type=str, default=None,
                       help="comma list of confounding levels")

    g = sub.add_parser("generate", help="write dataset CSVs for the grid")
    add_common(g, "results/data")

    r = sub.add_parser("run", help="fit detectors and score rankings")
    add_common(r, "results")
    r.add_argument("--data", type=Path, default=None,
                   help="dataset directory (default: OUT/data)")
    r.add_argument("--jobs", type=int, default=1, help="parallel grid cells")

    p = sub.add_parser("report", help="aggregate results into summary CSVs")
    add_common(p, "results/report")
    p.add_argument("--results", type=Path, default=Path("results"),
                   help="directory holding curves.csv and ausc.csv")

    k = sub.add_parser("rank", help="rank a single dataset file")
    k.add_argument("--config", type=Path, default=None)
    k.add_argument("--input", type=Path, required=True, help="dataset CSV")
    k.add_argument("--detector", type=str, default="s_ipw",
                   help=f"one of {','.join(DETECTORS)}")
    k.add_argument("--seed", type=int, default=0, help="split seed")
    k.add_argument("--out", type=Path, default=Path("ranking.csv"))

    v = sub.add_parser("verify", help="run the acceptance criteria")
    v.add_argument("--config", type=Path, default=None)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "verify":
            results = run_all(verbose=True)
            failed = [r for r in results if not r.passed]
            print(f"{len(results) - len(failed)}/{len(results)} criteria passed")
            return 2 if failed else 0

        config = load_config(args.config)
        if args.command == "rank":
            ranking = rank_single_dataset(
                config, args.input, args.detector, args.seed, args.out
            )
            print(f"wrote {args.out}; most gaming-prone agent: {ranking.order[0]}")
            return 0

        config = _apply_overrides(config, args)
        if args.command == "generate":
            paths = cmd_generate(config, args.out)
            print(f"wrote {len(paths)} dataset files to {args.out}")
            return 0
        if args.command == "run":
            data_dir = args.data if args.data is not None else args.out / "data"
            table = cmd_run(config, data_dir, args.out, jobs=args.jobs)
            print(
                f"wrote {len(table.ausc_rows)} result rows to {args.out} "
                f"({len(config.mean_range_grid)} levels x {len(config.seeds)} seeds "
                f"x {len(config.detectors)} detectors)"
            )
            return 0
        if args.command == "report":
            table = ResultsTable.read_csv(args.results)
            written = cmd_report(config, table, args.out)
            print(f"wrote {len(written)} summary files to {args.out}")
            return 0
        raise ValueError(f"unknown command {args.command!r}")
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
