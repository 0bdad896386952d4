"""Command-line driver: ``mixvem [options]``.

Runs a convergence study and writes the error table as CSV or JSON, with
optional log-log figures beside it.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .errors import MixVemError
from .mesh import FAMILIES
from .study import StudyConfig, emit, report_to_csv, report_to_json, run_study


def _sizes(text: str) -> tuple[int, ...]:
    return tuple(int(s) for s in text.split(",") if s.strip())


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="mixvem",
        description="Mixed virtual element convergence study on the unit square.",
    )
    p.add_argument("--problem", default="benchmark",
                   help="benchmark or patch-<k> (default: benchmark)")
    p.add_argument("--family", default="square", choices=FAMILIES + ("file",))
    p.add_argument("--sizes", type=_sizes, default=(25, 100, 400, 1600),
                   help="comma-separated squares/cells per mesh (default: 25,100,400,1600)")
    p.add_argument("--mesh", nargs="+", default=(), metavar="FILE",
                   help="mesh JSON files for --family file")
    p.add_argument("--degree", "-k", type=int, default=1)
    p.add_argument("--quad-degree", type=int, default=None,
                   help="assembly quadrature degree (default 2k+4)")
    p.add_argument("--stab", default="nu_min", choices=("nu_min", "unit", "nu_barycenter"))
    p.add_argument("--seed", type=int, default=0, help="Voronoi seed RNG")
    p.add_argument("--lloyd-iters", type=int, default=None,
                   help="override the Lloyd iteration count of lloyd-* families")
    p.add_argument("--out", default=None, help="output file (default: stdout)")
    p.add_argument("--format", default="csv", choices=("csv", "json"))
    p.add_argument("--dump-mesh", default=None, metavar="DIR",
                   help="also write each generated mesh as JSON into DIR")
    p.add_argument("--figures", action="store_true",
                   help="render convergence plots next to --out (or ./study_*.png)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = StudyConfig(
            problem=args.problem, family=args.family, sizes=args.sizes,
            degree=args.degree, quad_degree=args.quad_degree, stab=args.stab,
            seed=args.seed, mesh_files=tuple(args.mesh), lloyd_iters=args.lloyd_iters,
        )
    except ValueError as exc:
        print(f"mixvem: error: {exc}", file=sys.stderr)
        return 2

    try:
        report = run_study(config, dump_mesh=args.dump_mesh)
        if args.out:
            emit(report, args.out, args.format)
        else:
            sys.stdout.write(report_to_csv(report) if args.format == "csv"
                             else report_to_json(report) + "\n")
        if args.figures:
            from .plotting import plot_report

            prefix = Path(args.out).with_suffix("") if args.out else Path("study")
            for path in plot_report(report, prefix):
                print(f"wrote {path}", file=sys.stderr)
    except MixVemError as exc:
        print(f"mixvem: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
