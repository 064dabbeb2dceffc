"""Command-line interface.

Subcommands: simulate, robustness, build-surrogate, convergence, sobol,
classify, pdf, mc-validate.  Exit codes: 0 success, 2 validation error,
3 solver non-convergence, 4 I/O error.
"""

from __future__ import annotations

import argparse
import sys

from .errors import (
    NonConvergenceError,
    NotDownwardClosedError,
    OutOfColumnError,
    OutOfDomainError,
    ScenarioError,
)
from .experiments import COMMANDS, ExperimentSpec

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NONCONVERGENCE = 3
EXIT_IO = 4


def _parse_params(text: str) -> tuple:
    pairs = []
    for chunk in text.split(","):
        chunk = chunk.strip()
        if not chunk:
            continue
        if "=" not in chunk:
            raise ScenarioError(f"bad --params entry {chunk!r}, use name=value")
        name, value = chunk.split("=", 1)
        pairs.append((name.strip(), float(value)))
    return tuple(pairs)


def _parse_w(text: str) -> tuple:
    return tuple(int(v) for v in str(text).split(","))


def _parse_depths(text: str) -> tuple:
    return tuple(float(v) for v in text.split(","))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="basinuq",
        description=(
            "1D basin compaction forward model with sparse-grid UQ and "
            "discontinuity-aligned surrogates"
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_grid=True):
        p.add_argument("--scenario", required=True, help="scenario JSON file")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, default=20170908)
        p.add_argument("--jobs", type=int, default=1,
                       help="concurrent full-model solves")
        p.add_argument("--paper-scale", action="store_true",
                       help="article-sized budgets instead of desk scale")
        p.add_argument("--cache", default=None,
                       help="shared full-model evaluation cache directory")
        if needs_grid:
            p.add_argument("--grid", default="aniso:4,4,1",
                           help="iso or aniso:w1,w2,... index-set rule")
            p.add_argument("--w", default="12",
                           help="sparse-grid level(s), comma separated")
            p.add_argument("--knots", default="gl", choices=["gl", "cc",
                                                             "cc:doubling"])
            p.add_argument("--samples", type=int, default=None,
                           help="Monte Carlo budget (desk default otherwise)")

    p = sub.add_parser("simulate", help="single forward run with snapshots")
    common(p, needs_grid=False)
    p.add_argument("--params", default="",
                   help='uncertain-parameter overrides "name=value,..."')
    p.add_argument("--snapshots", default="",
                   help="snapshot times in Ma, comma separated")

    p = sub.add_parser("robustness",
                       help="Newton solver study over the permeability blend")
    common(p, needs_grid=False)

    p = sub.add_parser("build-surrogate",
                       help="build and serialize the two-step surrogate")
    common(p)

    p = sub.add_parser("convergence",
                       help="interface-surrogate convergence study")
    common(p)
    p.add_argument("--mu-ref-w", type=int, default=None,
                   help="level of the reference grid for E_mean")

    p = sub.add_parser("sobol", help="total Sobol indices of the interfaces")
    common(p)
    p.add_argument("--case-a-scenario", default=None,
                   help="optional second scenario (two-parameter case A)")

    p = sub.add_parser("classify",
                       help="material occurrence and misclassification")
    common(p)

    p = sub.add_parser("pdf", help="porosity pdfs, CDF distances, scatter")
    common(p)
    p.add_argument("--depths", default=None,
                   help="pdf depths in m, comma separated (negative)")

    p = sub.add_parser("mc-validate",
                       help="paired full-model vs surrogate samples")
    common(p)
    return parser


def spec_from_args(args) -> ExperimentSpec:
    kw = dict(
        scenario=args.scenario,
        kind=args.command,
        out_dir=args.out,
        seed=args.seed,
        jobs=args.jobs,
        paper_scale=args.paper_scale,
        cache_dir=args.cache,
    )
    if hasattr(args, "grid"):
        kw.update(
            grid=args.grid,
            knots=args.knots,
            w=_parse_w(args.w),
            samples=args.samples,
        )
    if getattr(args, "params", ""):
        kw["params"] = _parse_params(args.params)
    if getattr(args, "snapshots", ""):
        kw["snapshots"] = _parse_depths(args.snapshots)
    if getattr(args, "depths", None):
        kw["depths"] = _parse_depths(args.depths)
    if getattr(args, "mu_ref_w", None):
        kw["mu_ref_w"] = args.mu_ref_w
    if getattr(args, "case_a_scenario", None):
        kw["scenario_case_a"] = args.case_a_scenario
    return ExperimentSpec(**kw)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        spec = spec_from_args(args)
        manifest = COMMANDS[args.command](spec)
    except (ScenarioError, OutOfDomainError, OutOfColumnError,
            NotDownwardClosedError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except NonConvergenceError as exc:
        print(f"solver did not converge: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    n_files = len(manifest.get("files", {}))
    print(
        f"{args.command}: wrote {n_files} file(s) to {spec.out_dir} "
        f"({manifest.get('full_model_solves', 0)} full-model solve(s), "
        f"{manifest['wall_time_s']:.1f} s)"
    )
    return EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
