"""Command-line entry point (``sol-bench`` / ``python -m sparse_online``).

Exit status: 0 success, 2 bad specification, 3 data or I/O error,
4 numeric failure.
"""
from __future__ import annotations

import argparse
import logging
import sys

import numpy as np

from . import bench
from .bench import AlgoParams, ExperimentSpec, SpecError, Task
from .data_io import DataError
from .learners import ConfigError

EXIT_OK, EXIT_SPEC, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4

log = logging.getLogger("sparse_online")

_SCHEDULES = {"const": "const", "eta-lambda": "eta-lambda", "inv-t": "inv-t"}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_SPEC, f"{self.prog}: error: {message}\n")


def _floats(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _ints(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _add_data_args(p: argparse.ArgumentParser, test_required: bool = False) -> None:
    p.add_argument("--train", help="training set (LIBSVM format)")
    p.add_argument("--test", required=False, help="test set (LIBSVM format)")
    p.add_argument("--synth-spec", help="generate the data from a synthetic spec (JSON) instead")
    p.add_argument("--dim", type=int, help="ambient feature dimension (default: scanned from data)")


def _add_algo_args(p: argparse.ArgumentParser, many: bool = False) -> None:
    names = sorted(bench.ALGORITHMS)
    if many:
        p.add_argument("--algo", required=True, type=lambda s: s.split(","),
                       help=f"comma-separated subset of: {', '.join(names)}")
    else:
        p.add_argument("--algo", required=True, choices=names)
    p.add_argument("--eta", type=float, default=1.0)
    p.add_argument("--r", type=float, default=1.0, help="second-order damping")
    p.add_argument("--cpos", type=float, default=1.0)
    p.add_argument("--cneg", type=float, default=1.0)
    p.add_argument("--schedule", choices=sorted(_SCHEDULES))
    p.add_argument("--delta", type=float, default=1.0, help="adaptive-method damping")
    p.add_argument("--k-period", type=int, default=10, help="STG truncation period")
    p.add_argument("--tau-pos", type=float, default=1.0, help="PAUM positive margin")
    p.add_argument("--tau-neg", type=float, default=0.0, help="PAUM negative margin")
    p.add_argument("--full-dim-cap", type=int, help="dimension cap for full-matrix SSOL")


def _add_run_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0, help="first seed")
    p.add_argument("--seeds", type=int, default=5, help="number of permuted runs")
    p.add_argument("--passes", type=int, default=1)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", default="-", help="output file ('-' for stdout)")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--deterministic", action="store_true",
                   help="omit wall-clock columns so reruns are byte-identical")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sol-bench", description="Sparse online learning benchmarks")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("train", help="train one algorithm and evaluate on a test set")
    _add_data_args(p)
    _add_algo_args(p)
    p.add_argument("--lambda", dest="lam", type=float, default=0.0)
    _add_run_args(p)
    p.set_defaults(seeds=1)

    p = sub.add_parser("sweep", help="error vs sparsity over a lambda grid")
    _add_data_args(p)
    _add_algo_args(p, many=True)
    p.add_argument("--lambda-grid", type=_floats, required=True)
    _add_run_args(p)

    p = sub.add_parser("grid-search", help="k-fold CV over eta and the secondary parameter (lambda=0)")
    _add_data_args(p)
    _add_algo_args(p, many=True)
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--eta-grid", type=_floats, help="default: 2^-1 .. 2^9")
    p.add_argument("--param-grid", type=_floats, help="default: 2^-5 .. 2^5")
    _add_run_args(p)
    p.set_defaults(seeds=1)

    p = sub.add_parser("synth", help="write a synthetic dataset in LIBSVM format")
    p.add_argument("--spec", required=True, help="synthetic spec (JSON)")
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("regret", help="empirical regret against an offline comparator")
    _add_data_args(p)
    _add_algo_args(p, many=True)
    p.add_argument("--lambda", dest="lam", type=float, default=0.0)
    p.add_argument("--checkpoints", type=_ints, required=True)
    p.add_argument("--comparator", choices=("lp", "subgradient"), default="lp",
                   help="exact LP solve or normalised-step subgradient descent")
    p.add_argument("--comparator-epochs", type=int, default=500,
                   help="iterations for the subgradient comparator")
    _add_run_args(p)
    p.set_defaults(seeds=1)
    return parser


def _params(args) -> AlgoParams:
    return AlgoParams(
        eta=args.eta, lam=getattr(args, "lam", 0.0), r=args.r, c_pos=args.cpos, c_neg=args.cneg,
        schedule=_SCHEDULES.get(args.schedule) if args.schedule else None, delta=args.delta,
        k_period=args.k_period, tau_pos=args.tau_pos, tau_neg=args.tau_neg,
    )


def _spec(args, task: Task) -> ExperimentSpec:
    synthetic = bench.load_synthetic_spec(args.synth_spec) if args.synth_spec else None
    algos = args.algo if isinstance(args.algo, list) else [args.algo]
    lam_grid = getattr(args, "lambda_grid", None) or [getattr(args, "lam", 0.0)]
    return ExperimentSpec(
        task=task, algorithms=algos, params=_params(args), train_path=args.train,
        test_path=args.test, synthetic=synthetic, ambient_dim=args.dim, lambda_grid=lam_grid,
        seeds=args.seeds, seed=args.seed, folds=getattr(args, "folds", 5), passes=args.passes,
        checkpoints=getattr(args, "checkpoints", None) or [], output=args.out, fmt=args.format,
        deterministic=args.deterministic, workers=args.workers, full_dim_cap=args.full_dim_cap,
        comparator_epochs=getattr(args, "comparator_epochs", 500),
        comparator_method=getattr(args, "comparator", "lp"),
    )


def run(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:  # usage errors and --help
        return exc.code if isinstance(exc.code, int) else EXIT_SPEC
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        with np.errstate(over="raise", invalid="raise", divide="raise"):
            if args.command == "synth":
                spec = bench.load_synthetic_spec(args.spec)
                bench.run_synth(spec, args.out)
            elif args.command == "train":
                bench.run_sweep(_spec(args, Task.TRAIN_EVAL))
            elif args.command == "sweep":
                bench.run_sweep(_spec(args, Task.SPARSITY_SWEEP))
            elif args.command == "grid-search":
                kw = {}
                if args.eta_grid:
                    kw["eta_grid"] = args.eta_grid
                if args.param_grid:
                    kw["secondary_grid"] = args.param_grid
                bench.run_grid_search(_spec(args, Task.GRID_SEARCH), **kw)
            elif args.command == "regret":
                bench.run_regret(_spec(args, Task.REGRET))
    except (SpecError, ConfigError) as exc:
        print(f"sol-bench: spec error: {exc}", file=sys.stderr)
        return EXIT_SPEC
    except (DataError, OSError) as exc:
        print(f"sol-bench: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (FloatingPointError, ArithmeticError) as exc:
        print(f"sol-bench: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
