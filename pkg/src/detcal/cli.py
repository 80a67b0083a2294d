"""Command-line interface.

Three subcommands: ``evaluate`` runs the metric battery over a detection
file and an annotation file, ``synth`` runs the synthetic convergence
benchmark, and ``sweep`` repeats evaluation across score thresholds.
Exit codes: 0 on success, 1 on any validation problem (bad flags, bad
records, bad values), 2 on I/O failures.
"""

from __future__ import annotations

import argparse
import sys
from typing import Sequence

from . import synth
from .coco_io import load_dataset
from .links import parse_link
from .report import (ReportConfig, evaluate_report, report_to_csv,
                     report_to_json, sweep_gamma, sweep_to_csv, sweep_to_json)


class _UsageError(Exception):
    """Raised instead of SystemExit so main() can map bad usage to exit 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        raise _UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def _positive_float(text: str) -> float:
    value = float(text)
    if not value > 0.0:
        raise argparse.ArgumentTypeError(f"must be positive, got {text!r}")
    return value


def _gamma(text: str) -> float:
    value = float(text)
    if not 0.0 <= value < 1.0:
        raise argparse.ArgumentTypeError(f"must lie in [0, 1), got {text!r}")
    return value


def _seed(text: str) -> int:
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"must be non-negative, got {text!r}")
    return value


def _bandwidth(text: str) -> float | None:
    if text == "auto":
        return None
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"must be 'auto' or a positive number, got {text!r}") from None
    if not value > 0.0:
        raise argparse.ArgumentTypeError(f"must be 'auto' or a positive number, got {text!r}")
    return value


def _link(text: str) -> object:
    try:
        return parse_link(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _int_list(text: str) -> list[int]:
    try:
        values = [int(part) for part in text.split(",") if part != ""]
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"must be a comma-separated list of integers, got {text!r}") from None
    if not values:
        raise argparse.ArgumentTypeError("list must be non-empty")
    return values


def _gamma_list(text: str) -> list[float]:
    try:
        values = [float(part) for part in text.split(",") if part != ""]
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"must be a comma-separated list of numbers, got {text!r}") from None
    if not values:
        raise argparse.ArgumentTypeError("list must be non-empty")
    for value in values:
        if not 0.0 <= value < 1.0:
            raise argparse.ArgumentTypeError(f"every threshold must lie in [0, 1), got {value!r}")
    return values


def _estimator_list(text: str) -> list[str]:
    names = [part for part in text.split(",") if part != ""]
    if not names:
        raise argparse.ArgumentTypeError("list must be non-empty")
    for name in names:
        if name not in synth.KNOWN_ESTIMATORS:
            raise argparse.ArgumentTypeError(
                f"unknown estimator {name!r}; choose from {', '.join(synth.KNOWN_ESTIMATORS)}")
    return names


def _add_evaluate_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--detections", required=True,
                        help="path to the detections JSON array")
    parser.add_argument("--ground-truth", required=True,
                        help="path to the COCO-schema annotation JSON")
    parser.add_argument("--link", type=_link, default=parse_link("threshold:0.5"),
                        help="correctness link: identity, hinge, threshold:<b>, ramp:<a>:<b>")
    parser.add_argument("--score-threshold", type=_gamma, default=0.5, metavar="GAMMA",
                        help="drop detections scoring below this (default 0.5)")
    parser.add_argument("--bandwidth", type=_bandwidth, default=None, metavar="AUTO|B",
                        help="kernel bandwidth; 'auto' selects by leave-one-out likelihood")
    parser.add_argument("--bins", type=int, default=20, metavar="M",
                        help="bin count for the pooled binned metric (default 20)")
    parser.add_argument("--out", default=None, help="output path (default: stdout)")
    parser.add_argument("--format", choices=("json", "csv"), default="json",
                        help="output format (default json)")
    parser.add_argument("--shared-bandwidth", action="store_true",
                        help="select one bandwidth from the pooled scores instead of per class")
    parser.add_argument("--seed", type=_seed, default=0,
                        help="seed for any subsampling (default 0)")
    parser.add_argument("--max-samples", type=int, default=None, metavar="N",
                        help="cap per-class sample count by seeded subsampling")
    parser.add_argument("--sequential", action="store_true",
                        help="single-threaded, bit-reproducible evaluation")


def _report_config(args: argparse.Namespace) -> ReportConfig:
    if args.bins < 1:
        raise ValueError(f"--bins must be at least 1, got {args.bins}")
    if args.max_samples is not None and args.max_samples < 2:
        raise ValueError(f"--max-samples must be at least 2, got {args.max_samples}")
    return ReportConfig(
        link=args.link,
        score_threshold=args.score_threshold,
        bandwidth=args.bandwidth,
        shared_bandwidth=args.shared_bandwidth,
        dece_bins=args.bins,
        max_samples=args.max_samples,
        seed=args.seed,
        mode="sequential" if args.sequential else "parallel",
    )


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8") as handle:
            handle.write(text)


def _cmd_evaluate(args: argparse.Namespace) -> int:
    bundle = load_dataset(args.detections, args.ground_truth)
    report = evaluate_report(bundle.detections, bundle.ground_truth,
                             bundle.categories, _report_config(args))
    text = report_to_json(report) if args.format == "json" else report_to_csv(report)
    _emit(text, args.out)
    return 0


def _cmd_sweep(args: argparse.Namespace) -> int:
    bundle = load_dataset(args.detections, args.ground_truth)
    rows = sweep_gamma(bundle.detections, bundle.ground_truth, bundle.categories,
                       args.gammas, _report_config(args))
    text = sweep_to_json(rows) if args.format == "json" else sweep_to_csv(rows)
    _emit(text, args.out)
    return 0


def _cmd_synth(args: argparse.Namespace) -> int:
    if any(n < 2 for n in args.n):
        raise ValueError("--n values must be at least 2")
    if args.seeds < 1:
        raise ValueError(f"--seeds must be at least 1, got {args.seeds}")
    seeds = range(args.seed, args.seed + args.seeds)
    rows = synth.convergence_experiment(
        args.n, seeds, tuple(args.estimators), args.t1, args.t2,
        mode="sequential" if args.sequential else "parallel",
    )
    text = synth.rows_to_csv(rows) if args.format == "csv" else synth.rows_to_json(rows)
    _emit(text, args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="detcal",
                     description="Calibration evaluation for object detectors.")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p_eval = sub.add_parser("evaluate", help="run the metric battery on a dataset")
    _add_evaluate_flags(p_eval)
    p_eval.set_defaults(func=_cmd_evaluate)

    p_synth = sub.add_parser("synth", help="run the synthetic convergence benchmark")
    p_synth.add_argument("--n", type=_int_list, required=True,
                         help="sample size, or a comma-separated list of sizes")
    p_synth.add_argument("--t1", type=_positive_float, default=0.6,
                         help="generating temperature (default 0.6)")
    p_synth.add_argument("--t2", type=_positive_float, default=0.6,
                         help="reported-score temperature (default 0.6)")
    p_synth.add_argument("--seeds", type=int, default=5, metavar="K",
                         help="number of seeds, used as seed..seed+K-1 (default 5)")
    p_synth.add_argument("--seed", type=_seed, default=0,
                         help="first seed of the run (default 0)")
    p_synth.add_argument("--estimators", type=_estimator_list,
                         default=list(("kde_threshold", "dece")),
                         help="comma-separated subset of: " + ", ".join(synth.KNOWN_ESTIMATORS))
    p_synth.add_argument("--out", default=None, help="output path (default: stdout)")
    p_synth.add_argument("--format", choices=("json", "csv"), default="csv",
                         help="output format (default csv)")
    p_synth.add_argument("--sequential", action="store_true",
                         help="single-threaded, bit-reproducible run")
    p_synth.set_defaults(func=_cmd_synth)

    p_sweep = sub.add_parser("sweep", help="evaluate across score thresholds")
    p_sweep.add_argument("--gammas", type=_gamma_list, required=True,
                         help="comma-separated score thresholds, each in [0, 1)")
    _add_evaluate_flags(p_sweep)
    p_sweep.set_defaults(func=_cmd_sweep)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help exits through argparse
        return int(exc.code or 0)
    try:
        return args.func(args)
    except ValueError as exc:  # includes DatasetError and json decoding
        print(f"detcal: error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"detcal: i/o error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
