"""Command-line front end: every experiment, reproducible by seed.

Exit codes: 0 on success, 1 when a stated tolerance or verdict fails,
2 on usage or configuration errors.  Output is CSV (default) or JSON; the
JSON validates against experiment_result.schema.json shipped next to this
module, and CSV bytes are identical across reruns with the same arguments.
"""

from __future__ import annotations

import argparse
import json
import sys
from importlib import resources
from typing import List, Optional

from .experiments import (
    ExperimentResult,
    run_borel_bernstein,
    run_expand,
    run_frechet,
    run_lil,
    run_mixing,
    run_oracle,
)

EXIT_OK = 0
EXIT_TOLERANCE = 1
EXIT_USAGE = 2


def load_result_schema() -> dict:
    with resources.files("thetaexp").joinpath("experiment_result.schema.json").open() as fh:
        return json.load(fh)


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _float_list(text: str) -> List[float]:
    return [float(part) for part in text.split(",") if part.strip()]


def _int_list(text: str) -> List[int]:
    return [int(part) for part in text.split(",") if part.strip()]


def _add_common(parser: argparse.ArgumentParser, sim: bool = True) -> None:
    parser.add_argument("--m", type=_positive_int, required=True,
                        help="field parameter: theta^2 = 1/m")
    parser.add_argument("--format", choices=("csv", "json"), default="csv")
    parser.add_argument("--out", default=None, help="output file (default: stdout)")
    if sim:
        parser.add_argument("--seed", type=int, default=0)
        parser.add_argument("--bits-per-digit", type=int, default=32)
        parser.add_argument("--workers", type=int, default=None,
                            help="parallel workers (default: THETAEXP_WORKERS or all cores)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="thetaexp",
        description="theta-expansion experiments: exact digits, invariant measure, extreme-value statistics",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("expand", help="expand an exact rational and verify the identities")
    p.add_argument("x", help="exact rational 'p/q' strictly inside (0, theta); floats refused")
    p.add_argument("--max-digits", type=_positive_int, default=64)
    _add_common(p, sim=False)

    p = sub.add_parser("frechet", help="scaled-max law vs the Frechet limit")
    p.add_argument("--n-digits", type=_positive_int, required=True)
    p.add_argument("--trajectories", type=_positive_int, required=True)
    p.add_argument("--y-grid", type=_float_list, default=[0.5, 1.0, 2.0, 4.0])
    p.add_argument("--tolerance", type=float, default=0.05)
    _add_common(p)

    p = sub.add_parser("borel-bernstein", help="digit-growth exceedance counting")
    p.add_argument("--threshold", default="nlogn",
                   help="nlogn | nlogn-power:EPS | linear:C")
    p.add_argument("--n-digits", type=_positive_int, required=True)
    p.add_argument("--trajectories", type=_positive_int, required=True)
    _add_common(p)

    p = sub.add_parser("lil", help="iterated-logarithm statistic of the largest digit")
    p.add_argument("--n-digits", type=_positive_int, required=True)
    p.add_argument("--trajectories", type=_positive_int, required=True)
    _add_common(p)

    p = sub.add_parser("mixing", help="psi-mixing decay probe")
    p.add_argument("--gaps", type=_int_list, default=list(range(1, 11)))
    p.add_argument("--trajectories", type=_positive_int, required=True)
    p.add_argument("--event-digit", type=int, default=None,
                   help="digit value for the events a_1 = j and a_{1+n} = j (default: m)")
    _add_common(p)

    p = sub.add_parser("oracle", help="exact gamma(L_N < w) by cylinder enumeration")
    p.add_argument("--n-digits", type=_positive_int, required=True)
    p.add_argument("--w", type=_positive_int, required=True)
    p.add_argument("--mc-trajectories", type=_positive_int, default=None)
    _add_common(p)

    return parser


def _emit(result: ExperimentResult, fmt: str, out: Optional[str]) -> None:
    payload = result.to_csv() if fmt == "csv" else result.to_json()
    if out:
        with open(out, "w", newline="") as fh:
            fh.write(payload)
    else:
        sys.stdout.write(payload)


def _dispatch(args: argparse.Namespace) -> ExperimentResult:
    if args.command == "expand":
        return run_expand(args.x, args.m, args.max_digits)
    if args.command == "frechet":
        return run_frechet(
            args.m, args.n_digits, args.trajectories, args.seed,
            y_grid=args.y_grid, tolerance=args.tolerance,
            bits_per_digit=args.bits_per_digit, workers=args.workers,
        )
    if args.command == "borel-bernstein":
        return run_borel_bernstein(
            args.m, args.threshold, args.n_digits, args.trajectories, args.seed,
            bits_per_digit=args.bits_per_digit, workers=args.workers,
        )
    if args.command == "lil":
        return run_lil(
            args.m, args.n_digits, args.trajectories, args.seed,
            bits_per_digit=args.bits_per_digit, workers=args.workers,
        )
    if args.command == "mixing":
        return run_mixing(
            args.m, args.gaps, args.trajectories, args.seed,
            event_digit=args.event_digit,
            bits_per_digit=args.bits_per_digit, workers=args.workers,
        )
    if args.command == "oracle":
        return run_oracle(
            args.m, args.n_digits, args.w, args.mc_trajectories, args.seed,
            bits_per_digit=args.bits_per_digit, workers=args.workers,
        )
    raise AssertionError(f"unhandled command {args.command}")


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        result = _dispatch(args)
    except (ValueError, ZeroDivisionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    _emit(result, args.format, args.out)
    summary = result.summary
    for key, value in summary.items():
        print(f"# {key}: {value}", file=sys.stderr)
    if summary.get("passed") is False:
        return EXIT_TOLERANCE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
