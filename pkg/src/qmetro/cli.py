"""Command-line front end: ``qmetro advise|sweep|validate|estimate``.

Exit status is 0 on success, 2 for invalid input and 3 for numerically
degenerate configurations.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import warnings
from typing import Any, Sequence

import numpy as np

from .advisor import (
    SCHEMA_VERSION,
    VALIDATE_COLUMNS,
    AdviceRequest,
    advise,
    build_protocol,
    rows_to_csv,
    sweep,
    sweep_to_csv,
    validate,
)
from .channels import ChannelFamily, parse_channel_spec
from .errors import DegenerateSpectatorError, IllConditionedError, QmetroError
from .measurement import estimation_experiment

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_DEGENERATE = 3


class InputError(QmetroError):
    pass


def _load_json(value: str) -> Any:
    """Parse a JSON file path, or the argument itself when it is not a file."""
    if os.path.exists(value):
        with open(value, encoding="utf-8") as fh:
            text = fh.read()
    else:
        text = value
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"cannot read JSON from {value!r}: {exc}") from exc


def _float_list(text: str) -> list[float]:
    try:
        values = [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise InputError(f"expected a comma-separated list of numbers, got {text!r}") from exc
    if not values:
        raise InputError("value list is empty")
    return values


def _request(args: argparse.Namespace) -> AdviceRequest:
    channel = parse_channel_spec(_load_json(args.channel))
    if args.spectators is None:
        specs: list[ChannelFamily] = [ChannelFamily.identity()] * (args.n - 1)
    else:
        raw = _load_json(args.spectators)
        if not isinstance(raw, list):
            raise InputError("spectators must be a JSON list of channel specs")
        specs = [parse_channel_spec(obj) for obj in raw]
    return AdviceRequest(channel, tuple(specs), args.n, args.r, args.lambda0)


def _emit(args: argparse.Namespace, text: str) -> None:
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
        if not text.endswith("\n"):
            sys.stdout.write("\n")


def _dumps(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def cmd_advise(args: argparse.Namespace) -> int:
    report = advise(*_unpack(_request(args)))
    if args.format == "csv":
        _emit(args, rows_to_csv([report.scalar_row()]))
    else:
        _emit(args, report.to_json() + "\n")
    return EXIT_OK


def _unpack(req: AdviceRequest) -> tuple:
    return req.channel, req.spectators, req.n, req.r, req.lambda0


def cmd_sweep(args: argparse.Namespace) -> int:
    rows = sweep(_request(args), args.axis, _float_list(args.values))
    if args.format == "json":
        _emit(args, _dumps({"schema": SCHEMA_VERSION, "axis": args.axis, "rows": rows}))
    else:
        _emit(args, sweep_to_csv(rows))
    return EXIT_OK


def cmd_validate(args: argparse.Namespace) -> int:
    spec, _ = build_protocol(_request(args))
    table = validate(spec, _float_list(args.r_values))
    if args.format == "csv":
        _emit(args, rows_to_csv(list(table.rows), VALIDATE_COLUMNS))
    else:
        _emit(args, _dumps(table.to_dict()))
    return EXIT_OK


def cmd_estimate(args: argparse.Namespace) -> int:
    req = _request(args)
    report = advise(*_unpack(req))
    spec, _ = build_protocol(req)
    if report.recommendation.value == "SQSC":
        spec = spec.replace(n=1, r0=report.chosen_r0, c=report.chosen_c, spectators=())
    scheme = report.measurement
    true_lambda = req.channel.lam if args.true_lambda is None else args.true_lambda
    result = estimation_experiment(spec, scheme, true_lambda, args.shots, args.seed, args.batches)
    row = {
        "protocol": report.recommendation.value,
        "true_lambda": true_lambda,
        "lambda_hat": result.lambda_hat,
        "variance": result.variance,
        "variance_times_shots": result.variance_times_shots,
        "standard_error": result.standard_error,
        "fisher_per_shot": result.fisher_per_shot,
        "crb": result.crb if np.isfinite(result.crb) else None,
        "shots": result.shots,
        "batches": result.batches,
        "non_identifiable": result.non_identifiable,
    }
    if args.format == "csv":
        _emit(args, rows_to_csv([row]))
    else:
        _emit(args, _dumps({"schema": SCHEMA_VERSION, **row}))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="write output to this path instead of stdout")
    common.add_argument("--format", choices=("json", "csv"), default=None)
    common.add_argument("--channel", required=True, help="probe channel spec (JSON file or literal)")
    common.add_argument(
        "--spectators", help="JSON list of spectator channel specs (default: clean spectators)"
    )
    common.add_argument("-n", type=int, required=True, help="number of qubits")
    common.add_argument("-r", type=float, required=True, help="initial purity")
    common.add_argument("--lambda0", type=float, help="reference value for a local protocol")

    parser = argparse.ArgumentParser(prog="qmetro", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("advise", parents=[common], help="recommend a protocol")
    p.set_defaults(func=cmd_advise, default_format="json")

    p = sub.add_parser("sweep", parents=[common], help="advise over a range of one input")
    p.add_argument("--axis", choices=("n", "r", "noise"), required=True)
    p.add_argument("--values", required=True, help="comma-separated values")
    p.set_defaults(func=cmd_sweep, default_format="csv")

    p = sub.add_parser("validate", parents=[common], help="compare closed forms with the exact oracle")
    p.add_argument("--r-values", required=True, help="comma-separated purities")
    p.set_defaults(func=cmd_validate, default_format="json")

    p = sub.add_parser("estimate", parents=[common], help="Monte-Carlo maximum-likelihood experiment")
    p.add_argument("--shots", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--batches", type=int, default=50)
    p.add_argument("--true-lambda", type=float, help="parameter used to sample (default: channel lambda)")
    p.set_defaults(func=cmd_estimate, default_format="json")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.format is None:
        args.format = args.default_format
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            return args.func(args)
    except (DegenerateSpectatorError, IllConditionedError) as exc:
        print(f"qmetro: numerical degeneracy: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except (QmetroError, ValueError, OSError) as exc:
        print(f"qmetro: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
