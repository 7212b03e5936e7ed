"""Command-line interface.

Exit codes: 0 success, 2 validation (bad flags, sizes, malformed input),
3 too few samples, 4 internal consistency failure, 5 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

from ._version import __version__
from .erasure import (
    erased_information_decomposed,
    erased_information_direct,
    erased_scaling_sweep,
    erasure_report,
    landauer_heat_bound,
)
from .errors import ConsistencyError, ConvergenceError, PreconditionError, SampleSizeError, ValidationError
from .inference import DEFAULT_L, DEFAULT_MIN_COUNT, DEFAULT_TOL, compare_machines, reconstruct
from .simulation import (
    BURN_IN,
    SimulationConfig,
    flip_fraction,
    read_trace,
    simulate,
    state_occupancy,
    write_trace,
)
from .transducer import build_exact, dumps_transducer

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_SAMPLE_SIZE = 3
EXIT_CONSISTENCY = 4
EXIT_IO = 5

DEFAULT_TEMPERATURE = 300.0


def _emit(text: str, out: str | None):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _rows_to_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})
    return buf.getvalue()


def _note_temperature(args):
    if args.temperature_defaulted:
        print(f"temperature not given; using {DEFAULT_TEMPERATURE:g} K", file=sys.stderr)


def cmd_exact(args) -> int:
    _note_temperature(args)
    t = build_exact(args.n)
    direct = erased_information_direct(t)
    decomposed = erased_information_decomposed(t)
    if abs(direct - decomposed) > 1e-12:
        raise ConsistencyError(f"direct {direct!r} and decomposed {decomposed!r} erasure disagree")
    report = erasure_report(args.n, direct, args.temperature, erased_bits_decomposed=decomposed)
    _emit(report.to_json() if args.format == "json" else report.to_csv(), args.out)
    return EXIT_OK


def cmd_landauer(args) -> int:
    _note_temperature(args)
    report = erasure_report(None, args.bits, args.temperature)
    _emit(report.to_json() if args.format == "json" else report.to_csv(), args.out)
    return EXIT_OK


def cmd_sweep(args) -> int:
    _note_temperature(args)
    rows = [
        {
            "n": r.n,
            "erased_bits": r.erased_bits,
            "excess_over_n": r.excess_over_n,
            "heat_bound_J": landauer_heat_bound(r.erased_bits, args.temperature),
        }
        for r in erased_scaling_sweep(args.n_max)
    ]
    if args.format == "json":
        text = json.dumps({"temperature_K": args.temperature, "rows": rows}, indent=1)
    else:
        text = _rows_to_csv(rows)
    _emit(text, args.out)
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg = SimulationConfig(n=args.n, steps=args.steps, seed=args.seed, initial_state=args.initial_state)
    tr = simulate(cfg)
    write_trace(args.out, tr, redact=args.redact)
    summary = {"out": str(args.out), "n": args.n, "steps": args.steps, "seed": args.seed, "redacted": args.redact}
    try:
        summary["flip_fraction"] = flip_fraction(tr)
        summary["state_occupancy"] = state_occupancy(tr).tolist()
    except SampleSizeError:
        summary["flip_fraction"] = None
        summary["state_occupancy"] = None
    print(json.dumps(summary))
    return EXIT_OK


def cmd_infer(args) -> int:
    tr = read_trace(args.trace, redact=True)
    pm = reconstruct(tr, L=args.L, tol=args.tol, min_count=args.min_count, burn_in=args.burn_in)
    machine = pm.to_transducer()
    if args.out:
        Path(args.out).write_text(dumps_transducer(machine))
    result = {"states": pm.n_clusters, "history_length": args.L, "tol": args.tol, "min_count": args.min_count}
    if pm.morphs.excluded:
        result["excluded_histories"] = [[list(p) for p in k] for k in sorted(pm.morphs.excluded)]
    if tr.n is not None:
        report = compare_machines(machine, build_exact(tr.n))
        result["comparison"] = report.to_dict()
        if args.report:
            Path(args.report).write_text(json.dumps(report.to_dict(), indent=1))
    print(json.dumps(result))
    return EXIT_OK


def _nonneg_float(text):
    value = float(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {text}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qerasure", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def temperature(p):
        p.add_argument("--temperature", type=_nonneg_float, default=None, help="kelvin (default 300)")

    def fmt(p):
        p.add_argument("--format", choices=("json", "csv"), default="json")
        p.add_argument("--out", default=None, help="output file (default stdout)")

    p = sub.add_parser("exact", help="erased bits and heat bound of the exact machine")
    p.add_argument("--n", type=int, default=1)
    temperature(p)
    fmt(p)
    p.set_defaults(func=cmd_exact)

    p = sub.add_parser("landauer", help="convert erased bits to the minimum heat")
    p.add_argument("--bits", type=_nonneg_float, required=True)
    temperature(p)
    fmt(p)
    p.set_defaults(func=cmd_landauer)

    p = sub.add_parser("sweep", help="erased bits for n = 1 .. n-max")
    p.add_argument("--n-max", type=int, required=True)
    temperature(p)
    fmt(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("simulate", help="write a Monte Carlo trace")
    p.add_argument("--n", type=int, default=1)
    p.add_argument("--steps", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--initial-state", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--redact", action="store_true", help="omit the state column")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("infer", help="reconstruct causal states from a trace file")
    p.add_argument("trace")
    p.add_argument("--L", type=int, default=DEFAULT_L, help="history length")
    p.add_argument("--tol", type=_nonneg_float, default=DEFAULT_TOL)
    p.add_argument("--min-count", type=int, default=DEFAULT_MIN_COUNT)
    p.add_argument("--burn-in", type=int, default=BURN_IN)
    p.add_argument("--out", default=None, help="inferred machine document")
    p.add_argument("--report", default=None, help="comparison report document")
    p.set_defaults(func=cmd_infer)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if hasattr(args, "temperature"):
        args.temperature_defaulted = args.temperature is None
        if args.temperature is None:
            args.temperature = DEFAULT_TEMPERATURE
    try:
        return args.func(args)
    except SampleSizeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        for item in exc.deficient:
            print(f"  deficient: {item}", file=sys.stderr)
        return EXIT_SAMPLE_SIZE
    except (ValidationError, PreconditionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (ConsistencyError, ConvergenceError) as exc:
        print(f"consistency failure: {exc}", file=sys.stderr)
        return EXIT_CONSISTENCY
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
