"""Command-line front end: ``percbounds {bounds,table,simulate,couple}``.

Exit codes: 0 success, 2 bad parameters, 3 a validation check failed.
The default seed comes from ``PERCBOUNDS_SEED`` (else 0). Every command is
a pure function of its arguments, so repeated runs give identical bytes.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

from . import bounds, couplings, mc_engine
from .lattice import FAMILIES, ModelSpec

EXIT_OK = 0
EXIT_PARAMS = 2
EXIT_VALIDATION = 3
SEED_ENV = "PERCBOUNDS_SEED"
MAX_TABLE_D = 64


class ParameterError(ValueError):
    pass


def dumps(obj) -> str:
    """JSON with every float written to 17 significant digits."""
    if isinstance(obj, bool) or obj is None or isinstance(obj, (int, str)):
        return json.dumps(obj)
    if isinstance(obj, float):
        if not math.isfinite(obj):
            raise ValueError(f"non-finite float {obj} in output")
        return format(obj, ".17g")
    if isinstance(obj, dict):
        return "{" + ", ".join(f"{json.dumps(str(k))}: {dumps(v)}" for k, v in obj.items()) + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ", ".join(dumps(v) for v in obj) + "]"
    if hasattr(obj, "item"):  # numpy scalar
        return dumps(obj.item())
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _seed(text: str) -> int:
    try:
        seed = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"seed must be an integer, got {text!r}") from None
    if not 0 <= seed < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit value")
    return seed


def _default_seed() -> int:
    text = os.environ.get(SEED_ENV)
    if text is None:
        return 0
    try:
        return _seed(text)
    except argparse.ArgumentTypeError as exc:
        raise ParameterError(f"{SEED_ENV}: {exc}") from None


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {value}")
    return value


def _probability(text: str) -> float:
    value = float(text)
    if not 0.0 <= value <= 1.0:
        raise argparse.ArgumentTypeError(f"probability {value} outside [0, 1]")
    return value


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


# -- subcommands --------------------------------------------------------------


def cmd_bounds(args) -> int:
    if args.d < 3 and args.method != bounds.Method.REGISTRY.value:
        raise ParameterError("d must be >= 3 (d = 2 only with --method registry)")
    model = ModelSpec.from_family(args.family, args.d)
    if args.method:
        result = bounds.bound_by_method(model, args.method)
    else:
        result = bounds.best_bound(model)
    _emit(dumps(result.to_dict()) + "\n", args.out)
    return EXIT_OK


def cmd_table(args) -> int:
    if not 3 <= args.d_min <= args.d_max <= MAX_TABLE_D:
        raise ParameterError(f"need 3 <= d-min <= d-max <= {MAX_TABLE_D}")
    table = bounds.generate_table(args.d_min, args.d_max)
    text = table.to_csv() if args.format == "csv" else dumps(table.to_json()) + "\n"
    _emit(text, args.out)
    return EXIT_OK


_ESTIMATE_FIELDS = ("family", "d", "p", "box_radius", "replicas", "hits", "estimate", "ci_low", "ci_high")


def _estimates_csv(estimates) -> str:
    lines = [",".join(_ESTIMATE_FIELDS)]
    for e in estimates:
        row = e.to_dict()
        lines.append(",".join(format(row[f], ".17g") if isinstance(row[f], float) else str(row[f]) for f in _ESTIMATE_FIELDS))
    return "\n".join(lines) + "\n"


def cmd_simulate(args) -> int:
    model = ModelSpec.from_family(args.family, args.d)
    if args.mode == "survival":
        estimates = [
            mc_engine.survival_proxy(model, args.p, args.box_radius, args.replicas, args.seed, args.step_cap)
        ]
        summary = f"{model.family} d={model.d} p={args.p}: {estimates[0].hits}/{args.replicas} reached the boundary"
    else:
        grid = [float(x) for x in args.p_grid.split(",")]
        estimates = mc_engine.union_find_sweep(model, args.box_radius, grid, args.replicas, args.seed)
        summary = f"{model.family} d={model.d}: crossing curve at {len(grid)} points"
    if args.format == "csv":
        text = _estimates_csv(estimates)
    else:
        payload = [e.to_dict() for e in estimates]
        text = dumps(payload[0] if args.mode == "survival" else payload) + "\n"
    _emit(text, args.out)
    print(summary, file=sys.stderr)
    return EXIT_OK


def _coupling_params(args) -> dict:
    if args.kind == "triangular":
        probs = [args.p1, args.p2, args.p3]
        if any(x is None for x in probs):
            if args.p is None:
                raise ParameterError("triangular needs --p or all of --p1 --p2 --p3")
            probs = [args.p] * 3
        for x in probs:
            if not 0.0 <= x <= 1.0:
                raise ParameterError(f"probability {x} outside [0, 1]")
        return {"p": probs}
    if args.p is None or not 0.0 < args.p < 1.0:
        raise ParameterError(f"{args.kind} needs --p in (0, 1)")
    if args.d is None or args.d < 2:
        raise ParameterError(f"{args.kind} needs --d >= 2")
    params = {"d": args.d, "p": args.p}
    if args.kind == "fold":
        if args.k is None or args.k < 1 or args.d % args.k:
            raise ParameterError("fold needs --k dividing --d")
        params.update(k=args.k, oriented=args.oriented)
    return params


def _calibration(kind: str, params: dict, resolutions: int, seed: int):
    event = {"edge-split": "A", "vertex-split": "An", "fold": "B"}.get(kind)
    if event is None or resolutions == 0:
        return None
    cal = couplings.calibrate_event(event, params["d"], params["p"], resolutions, seed, params.get("k"))
    return {
        "event": event,
        "resolutions": cal.resolutions,
        "empirical": cal.frequency,
        "theoretical": cal.expected,
        "sd": cal.sd,
        "z": cal.z,
        "passed": cal.within(3.0),
    }


def cmd_couple(args) -> int:
    params = _coupling_params(args)
    if args.traces:
        trace_dir = Path(args.trace_dir)
        trace_dir.mkdir(parents=True, exist_ok=True)
        for r in range(min(args.traces, args.replicas)):
            trace = couplings.run_coupling(args.kind, params, args.step_cap, args.seed, r)
            (trace_dir / f"{args.kind}-{r:05d}.jsonl").write_text(trace.to_jsonl())
    report = couplings.validate_domination(
        args.kind, params, args.replicas, master_seed=args.seed, step_cap=args.step_cap
    )
    calibration = _calibration(args.kind, params, args.calibration_resolutions, args.seed)
    out = report.to_dict()
    out["calibration"] = calibration
    passed = report.passed and (calibration is None or calibration["passed"])
    out["passed"] = passed
    _emit(dumps(out) + "\n", args.report)
    print(
        f"{args.kind}: pathwise violations {report.pathwise_violations}, "
        f"{'PASS' if passed else 'FAIL'}",
        file=sys.stderr,
    )
    return EXIT_OK if passed else EXIT_VALIDATION


# -- parser -------------------------------------------------------------------


def build_parser(default_seed: int = 0) -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="percbounds", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("bounds", help="best certified upper bound for one family and dimension")
    p.add_argument("--family", required=True, choices=FAMILIES)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--method", choices=[m.value for m in bounds.Method])
    p.add_argument("--out")
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("table", help="bound table for a range of dimensions")
    p.add_argument("--d-min", type=int, default=3)
    p.add_argument("--d-max", type=int, default=9)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--out")
    p.set_defaults(func=cmd_table)

    p = sub.add_parser("simulate", help="finite-box survival proxy or crossing sweep")
    p.add_argument("mode", choices=("survival", "sweep"))
    p.add_argument("--family", required=True, choices=FAMILIES)
    p.add_argument("--d", type=_positive, required=True)
    p.add_argument("--p", type=_probability, help="open probability (survival)")
    p.add_argument("--p-grid", help="comma-separated increasing p values (sweep)")
    p.add_argument("--box-radius", type=_positive, default=20)
    p.add_argument("--replicas", type=_positive, default=1000)
    p.add_argument("--step-cap", type=_positive, default=mc_engine.DEFAULT_STEP_CAP)
    p.add_argument("--seed", type=_seed, default=default_seed)
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--out")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("couple", help="run a coupling, write traces and a validation report")
    p.add_argument("--kind", required=True, choices=couplings.KINDS)
    p.add_argument("--p", type=float)
    p.add_argument("--p1", type=float)
    p.add_argument("--p2", type=float)
    p.add_argument("--p3", type=float)
    p.add_argument("--d", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--oriented", action="store_true")
    p.add_argument("--replicas", type=_positive, default=1000)
    p.add_argument("--step-cap", type=_positive, default=1000)
    p.add_argument("--seed", type=_seed, default=default_seed)
    p.add_argument("--traces", type=int, default=1, help="replicas whose step log is written")
    p.add_argument("--trace-dir", default="traces")
    p.add_argument("--calibration-resolutions", type=int, default=10**4)
    p.add_argument("--report", help="validation report path (default stdout)")
    p.set_defaults(func=cmd_couple)
    return parser


def main(argv=None) -> int:
    try:
        parser = build_parser(_default_seed())
        args = parser.parse_args(argv)
        if args.command == "simulate":
            if args.mode == "survival" and args.p is None:
                raise ParameterError("survival needs --p")
            if args.mode == "sweep" and not args.p_grid:
                raise ParameterError("sweep needs --p-grid")
        return args.func(args)
    except (ValueError, bounds.BoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARAMS


if __name__ == "__main__":
    sys.exit(main())
