"""Command-line surface.

Exit codes: 0 on success (verdicts go to stdout as JSON), 2 on input or
validation failure (machine-readable error list on stdout, human message on
stderr), 1 on internal error.  All floating-point output carries 17
significant digits.  No environment variables are consulted; every knob is
a flag, so scripted runs are reproducible.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import jsonio
from .certificates import certify_star, subset_slack_profile
from .configurations import satisfactory_slack, search_satisfactory
from .costs import PowerCost, decomposition_exponent
from .errors import FlowValidationError, InputError
from .fermat import WeightedPoints, weighted_fermat
from .flows import gilbert_functional, is_forest, validate_flow
from .gallery import (UniversalTreeSpec, example_double_star, example_equiangular,
                      example_orthant, universal_tree)
from .jsonio import FORMAT, dumps
from .solver import solve
from .svg import render_svg


def _read_document(path: str) -> dict:
    if path == "-":
        return jsonio.loads(sys.stdin.read())
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return jsonio.loads(fh.read())
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc


def _write_output(text: str, path: str | None) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
        if not text.endswith("\n"):
            sys.stdout.write("\n")
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)


def _parse_masses(raw: str) -> np.ndarray:
    try:
        return np.asarray([float(x) for x in raw.split(",") if x != ""])
    except ValueError as exc:
        raise InputError(f"cannot parse mass list {raw!r}") from exc


def _cmd_evaluate(args) -> tuple[str, int]:
    flow = jsonio.flow_from_dict(_read_document(args.input))
    fc = gilbert_functional(flow, PowerCost(args.p))
    doc = {"format": FORMAT, "total": fc.total,
           "per_edge": [{"from": u, "to": v, "contribution": c}
                        for (u, v), c in fc.per_edge]}
    return dumps(doc), 0


def _cmd_validate(args) -> tuple[str, int]:
    instance = jsonio.instance_from_dict(_read_document(args.instance))
    flow = jsonio.flow_from_dict(_read_document(args.input))
    report = validate_flow(instance, flow, tol=args.tol)
    doc = {"format": FORMAT, **report.to_dict(), "is_forest": is_forest(flow)}
    return dumps(doc), 0 if report.ok else 2


def _cmd_certify(args) -> tuple[str, int]:
    instance, cost = jsonio.star_instance_from_dict(_read_document(args.input))
    if args.mode == "sampled" and args.seed is None:
        raise InputError("--seed is required in sampled mode")
    cert = certify_star(instance, cost, mode=args.mode, sample_count=args.samples,
                        seed=args.seed, tol=args.tol)
    doc = {"format": FORMAT, **cert.to_dict()}
    if args.profile:
        doc["slack_profile"] = {str(k): v
                                for k, v in subset_slack_profile(instance, cost).items()}
    return dumps(doc), 0


def _cmd_check_config(args) -> tuple[str, int]:
    config = jsonio.configuration_from_dict(_read_document(args.input))
    sm = satisfactory_slack(PowerCost(args.p), config, tol=args.tol)
    doc = {"format": FORMAT, "slack_matrix": sm.matrix.tolist(),
           "min_slack": sm.min_slack, "is_satisfactory": sm.is_satisfactory,
           "worst_pair": list(sm.worst_pair())}
    return dumps(doc), 0


def _cmd_search_config(args) -> tuple[str, int]:
    masses = _parse_masses(args.masses)
    result = search_satisfactory(PowerCost(args.p), args.d, masses,
                                 restarts=args.restarts, seed=args.seed)
    doc = {"format": FORMAT,
           "directions": result.config.directions.tolist(),
           "masses": result.config.masses.tolist(),
           "min_slack": result.min_slack,
           "restart_index": result.restart_index,
           "restarts": result.restarts}
    return dumps(doc), 0


def _cmd_fermat(args) -> tuple[str, int]:
    pts, ws = jsonio.weighted_points_from_dict(_read_document(args.input))
    res = weighted_fermat(WeightedPoints(pts, ws))
    doc = {"format": FORMAT, "point": res.point.tolist(), "value": res.value,
           "at_vertex": res.at_vertex, "iterations": res.iterations,
           "converged": res.converged}
    return dumps(doc), 0


def _cmd_solve(args) -> tuple[str, int]:
    if args.max_degree < 3:
        raise InputError(f"max degree must be >= 3, got {args.max_degree}")
    instance = jsonio.instance_from_dict(_read_document(args.input))
    report = solve(instance, max_degree=args.max_degree, tol=args.tol,
                   threads=args.threads)
    doc = {"format": FORMAT, **report.to_dict(),
           "best_flow": jsonio.flow_to_dict(report.best_flow)}
    if args.svg is not None:
        _write_output(render_svg(report.best_flow, instance.cost), args.svg)
    return dumps(doc), 0


def _cmd_generate(args) -> tuple[str, int]:
    if args.example == "orthant":
        masses = None if args.masses is None else _parse_masses(args.masses)
        instance, flow = example_orthant(args.d, masses)
    elif args.example == "equiangular":
        instance, flow, _frame = example_equiangular(args.d, args.p)
    elif args.example == "double-star":
        instance, flow = example_double_star(args.d)
    elif args.example == "universal":
        spec = UniversalTreeSpec(depth=args.depth, length_ratio=args.ratio)
        instance, flow = universal_tree(spec)
    else:
        raise InputError(f"unknown example {args.example!r}")
    doc = {"format": FORMAT,
           "instance": jsonio.instance_to_dict(instance),
           "flow": jsonio.flow_to_dict(flow)}
    return dumps(doc), 0


def _cmd_render(args) -> tuple[str, int]:
    flow = jsonio.flow_from_dict(_read_document(args.input))
    return render_svg(flow, PowerCost(args.p)), 0


def _cmd_decompose(args) -> tuple[str, int]:
    grid = _parse_masses(args.t_grid)
    exponent = decomposition_exponent(args.p, grid)
    doc = {"format": FORMAT, "p": args.p, "t_grid": grid.tolist(),
           "exponent": exponent}
    return dumps(doc), 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="branchflow",
        description="Branched optimal transport toolkit: evaluate flows, certify "
                    "star optimality, analyse branching configurations, and solve "
                    "small instances exactly.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, tol_default=None):
        p.add_argument("--output", default=None, help="output path (default stdout)")
        p.add_argument("--tol", type=float, default=tol_default,
                       help="tolerance override")

    p = sub.add_parser("evaluate", help="total transport cost of a flow")
    p.add_argument("--input", required=True, help="flow JSON path or -")
    p.add_argument("--p", type=float, required=True, help="cost exponent")
    add_common(p)
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("validate", help="check a flow against an instance")
    p.add_argument("--instance", required=True, help="instance JSON path")
    p.add_argument("--input", required=True, help="flow JSON path or -")
    add_common(p)
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("certify", help="star-flow optimality certificate")
    p.add_argument("--input", required=True, help="star instance JSON path or -")
    p.add_argument("--mode", choices=["exhaustive", "sampled"], default="exhaustive")
    p.add_argument("--samples", type=int, default=10000)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--profile", action="store_true",
                   help="include the per-size subset slack profile")
    add_common(p)
    p.set_defaults(func=_cmd_certify)

    p = sub.add_parser("check-config", help="slack matrix of a star configuration")
    p.add_argument("--input", required=True, help="configuration JSON path or -")
    p.add_argument("--p", type=float, required=True)
    add_common(p)
    p.set_defaults(func=_cmd_check_config)

    p = sub.add_parser("search-config", help="maximize the minimum pair slack")
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--masses", required=True, help="comma-separated, summing to 0")
    p.add_argument("--restarts", type=int, default=100)
    p.add_argument("--seed", type=int, required=True)
    add_common(p)
    p.set_defaults(func=_cmd_search_config)

    p = sub.add_parser("fermat", help="weighted Fermat-Torricelli point")
    p.add_argument("--input", required=True, help="weighted points JSON path or -")
    add_common(p)
    p.set_defaults(func=_cmd_fermat)

    p = sub.add_parser("solve", help="exact solve by topology enumeration")
    p.add_argument("--input", required=True, help="instance JSON path or -")
    p.add_argument("--max-degree", type=int, required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--threads", type=int, default=1,
                   help="worker processes; 1 forces serial execution")
    p.add_argument("--svg", default=None, help="also render the best flow (d=2)")
    add_common(p)
    p.set_defaults(func=_cmd_solve)

    p = sub.add_parser("generate", help="construct a gallery instance + flow")
    p.add_argument("--example", required=True,
                   choices=["orthant", "equiangular", "double-star", "universal"])
    p.add_argument("--d", type=int, default=3)
    p.add_argument("--p", type=float, default=0.5)
    p.add_argument("--masses", default=None, help="orthant sink masses")
    p.add_argument("--depth", type=int, default=3, help="universal tree depth")
    p.add_argument("--ratio", type=float, default=0.7, help="universal length ratio")
    add_common(p)
    p.set_defaults(func=_cmd_generate)

    p = sub.add_parser("render", help="SVG of a planar flow")
    p.add_argument("--input", required=True, help="flow JSON path or -")
    p.add_argument("--p", type=float, default=0.5, help="cost exponent for widths")
    add_common(p)
    p.set_defaults(func=_cmd_render)

    p = sub.add_parser("decompose", help="fitted scaling exponent of the cost integral")
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--t-grid", default="0.5,1,2,4", help="comma-separated t values")
    add_common(p)
    p.set_defaults(func=_cmd_decompose)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse uses exit code 2 for bad usage
        return int(exc.code or 0)
    try:
        text, code = args.func(args)
    except FlowValidationError as exc:
        doc = {"format": FORMAT,
               "error": {"message": str(exc),
                         "violations": [v.to_dict() for v in exc.violations]}}
        sys.stdout.write(dumps(doc) + "\n")
        print(str(exc), file=sys.stderr)
        return 2
    except InputError as exc:
        doc = {"format": FORMAT, "error": {"message": str(exc), "violations": []}}
        sys.stdout.write(dumps(doc) + "\n")
        print(str(exc), file=sys.stderr)
        return 2
    except Exception as exc:  # pragma: no cover - internal failure path
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    _write_output(text, args.output)
    return code


if __name__ == "__main__":
    sys.exit(main())
