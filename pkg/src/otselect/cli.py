"""Command-line front end.

Thin client over the same operation layer the HTTP service exposes; every
command reads feature files, dispatches, and writes deterministic JSON.

Exit codes: 0 success, 1 I/O or validation failure, 2 unknown method,
3 infeasible budget.
"""

from __future__ import annotations

import argparse
import sys

from . import _threads, api, jsonio, loopsim
from .api import UnknownMethodError
from .baselines import InfeasibleBudgetError
from .features import (
    EvfFormatError,
    FeatureError,
    ProjectionSpec,
    RawFeatureMatrix,
    project,
    read_csv,
    read_evf,
    read_features,
    write_evf,
)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_UNKNOWN_METHOD = 2
EXIT_INFEASIBLE = 3

_METHOD_PARAM_FLAGS = (
    ("steps", int),
    ("lr", float),
    ("epsilon", float),
    ("tol", float),
    ("cluster_ratio", float),
    ("sigma", float),
    ("alpha", float),
    ("c_scale", float),
    ("max_k", int),
    ("kde_k", int),
)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="otselect", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("project", help="project raw features and write EVF")
    p.add_argument("--in", dest="in_path", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--d-out", type=int, default=1024)
    p.add_argument("--sparsity", type=float, default=0.0, help="0 selects 1/sqrt(d_out)")
    p.add_argument("--seed", type=int, default=0)

    s = sub.add_parser("select", help="run a selector and write SelectionResult JSON")
    s.add_argument("--train", required=True)
    s.add_argument("--val")
    s.add_argument("--out", required=True)
    s.add_argument("--method", required=True)
    s.add_argument("--rho", type=float, required=True)
    s.add_argument("--seed", type=int, default=0)
    for name, caster in _METHOD_PARAM_FLAGS:
        s.add_argument(f"--{name.replace('_', '-')}", dest=name, type=caster, default=None)

    c = sub.add_parser("score", help="write SubsetReport JSON for a subset")
    c.add_argument("--sub", required=True)
    c.add_argument("--val", required=True)
    c.add_argument("--out", required=True)
    c.add_argument("--method", default="subset", help="label echoed into the report")
    c.add_argument("--epsilon", type=float, default=0.5)
    c.add_argument("--tol", type=float, default=1e-6)

    m = sub.add_parser("simulate", help="run the generation-selection loop simulator")
    m.add_argument("--config", required=True)
    m.add_argument("--out", required=True, help="JSON path; CSV lands beside it")

    v = sub.add_parser("serve", help="start the HTTP service")
    v.add_argument("--host", default="127.0.0.1")
    v.add_argument("--port", type=int, default=8341)
    return parser


def _read_raw(path: str) -> RawFeatureMatrix:
    with open(path, "rb") as fh:
        head = fh.read(4)
    if head == b"EVF1":
        loaded = read_evf(path)
        return RawFeatureMatrix(loaded.data, ids=loaded.ids)
    return read_csv(path)


def _cmd_project(args) -> int:
    raw = _read_raw(args.in_path)
    spec = ProjectionSpec(d_in=raw.d_in, d_out=args.d_out, sparsity=args.sparsity, seed=args.seed)
    write_evf(project(raw, spec), args.out)
    return EXIT_OK


def _cmd_select(args) -> int:
    train = read_features(args.train)
    val = None
    if args.method != "random":
        if args.val is None:
            raise FeatureError("--val is required for this method")
        val = read_features(args.val)
    params = {name: getattr(args, name) for name, _ in _METHOD_PARAM_FLAGS if getattr(args, name) is not None}
    result = api.select(train, val, args.method, args.rho, seed=args.seed, params=params)
    jsonio.write_json(api.selection_to_dict(result), args.out)
    return EXIT_OK


def _cmd_score(args) -> int:
    sub = read_features(args.sub)
    val = read_features(args.val)
    report = api.score_subset(sub, val, method=args.method, epsilon=args.epsilon, tol=args.tol)
    jsonio.write_json(api.report_to_dict(report), args.out)
    return EXIT_OK


def _cmd_simulate(args) -> int:
    cfg = loopsim.load_config(args.config)
    report = loopsim.run_loop(cfg)
    jsonio.write_json(loopsim.report_to_dict(report), args.out)
    csv_path = args.out[:-5] + ".csv" if args.out.endswith(".json") else args.out + ".csv"
    jsonio.write_csv(loopsim.report_rows(report), csv_path)
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    _threads.configure_process()
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "project":
            return _cmd_project(args)
        if args.command == "select":
            return _cmd_select(args)
        if args.command == "score":
            return _cmd_score(args)
        if args.command == "simulate":
            return _cmd_simulate(args)
        if args.command == "serve":
            import uvicorn

            from .service.app import create_app

            uvicorn.run(create_app(), host=args.host, port=args.port, log_level="warning")
            return EXIT_OK
    except UnknownMethodError as exc:
        print(f"otselect: {exc}", file=sys.stderr)
        return EXIT_UNKNOWN_METHOD
    except InfeasibleBudgetError as exc:
        print(f"otselect: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (OSError, ValueError, EvfFormatError, FeatureError) as exc:
        print(f"otselect: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
