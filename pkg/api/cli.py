# api/cli.py
import argparse
import dataclasses
import json
import logging
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional

import numpy as np
import pandas as pd

from api.app import VERSION, describe, fixture_path
from api.app_utils import (
    function_from_dict, is_input_error, load_function, load_json, load_operator_config, load_points,
    load_polytope, parse_floats, parse_point, point_from_dict, write_report,
)
from services import diagnostics, logsupport, polytope as poly, regularize
from services.errors import BadParameters, NeverBelow, NotDecreasing, SchemaError
from services.logsupport import CPoint
from services.regularize import OPERATORS, OperatorConfig
from services.report import CSV_FLOAT_FORMAT, Report
from services.settings import Settings

logger = logging.getLogger("LelongLab")

EXIT_OK, EXIT_FAILED, EXIT_INPUT = 0, 1, 2
DEFAULT_HALVINGS = 3
DEFAULT_GROWTH_RADII = "1e1,1e2,1e3"


# ==============================
# Run configuration
# ==============================
@dataclass
class RunConfig:
    command: str
    inputs: Dict[str, Path] = field(default_factory=dict)
    output: Optional[Path] = None
    seed: int = 42
    tol: Optional[float] = None

    def validate(self) -> None:
        for label, path in self.inputs.items():
            if not path.exists():
                raise FileNotFoundError(f"{label} file not found: {path}")
        if self.output is not None and not self.output.parent.exists():
            raise BadParameters(f"output directory {self.output.parent} does not exist")

    def tol_or(self, default: float) -> float:
        return default if self.tol is None else self.tol

    @classmethod
    def from_args(cls, args: argparse.Namespace) -> "RunConfig":
        inputs = {}
        for key in ("file", "fn", "grid", "config", "points"):
            value = getattr(args, key, None)
            if value is not None:
                inputs[key] = fixture_path(value)
        for i, value in enumerate(getattr(args, "files", None) or []):
            inputs[f"files[{i}]"] = fixture_path(value)
        command = args.command if not getattr(args, "report", None) else f"report {args.report}"
        return cls(
            command=command,
            inputs=inputs,
            output=None if args.out is None else Path(args.out),
            seed=args.seed,
            tol=args.tol,
        )


def _fmt(value: float) -> str:
    return CSV_FLOAT_FORMAT % value


def _emit(report: Report, cfg: RunConfig) -> int:
    if cfg.output is not None:
        write_report(report, cfg.output)
    else:
        sys.stdout.write(write_report(report))
    status = "✅ passed" if report.passed else "❌ failed"
    logger.info(f"{report.name}: {status}")
    return EXIT_OK if report.passed else EXIT_FAILED


# ==============================
# polytope
# ==============================
def cmd_polytope(args: argparse.Namespace, cfg: RunConfig) -> int:
    P = load_polytope(cfg.inputs["file"])
    check = args.check
    if check == "lower":
        print("true" if poly.is_lower(P) else "false")
    elif check == "sigma":
        print(_fmt(poly.sigma(P)))
    elif check == "extreme":
        print(json.dumps(poly.extreme_points(P).tolist()))
    elif check == "neighborhood":
        print(_fmt(poly.contains_neighborhood(P)))
    elif check == "lower-hull":
        print(json.dumps(poly.polytope_to_dict(poly.lower_hull(P))))
    elif check == "support":
        if args.point is None:
            raise BadParameters("--check support needs --point")
        print(_fmt(poly.support(P, parse_point(args.point))))
    elif check == "contains":
        if args.point is None:
            raise BadParameters("--check contains needs --point")
        print("true" if poly.contains(P, parse_point(args.point), cfg.tol_or(poly.TAU_MEM)) else "false")
    elif check == "envelope":
        return _emit(logsupport.torus_envelope_check(P, seed=cfg.seed, tol=cfg.tol_or(1e-12)), cfg)
    return EXIT_OK


# ==============================
# hs
# ==============================
HS_METHODS: Dict[str, Callable[[poly.Polytope, CPoint], float]] = {
    "hs": logsupport.hs,
    "interior": logsupport.hs_interior,
    "descent": logsupport.hs_descent,
    "lower": logsupport.hs_lower_formula,
    "poly": lambda P, z: logsupport.hs_poly(poly.extreme_points(P), z),
}


def cmd_hs(args: argparse.Namespace, cfg: RunConfig) -> int:
    P = load_polytope(cfg.inputs["file"])
    points = load_points(cfg.inputs["points"])
    method = HS_METHODS[args.method]
    frame = pd.DataFrame(
        [{"point": i, "value": method(P, z)} for i, z in enumerate(points)],
        columns=["point", "value"],
    )
    return _emit(Report(name=f"hs_{args.method}", frame=frame), cfg)


# ==============================
# reg
# ==============================
def _operator_config(args: argparse.Namespace, cfg: RunConfig) -> OperatorConfig:
    config = load_operator_config(cfg.inputs["config"]) if "config" in cfg.inputs else OperatorConfig()
    overrides = {}
    if args.op is not None:
        overrides["op"] = args.op
    if args.delta is not None:
        overrides["delta"] = args.delta
    if "config" not in cfg.inputs and args.op is None:
        raise BadParameters("reg needs --op or --config")
    return dataclasses.replace(config, **overrides)


def _deltas(args: argparse.Namespace, delta: float) -> List[float]:
    if args.deltas is not None:
        return parse_floats(args.deltas)
    return [delta * 0.5 ** k for k in range(args.halvings + 1)]


def cmd_reg(args: argparse.Namespace, cfg: RunConfig) -> int:
    u = load_function(cfg.inputs["fn"])
    config = _operator_config(args, cfg)
    logger.info(f"R^{config.op} with δ={config.delta:g} on {cfg.inputs['fn'].name}")

    if args.check == "monotone":
        points = load_points(cfg.inputs["grid"])
        report = regularize.monotone_check(config.op, u, _deltas(args, config.delta), points,
                                           tol=cfg.tol_or(1e-6), config=config)
        return _emit(report, cfg)

    if args.check == "growth":
        if u.growth is None:
            raise BadParameters("growth check needs a function fixture with a 'polytope'")
        reg = regularize.Regularized(u, config)
        report = logsupport.growth_constants(reg, u.growth.polytope, parse_floats(args.radii), seed=cfg.seed)
        declared = None if reg.growth is None else reg.growth.upper_const
        report.meta["declared_const"] = declared
        if declared is not None:
            report.passed = report.passed and report.meta["upper_const"] <= declared + cfg.tol_or(1e-6)
        return _emit(report, cfg)

    points = load_points(cfg.inputs["grid"])
    rows = []
    for i, z in enumerate(points):
        rows.append({"point": i, "u": u(z), "value": regularize.apply_operator(config.op, u, config.delta, z, config)})
    frame = pd.DataFrame(rows, columns=["point", "u", "value"])
    return _emit(Report(name=f"reg_{config.op}", frame=frame), cfg)


# ==============================
# report
# ==============================
def cmd_report(args: argparse.Namespace, cfg: RunConfig) -> int:
    kind = args.report
    if kind == "ex12":
        radii = parse_floats(args.radii) if args.radii else diagnostics.EX12_RADII
        report = diagnostics.example12_report(args.a, args.b, args.delta, radii,
                                              tol=cfg.tol_or(diagnostics.CHECK_TOL))
    elif kind == "perera":
        radii = parse_floats(args.radii) if args.radii else diagnostics.PERERA_RADII
        report = diagnostics.perera_example_report(radii, tol=cfg.tol_or(1e-9))
    elif kind == "hsmono":
        if args.files:
            polytopes = [load_polytope(cfg.inputs[f"files[{i}]"]) for i in range(len(args.files))]
        else:
            polytopes = diagnostics.circumscribed_sequence()
        report = diagnostics.hs_nonmonotone_report(polytopes, tol=cfg.tol_or(1e-12))
    elif kind == "witness":
        P = load_polytope(cfg.inputs["file"])
        radii = parse_floats(args.radii) if args.radii else diagnostics.WITNESS_RADII
        thresholds = parse_floats(args.thresholds) if args.thresholds else diagnostics.DEFAULT_THRESHOLDS
        _, report = diagnostics.nonuniform_witness(P, args.delta, radii, thresholds)
    else:
        P = load_polytope(cfg.inputs["file"])
        radii = parse_floats(args.radii) if args.radii else (1.0, 2.0, 4.0)
        report = diagnostics.lipschitz_report(P, radii, args.pairs, cfg.seed)
    return _emit(report, cfg)


# ==============================
# dini
# ==============================
def _grid(spec) -> np.ndarray:
    if isinstance(spec, dict):
        return np.linspace(float(spec["start"]), float(spec["stop"]), int(spec["num"]))
    return np.asarray(spec, dtype=float)


def _dini_inputs(data: dict, base_dir: Path):
    """(f_seq, g) on the grid described by a dini fixture."""
    kind = data.get("kind", "values")
    if kind == "values":
        return [np.asarray(f, dtype=float) for f in data["f_values"]], np.asarray(data["g"], dtype=float)
    if kind == "harmonic":
        # f_j(x) = x / j, j = 1..count
        x = _grid(data["grid"])
        return [x / j for j in range(1, int(data["count"]) + 1)], np.asarray(data["g"], dtype=float)
    if kind == "operator":
        fn = data["function"]
        u = load_function(base_dir / fn) if isinstance(fn, str) else function_from_dict(fn, base_dir)
        grid = data["grid"]
        points = load_points(base_dir / grid) if isinstance(grid, str) else [point_from_dict(p) for p in grid]
        config = OperatorConfig.from_dict(data.get("config", {"op": data.get("op", "b")}))
        deltas = [float(d) for d in data["deltas"]]
        f_seq = [np.asarray([regularize.apply_operator(config.op, u, d, z, config) for z in points])
                 for d in deltas]
        g = np.asarray([u(z) for z in points]) + float(data.get("epsilon", 0.1))
        return f_seq, g
    raise SchemaError(f"unknown dini fixture kind {kind!r}")


def cmd_dini(args: argparse.Namespace, cfg: RunConfig) -> int:
    path = cfg.inputs["file"]
    data = load_json(path)
    try:
        f_seq, g = _dini_inputs(data, path.parent)
    except (KeyError, TypeError) as e:
        raise SchemaError(f"bad dini fixture: missing or malformed {e}")
    try:
        j0 = regularize.dini_index(f_seq, g)
    except (NeverBelow, NotDecreasing) as e:
        logger.error(f"❌ {e}")
        print(f"check failed: {e}", file=sys.stderr)
        return EXIT_FAILED
    print(j0)
    return EXIT_OK


def cmd_fixtures(args: argparse.Namespace, cfg: RunConfig) -> int:
    status = describe()
    print(json.dumps(status, indent=2))
    return EXIT_OK if status["status"] == "ok" else EXIT_FAILED


COMMANDS: Dict[str, Callable[[argparse.Namespace, RunConfig], int]] = {
    "polytope": cmd_polytope,
    "hs": cmd_hs,
    "reg": cmd_reg,
    "report": cmd_report,
    "dini": cmd_dini,
    "fixtures": cmd_fixtures,
}


# ==============================
# Parser
# ==============================
def build_parser() -> argparse.ArgumentParser:
    settings = Settings.from_env()
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    common.add_argument("--threads", type=int, default=None, help="parallelism cap (overrides LELONG_THREADS)")
    common.add_argument("--seed", type=int, default=settings.seed, help="sampling seed (default %(default)s)")
    common.add_argument("--tol", type=float, default=None, help="tolerance override for the check")
    common.add_argument("--out", default=None, help="output file (.csv or .json); stdout CSV when omitted")

    parser = argparse.ArgumentParser(prog="lelonglab", description="Lelong-class numerics and reproduction reports")
    parser.add_argument("--version", action="version", version=f"%(prog)s {VERSION}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("polytope", parents=[common], help="polytope queries")
    p.add_argument("--file", required=True, help="polytope JSON or fixture name")
    p.add_argument("--check", required=True,
                   choices=["lower", "sigma", "extreme", "neighborhood", "lower-hull", "support", "contains",
                            "envelope"])
    p.add_argument("--point", default=None, help="comma-separated vector for support / contains")

    p = sub.add_parser("hs", parents=[common], help="evaluate H_S on a point file")
    p.add_argument("--file", required=True, help="polytope JSON or fixture name")
    p.add_argument("--points", required=True, help="points JSON")
    p.add_argument("--method", choices=sorted(HS_METHODS), default="hs")

    p = sub.add_parser("reg", parents=[common], help="apply a regularization operator")
    p.add_argument("--op", choices=OPERATORS, default=None)
    p.add_argument("--delta", type=float, default=None)
    p.add_argument("--fn", required=True, help="function JSON or fixture name")
    p.add_argument("--grid", default="grid", help="points JSON or fixture name (default %(default)s)")
    p.add_argument("--config", default=None, help="operator config JSON")
    p.add_argument("--check", choices=["value", "monotone", "growth"], default="value")
    p.add_argument("--halvings", type=int, default=DEFAULT_HALVINGS, help="δ-halving steps for monotone")
    p.add_argument("--deltas", default=None, help="explicit decreasing δ list for monotone")
    p.add_argument("--radii", default=DEFAULT_GROWTH_RADII, help="radii for the growth check")

    p = sub.add_parser("report", help="reproduction reports")
    reports = p.add_subparsers(dest="report", required=True)
    r = reports.add_parser("ex12", parents=[common], help="R^a on the non-lower polytope ch{0, a·e1, a·e2, (b, a)}")
    r.add_argument("--a", type=float, default=1.0)
    r.add_argument("--b", type=float, default=3.0)
    r.add_argument("--delta", type=float, default=0.5)
    r.add_argument("--radii", default=None)
    r = reports.add_parser("perera", parents=[common], help="H_S along (1/z₂, z₂)")
    r.add_argument("--radii", default=None)
    r = reports.add_parser("hsmono", parents=[common], help="h_S along a decreasing sequence")
    r.add_argument("--files", nargs="*", default=None, help="nested polytope JSONs, outermost first")
    r = reports.add_parser("witness", parents=[common], help="non-uniform continuity witness")
    r.add_argument("--file", required=True)
    r.add_argument("--delta", type=float, default=0.1)
    r.add_argument("--radii", default=None)
    r.add_argument("--thresholds", default=None)
    r = reports.add_parser("lipschitz", parents=[common], help="sampled Lipschitz constant of H_S")
    r.add_argument("--file", required=True)
    r.add_argument("--pairs", type=int, default=1000)
    r.add_argument("--radii", default=None, help="box radii")

    p = sub.add_parser("dini", parents=[common], help="Dini index of a decreasing sequence")
    p.add_argument("--file", required=True, help="dini fixture JSON")

    sub.add_parser("fixtures", parents=[common], help="status of the shipped fixtures")
    return parser


# ==============================
# Entry points
# ==============================
def run(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    if args.verbose:
        logger.setLevel(logging.DEBUG)
    if args.threads is not None:
        if args.threads < 1:
            print("error: --threads must be ≥ 1", file=sys.stderr)
            return EXIT_INPUT
        os.environ["LELONG_THREADS"] = str(args.threads)

    try:
        cfg = RunConfig.from_args(args)
        cfg.validate()
        return COMMANDS[args.command](args, cfg)
    except Exception as e:
        if not is_input_error(e):
            raise
        logger.error(f"❌ {type(e).__name__}: {e}")
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_INPUT


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
