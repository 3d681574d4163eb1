# api/app_utils.py
import json
import logging
from pathlib import Path
from typing import List, Optional, Union

import numpy as np
import pandas as pd

from services.errors import BadParameters, LelongError, SchemaError
from services.logsupport import (
    CPoint, ConstantFunction, EvaluableFunction, HSFunction, PolyLogFunction, ScaledFunction,
    TropicalFunction,
)
from services.polytope import Polytope, polytope_from_dict
from services.regularize import OperatorConfig
from services.report import Report

logger = logging.getLogger("LelongLab")

PathLike = Union[str, Path]
FUNCTION_KINDS = ("hs", "tropical", "polylog", "constant", "scaled")


# ------------------- JSON -------------------
def load_json(path: PathLike) -> dict:
    """Đọc file JSON UTF-8; FileNotFoundError / JSONDecodeError đi thẳng lên CLI (exit 2)."""
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    logger.info(f"✅ Loaded {path.name}")
    return data


def _real(value, what: str) -> float:
    """Số thực, chấp nhận chuỗi thập phân và "-inf"."""
    try:
        return float(value)
    except (TypeError, ValueError):
        raise SchemaError(f"{what} must be a number, got {value!r}")


# ------------------- POLYTOPES -------------------
def polytope_from_json(data, base_dir: Optional[Path] = None) -> Polytope:
    """Inline {"n", "vertices"} or a path (relative to base_dir) to such a file."""
    if isinstance(data, str):
        path = Path(data)
        if not path.is_absolute() and base_dir is not None:
            path = base_dir / path
        return load_polytope(path)
    return polytope_from_dict(data)


def load_polytope(path: PathLike) -> Polytope:
    data = load_json(path)
    if isinstance(data, dict) and "polytope" in data and "vertices" not in data:
        data = data["polytope"]
    return polytope_from_dict(data)


# ------------------- FUNCTIONS -------------------
def _coeff(value) -> complex:
    if isinstance(value, (list, tuple)):
        if len(value) != 2:
            raise SchemaError(f"complex coefficient must be [re, im], got {value!r}")
        return complex(_real(value[0], "coefficient"), _real(value[1], "coefficient"))
    return complex(_real(value, "coefficient"))


def function_from_dict(data: dict, base_dir: Optional[Path] = None) -> EvaluableFunction:
    """
    Function fixtures:
      {"kind": "hs", "polytope": ...}
      {"kind": "tropical", "pieces": [{"slope": [...], "offset": c}], "polytope": ...}
      {"kind": "polylog", "m": 1, "monomials": [{"exponent": [...], "coeff": c | [re, im]}], "polytope": ...}
      {"kind": "constant", "value": c, "n": 2}
      {"kind": "scaled", "t": 0.5, "of": {...}}
    "polytope" is optional for tropical / polylog (no class constant without it).
    """
    if not isinstance(data, dict):
        raise SchemaError("function JSON must be an object")
    kind = data.get("kind")
    if kind not in FUNCTION_KINDS:
        raise SchemaError(f"unknown function kind {kind!r}; choose from {FUNCTION_KINDS}")
    P = polytope_from_json(data["polytope"], base_dir) if data.get("polytope") is not None else None

    try:
        if kind == "hs":
            if P is None:
                raise SchemaError("an 'hs' function needs a 'polytope'")
            return HSFunction(P)
        if kind == "tropical":
            pieces = [([_real(x, "slope") for x in p["slope"]], _real(p.get("offset", 0.0), "offset"))
                      for p in data["pieces"]]
            return TropicalFunction(pieces, polytope=P)
        if kind == "polylog":
            monomials = [([int(e) for e in mono["exponent"]], _coeff(mono.get("coeff", 1.0)))
                         for mono in data["monomials"]]
            return PolyLogFunction(monomials, m=int(data.get("m", 1)), polytope=P)
        if kind == "constant":
            n = int(data.get("n", P.n if P is not None else 0))
            return ConstantFunction(_real(data["value"], "value"), n, P)
        return ScaledFunction(function_from_dict(data["of"], base_dir), _real(data["t"], "t"))
    except (KeyError, TypeError) as e:
        raise SchemaError(f"bad {kind} function JSON: missing or malformed {e}")


def load_function(path: PathLike) -> EvaluableFunction:
    path = Path(path)
    return function_from_dict(load_json(path), base_dir=path.parent)


# ------------------- POINTS -------------------
def point_from_dict(data: dict) -> CPoint:
    """{"logmod": [...], "arg": [...]} or {"modulus": [...], "arg": [...]}; "-inf" marks z_j = 0."""
    if not isinstance(data, dict):
        raise SchemaError(f"point must be an object, got {data!r}")
    arg = data.get("arg")
    arg = None if arg is None else [_real(a, "arg") for a in arg]
    if "logmod" in data:
        return CPoint([_real(x, "logmod") for x in data["logmod"]], arg)
    if "modulus" in data:
        return CPoint.from_modulus([_real(x, "modulus") for x in data["modulus"]], arg)
    raise SchemaError("point needs 'logmod' or 'modulus'")


def load_points(path: PathLike) -> List[CPoint]:
    data = load_json(path)
    points = data.get("points") if isinstance(data, dict) else data
    if not isinstance(points, list) or not points:
        raise SchemaError("grid JSON needs a non-empty 'points' list")
    return [point_from_dict(p) for p in points]


def load_operator_config(path: PathLike) -> OperatorConfig:
    data = load_json(path)
    if not isinstance(data, dict):
        raise SchemaError("operator config must be an object")
    return OperatorConfig.from_dict(data)


# ------------------- REPORTS -------------------
def _sanitize_for_json(obj):
    """Làm sạch NaN/±inf và kiểu numpy trong cấu trúc lồng nhau để JSON hợp lệ."""
    if isinstance(obj, pd.DataFrame):
        return [_sanitize_for_json(row) for row in obj.to_dict(orient="records")]
    if isinstance(obj, np.ndarray):
        return _sanitize_for_json(obj.tolist())
    if isinstance(obj, (list, tuple)):
        return [_sanitize_for_json(item) for item in obj]
    if isinstance(obj, dict):
        return {str(k): _sanitize_for_json(v) for k, v in obj.items()}
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        value = float(obj)
        if np.isnan(value):
            return None
        if np.isinf(value):
            return "inf" if value > 0 else "-inf"
        return value
    if isinstance(obj, CPoint):
        return {"logmod": _sanitize_for_json(obj.logmod), "arg": _sanitize_for_json(obj.arg)}
    return obj


def write_report(report: Report, path: Optional[PathLike] = None) -> str:
    """
    CSV (exact column order, 17 significant digits) unless path ends in .json.
    Without a path the CSV text is returned.
    """
    if path is None:
        return report.to_csv()
    path = Path(path)
    if not path.parent.exists():
        raise BadParameters(f"output directory {path.parent} does not exist")
    if path.suffix.lower() == ".json":
        payload = {"name": report.name, "passed": report.passed, "columns": report.columns,
                   "rows": report.frame, "meta": report.meta}
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(_sanitize_for_json(payload), fh, indent=2, ensure_ascii=False)
            fh.write("\n")
    else:
        report.to_csv(path)
    logger.info(f"✅ Wrote {report.name} report ({len(report.frame)} rows) to {path}")
    return str(path)


def read_report(path: PathLike) -> Report:
    path = Path(path)
    if path.suffix.lower() != ".json":
        return Report.from_csv(path)
    data = load_json(path)
    frame = pd.DataFrame(data.get("rows", []), columns=data.get("columns"))
    return Report(name=data.get("name", path.stem), frame=frame, passed=bool(data.get("passed", True)),
                  meta=data.get("meta", {}))


# ------------------- ARG PARSING -------------------
def parse_floats(text: str) -> List[float]:
    """'1e1,1e2,1e3' -> [10.0, 100.0, 1000.0]."""
    try:
        values = [float(part) for part in text.split(",") if part.strip()]
    except ValueError as e:
        raise BadParameters(f"bad number list {text!r}: {e}")
    if not values:
        raise BadParameters("empty number list")
    return values


def parse_point(text: str) -> np.ndarray:
    return np.asarray(parse_floats(text), dtype=float)


def is_input_error(exc: BaseException) -> bool:
    return isinstance(exc, (LelongError, FileNotFoundError, json.JSONDecodeError))
