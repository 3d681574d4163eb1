# tests/test_cli.py
import json

import numpy as np
import pytest

from api.app import describe, fixture_path
from api.app_utils import (
    function_from_dict, load_function, load_points, load_polytope, parse_floats, read_report, write_report,
)
from api.cli import run
from services.errors import BadParameters, SchemaError
from services.polytope import extreme_points
from services.report import Report, continuity_frame


def _run(capsys, *argv):
    code = run(list(argv))
    return code, capsys.readouterr().out


# ------------------- polytope -------------------
@pytest.mark.parametrize("name, expected", [("ex12", "false"), ("simplex2", "true"), ("box2", "true")])
def test_polytope_lower(capsys, name, expected):
    code, out = _run(capsys, "polytope", "--file", name, "--check", "lower")
    assert code == 0
    assert out.strip() == expected


def test_polytope_sigma_and_support(capsys):
    assert _run(capsys, "polytope", "--file", "ex12", "--check", "sigma") == (0, "4\n")
    assert _run(capsys, "polytope", "--file", "ex12", "--check", "support", "--point", "1,-1") == (0, "2\n")
    assert _run(capsys, "polytope", "--file", "simplex2", "--check", "contains", "--point", "0.6,0.6") == (0, "false\n")


def test_polytope_lower_hull(capsys):
    code, out = _run(capsys, "polytope", "--file", "ex12", "--check", "lower-hull")
    assert code == 0
    assert len(json.loads(out)["vertices"]) >= 4


def test_polytope_support_needs_a_point(capsys):
    assert run(["polytope", "--file", "ex12", "--check", "support"]) == 2


# ------------------- hs / reg -------------------
def test_hs_on_the_grid(capsys):
    code, out = _run(capsys, "hs", "--file", "simplex2", "--points", "grid")
    assert code == 0
    lines = out.strip().split("\n")
    assert lines[0] == "point,value"
    assert len(lines) == 5
    assert float(lines[1].split(",")[1]) == pytest.approx(np.log(5.0))


def test_reg_value(capsys):
    code, out = _run(capsys, "reg", "--fn", "tropical", "--config", "op_b")
    assert code == 0
    lines = out.strip().split("\n")
    assert lines[0] == "point,u,value"
    for line in lines[1:]:
        _, u, value = (float(x) for x in line.split(","))
        assert value == pytest.approx(u, abs=1e-9)


def test_reg_monotone_with_int_conv_c(capsys):
    code, out = _run(capsys, "reg", "--op", "c", "--delta", "0.25", "--fn", "tropical", "--grid", "grid",
                     "--config", "op_c", "--check", "monotone")
    assert code == 0
    assert out.startswith("delta,gap,max_increase,violations\n")


def test_reg_needs_an_operator(capsys):
    assert run(["reg", "--fn", "tropical"]) == 2


# ------------------- reports -------------------
def test_ex12_report_is_reproducible(tmp_path):
    first, second = tmp_path / "a.csv", tmp_path / "b.csv"
    assert run(["report", "ex12", "--out", str(first)]) == 0
    assert run(["report", "ex12", "--out", str(second)]) == 0
    assert first.read_bytes() == second.read_bytes()
    assert first.read_text().startswith("radius,value,bound,gap,verdict\n")


@pytest.mark.parametrize("argv", [
    ["report", "perera"],
    ["report", "hsmono"],
    ["report", "witness", "--file", "ex12"],
    ["report", "lipschitz", "--file", "simplex2", "--pairs", "200"],
])
def test_reports_pass(capsys, argv):
    code, out = _run(capsys, *argv)
    assert code == 0
    assert out.startswith("radius,value,bound,gap,verdict\n")


def test_witness_on_a_lower_set_is_an_input_error(capsys):
    assert run(["report", "witness", "--file", "simplex2"]) == 2
    assert "IsLowerSet" in capsys.readouterr().err


def test_json_report_round_trip(tmp_path):
    path = tmp_path / "perera.json"
    assert run(["report", "perera", "--out", str(path)]) == 0
    report = read_report(path)
    assert report.name == "perera"
    assert report.passed
    assert report.columns == ["radius", "value", "bound", "gap", "verdict"]
    assert report.frame["radius"].tolist() == [2.0, 4.0, 8.0]


def test_hsmono_on_nested_files(capsys):
    code, out = _run(capsys, "report", "hsmono", "--files", "box2", "simplex2")
    assert code == 0
    assert len(out.strip().split("\n")) == 3


# ------------------- dini -------------------
def test_dini_index_of_the_linear_fixture(capsys):
    assert _run(capsys, "dini", "--file", "dini") == (0, "10\n")


def test_dini_index_of_regularized_sequence(capsys):
    assert _run(capsys, "dini", "--file", "dini_rb") == (0, "0\n")


def test_dini_failed_check(tmp_path, capsys):
    path = tmp_path / "rising.json"
    path.write_text(json.dumps({"kind": "values", "f_values": [[0.0, 0.0], [1.0, 0.0]], "g": [2.0, 2.0]}))
    assert run(["dini", "--file", str(path)]) == 1


# ------------------- usage and input errors -------------------
def test_unknown_flag_is_a_usage_error():
    assert run(["polytope", "--file", "ex12", "--check", "lower", "--bogus"]) == 2


def test_help_and_version(capsys):
    assert run(["--help"]) == 0
    assert run(["--version"]) == 0
    assert "1.0.0" in capsys.readouterr().out


def test_missing_file(tmp_path):
    assert run(["polytope", "--file", str(tmp_path / "nope.json"), "--check", "lower"]) == 2


def test_bad_json(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{")
    assert run(["polytope", "--file", str(path), "--check", "lower"]) == 2


def test_missing_output_directory(tmp_path):
    assert run(["report", "perera", "--out", str(tmp_path / "missing" / "x.csv")]) == 2


def test_fixtures_command(capsys):
    code, out = _run(capsys, "fixtures")
    assert code == 0
    status = json.loads(out)
    assert status["status"] == "ok"
    assert all(status["fixtures"].values())
    assert describe()["version"] == "1.0.0"


# ------------------- loaders and writers -------------------
def test_shipped_fixtures_load():
    u = load_function(fixture_path("hs_ex12"))
    assert (u.growth.upper_const, u.growth.lower_const) == (0.0, 0.0)
    P = load_polytope(fixture_path("ex12"))
    assert len(extreme_points(P)) == 4
    assert not P.lower
    assert len(load_points(fixture_path("grid"))) == 4


def test_function_from_dict_errors():
    with pytest.raises(SchemaError):
        function_from_dict({"kind": "spline"})
    with pytest.raises(SchemaError):
        function_from_dict({"kind": "hs"})
    with pytest.raises(SchemaError):
        function_from_dict({"kind": "tropical", "pieces": [{"offset": 0.0}]})


def test_scaled_constant_function_from_dict():
    u = function_from_dict({"kind": "scaled", "t": 0.5, "of": {"kind": "constant", "value": 2.0, "n": 2}})
    assert u.n == 2


def test_write_and_read_csv_report(tmp_path):
    frame = continuity_frame([{"radius": 1.0, "value": 0.1, "bound": 0.2, "gap": 0.1, "verdict": "pass"}])
    path = tmp_path / "r.csv"
    write_report(Report(name="r", frame=frame), path)
    again = read_report(path)
    assert again.columns == list(frame.columns)
    assert again.frame["value"].iloc[0] == pytest.approx(0.1)
    with pytest.raises(BadParameters):
        write_report(Report(name="r", frame=frame), tmp_path / "missing" / "r.csv")


def test_parse_floats():
    assert parse_floats("1e1, 1e2") == [10.0, 100.0]
    with pytest.raises(BadParameters):
        parse_floats("1,x")
    with pytest.raises(BadParameters):
        parse_floats("")
