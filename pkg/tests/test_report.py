# tests/test_report.py
import numpy as np
import pandas as pd
import pytest

from services.errors import BadParameters
from services.report import CONTINUITY_COLUMNS, Report, continuity_frame
from services.settings import Settings, parallel_map


def test_report_csv_uses_seventeen_digits():
    report = Report(name="t", frame=pd.DataFrame({"radius": [0.1], "value": [1.0]}))
    assert report.to_csv() == "radius,value\n0.10000000000000001,1\n"


def test_report_csv_round_trip(tmp_path):
    frame = continuity_frame([
        {"radius": 10.0, "value": np.pi, "bound": np.e, "gap": np.pi - np.e, "verdict": "pass"},
        {"radius": 100.0, "value": 1.0 / 3.0, "bound": np.nan, "gap": np.nan, "verdict": "n/a"},
    ])
    path = tmp_path / "report.csv"
    Report(name="t", frame=frame).to_csv(path)
    again = Report.from_csv(path)
    assert again.name == "report"
    assert again.columns == CONTINUITY_COLUMNS
    assert np.allclose(again.frame["value"], frame["value"], rtol=1e-15, atol=0.0)
    assert np.isnan(again.frame["bound"].iloc[1])
    assert again.frame["verdict"].tolist() == ["pass", "n/a"]


def test_continuity_frame_column_order():
    frame = continuity_frame([{"verdict": "pass", "gap": 0.0, "bound": 1.0, "value": 1.0, "radius": 2.0}])
    assert list(frame.columns) == ["radius", "value", "bound", "gap", "verdict"]


def test_settings_from_env(monkeypatch):
    monkeypatch.setenv("LELONG_THREADS", "4")
    monkeypatch.setenv("LELONG_SEED", "7")
    monkeypatch.setenv("LELONG_LOG_LEVEL", "debug")
    assert Settings.from_env() == Settings(threads=4, seed=7, log_level="DEBUG")
    monkeypatch.setenv("LELONG_THREADS", "0")
    assert Settings.from_env().threads == 1


def test_settings_reject_non_integers(monkeypatch):
    monkeypatch.setenv("LELONG_SEED", "forty-two")
    with pytest.raises(BadParameters):
        Settings.from_env()


def test_parallel_map_preserves_order():
    items = list(range(50))
    assert parallel_map(lambda x: x * x, items, threads=4) == [x * x for x in items]
    assert parallel_map(lambda x: x, [], threads=4) == []
