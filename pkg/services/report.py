# services/report.py
from dataclasses import dataclass, field
from pathlib import Path
from typing import Union

import pandas as pd

CSV_FLOAT_FORMAT = "%.17g"
CONTINUITY_COLUMNS = ["radius", "value", "bound", "gap", "verdict"]


@dataclass
class Report:
    """
    Tabular result record: one DataFrame plus a pass/fail flag.
    meta carries scalar side results (verdicts, constants) that are not columns.
    """
    name: str
    frame: pd.DataFrame
    passed: bool = True
    meta: dict = field(default_factory=dict)

    @property
    def columns(self) -> list:
        return list(self.frame.columns)

    def to_csv(self, path: Union[str, Path, None] = None):
        return self.frame.to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT, lineterminator="\n")

    @classmethod
    def from_csv(cls, path: Union[str, Path], name: str = "") -> "Report":
        frame = pd.read_csv(path)
        return cls(name=name or Path(path).stem, frame=frame)


def continuity_frame(rows: list) -> pd.DataFrame:
    """Build a report frame with the fixed diagnostics column order."""
    return pd.DataFrame(rows, columns=CONTINUITY_COLUMNS)
