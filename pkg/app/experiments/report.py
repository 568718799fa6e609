"""
Experiment reports: named checks with explicit tolerances, written as versioned JSON.
"""
import json
import math
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Literal, Union

from pydantic import BaseModel, Field

from app.core.prometheus import record_check

SCHEMA_VERSION = 1


class Comparison(str, Enum):
    AT_MOST = "<="
    AT_LEAST = ">="

    def holds(self, value: float, tolerance: float) -> bool:
        if math.isnan(value):
            return False
        if self is Comparison.AT_MOST:
            return value <= tolerance
        return value >= tolerance


class CheckRecord(BaseModel):
    name: str
    value: float
    tolerance: float
    comparison: Comparison = Comparison.AT_MOST
    passed: bool
    gating: bool = True


class ExperimentReport(BaseModel):
    schema_version: Literal[1] = SCHEMA_VERSION
    experiment: str
    seed: int
    samples: int
    config: Dict[str, Any]
    checks: List[CheckRecord] = Field(default_factory=list)
    wall_time: float = Field(default=0.0, exclude=True)

    def check(
        self,
        name: str,
        value: float,
        tolerance: float,
        comparison: Comparison = Comparison.AT_MOST,
        gating: bool = True,
    ) -> CheckRecord:
        """Evaluate value against tolerance and append the record."""
        value = float(value)
        record = CheckRecord(
            name=name,
            value=value,
            tolerance=float(tolerance),
            comparison=comparison,
            passed=comparison.holds(value, tolerance),
            gating=gating,
        )
        self.checks.append(record)
        record_check(self.experiment, record.passed)
        return record

    @property
    def failures(self) -> List[CheckRecord]:
        return [record for record in self.checks if record.gating and not record.passed]

    @property
    def passed(self) -> bool:
        return not self.failures

    def write(self, out_dir: Union[str, Path]):
        """report.json holds everything but wall time, which goes to timing.json."""
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(self.model_dump_json(indent=2))
        (out / "timing.json").write_text(json.dumps({"experiment": self.experiment, "wall_time": self.wall_time}))
