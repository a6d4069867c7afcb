import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Union
from loguru import logger

from src.davis.certificates import InequalityRow

CSV_COLUMNS = ["instance_id", "check", "p", "q", "lhs", "rhs", "constant", "ratio", "pass", "seed"]
GLOBAL_ID = "global"


@dataclass
class ReportRow:
    instance_id: Union[int, str]
    seed: int
    row: InequalityRow

    @property
    def failed(self) -> bool:
        return self.row.asserted and not self.row.passed

    def as_csv(self) -> List[str]:
        r = self.row
        return [str(self.instance_id), r.check, _fmt(r.p), _fmt(r.q), _fmt(r.lhs), _fmt(r.rhs),
                _fmt(r.constant), _fmt(r.ratio), "true" if r.passed else "false", str(self.seed)]


def _fmt(value: float) -> str:
    """Shortest round-trip representation; identical input gives identical text."""
    value = float(value)
    if math.isnan(value):
        return "nan"
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return repr(value)


@dataclass
class CheckReport:
    """All rows of a run plus the per-check family summary."""
    rows: List[ReportRow] = field(default_factory=list)
    runtime: float = 0.0
    check_runtime: Dict[str, float] = field(default_factory=dict)

    @property
    def failures(self) -> List[ReportRow]:
        return [r for r in self.rows if r.failed]

    @property
    def passed(self) -> bool:
        return not self.failures

    def summary(self) -> Dict[str, Dict]:
        """Per check: row count, asserted failures, max ratio and the seed that produced it."""
        families: Dict[str, Dict] = {}
        for item in self.rows:
            r = item.row
            family = families.setdefault(r.check, {
                "rows": 0, "asserted": r.asserted, "failures": 0, "failed_seeds": [],
                "max_ratio": None, "argmax_seed": None, "argmax_instance": None,
            })
            family["rows"] += 1
            if item.failed:
                family["failures"] += 1
                family["failed_seeds"].append(item.seed)
            ratio = r.ratio
            if math.isfinite(ratio) and (family["max_ratio"] is None or ratio > family["max_ratio"]):
                family["max_ratio"] = ratio
                family["argmax_seed"] = item.seed
                family["argmax_instance"] = item.instance_id
        return families


class ReportStore:
    """Flat-file output: the CSV row table and a JSON summary under one directory."""

    def __init__(self, out_dir: Union[str, Path] = "reports"):
        self.out_dir = Path(out_dir)
        self.init_store()

    def init_store(self):
        try:
            self.out_dir.mkdir(parents=True, exist_ok=True)
        except OSError as e:
            logger.error(f"Cannot create report directory {self.out_dir}: {e}")
            raise

    def write_csv(self, report: CheckReport, name: str = "report.csv") -> Path:
        path = self.out_dir / name
        with path.open("w", newline="") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(CSV_COLUMNS)
            for item in report.rows:
                writer.writerow(item.as_csv())
        logger.info(f"Wrote {len(report.rows)} rows to {path}")
        return path

    def write_json(self, report: CheckReport, name: str = "summary.json", include_rows: bool = False) -> Path:
        path = self.out_dir / name
        payload = {
            "passed": report.passed,
            "rows": len(report.rows),
            "failures": len(report.failures),
            "runtime_seconds": report.runtime,
            "check_runtime_seconds": report.check_runtime,
            "checks": report.summary(),
        }
        if include_rows:
            payload["table"] = [dict(zip(CSV_COLUMNS, item.as_csv())) for item in report.rows]
        path.write_text(json.dumps(payload, indent=2, default=str) + "\n")
        logger.info(f"Wrote summary to {path}")
        return path

    def write(self, report: CheckReport, fmt: str = "csv") -> List[Path]:
        """CSV table plus JSON summary; format "json" puts the table inside the summary instead."""
        if fmt == "json":
            return [self.write_json(report, include_rows=True)]
        return [self.write_csv(report), self.write_json(report)]
