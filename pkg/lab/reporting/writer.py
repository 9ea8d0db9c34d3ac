"""CSV, JSON and manifest emission."""

import json
from pathlib import Path
from typing import List, Tuple, Union

import pandas as pd
import structlog

from lab.models.experiment import RunManifest
from lab.models.reports import ConvergenceReport, ExperimentReport

logger = structlog.get_logger(__name__)

FLOAT_FORMAT = "%.17g"
CONVERGENCE_COLUMNS = ["step", "n", "lhs", "stderr", "rhs", "pass"]


def report_frame(report: ExperimentReport) -> pd.DataFrame:
    """One CSV row per report row; parameter columns sorted by name."""
    if isinstance(report, ConvergenceReport):
        records = [
            {
                "step": row.params.get("step", float(i)),
                "n": row.params.get("n"),
                "lhs": row.measured,
                "stderr": row.stderr,
                "rhs": row.bound,
                "pass": row.passed,
                "label": row.label,
            }
            for i, row in enumerate(report.rows)
        ]
        return pd.DataFrame.from_records(records, columns=CONVERGENCE_COLUMNS + ["label"])

    param_keys = sorted({key for row in report.rows for key in row.params})
    records = []
    for row in report.rows:
        record = {
            "label": row.label,
            "measured": row.measured,
            "stderr": row.stderr,
            "bound": row.bound,
            "tolerance": row.tolerance,
            "pass": row.passed,
        }
        record.update({key: row.params.get(key) for key in param_keys})
        record["note"] = row.note or ""
        records.append(record)
    columns = ["label", "measured", "stderr", "bound", "tolerance", "pass"] + param_keys + ["note"]
    return pd.DataFrame.from_records(records, columns=columns)


class ReportWriter:
    """Writes `<experiment_id>__<check_id>.csv/.json` and `manifest.json` under one directory."""

    def __init__(self, out_dir: Union[str, Path]):
        self.out_dir = Path(out_dir)
        self.logger = logger.bind(service="report_writer", out_dir=str(self.out_dir))

    def _ensure_dir(self) -> None:
        self.out_dir.mkdir(parents=True, exist_ok=True)

    def write_report(self, experiment_id: str, report: ExperimentReport) -> Tuple[Path, Path]:
        self._ensure_dir()
        stem = f"{experiment_id}__{report.check_id}"
        csv_path = self.out_dir / f"{stem}.csv"
        json_path = self.out_dir / f"{stem}.json"
        try:
            report_frame(report).to_csv(csv_path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
            json_path.write_text(report.model_dump_json(indent=2), encoding="utf-8")
        except OSError as e:
            self.logger.error("Failed to write report", check_id=report.check_id, error=str(e))
            raise
        self.logger.debug("Report written", check_id=report.check_id, rows=len(report.rows), passed=report.passed)
        return csv_path, json_path

    def write_reports(self, experiment_id: str, reports: List[ExperimentReport]) -> List[Tuple[Path, Path]]:
        return [self.write_report(experiment_id, report) for report in reports]

    def write_manifest(self, manifest: RunManifest) -> Path:
        """manifest.json with sorted keys."""
        self._ensure_dir()
        path = self.out_dir / "manifest.json"
        payload = json.loads(manifest.model_dump_json())
        path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        self.logger.info("Manifest written", path=str(path), passed=manifest.passed, checks=len(manifest.checks))
        return path
