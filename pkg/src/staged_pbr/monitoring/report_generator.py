"""CSV reports: per-step loss traces, evaluation results and paired-run margins."""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Iterable, Mapping, Sequence, Union

from staged_pbr.monitoring.logging import get_logger
from staged_pbr.monitoring.metrics import EvalReport

logger = get_logger(__name__)

TRACE_FIELDS = ("stage", "step", "pixel_term", "render_term", "total")
COMPARISON_FIELDS = ("seed", "progressive_mean", "joint_mean", "margin", "progressive_seconds", "joint_seconds")
FLOAT_FORMAT = "{:.9g}"

PathLike = Union[str, Path]


def _cell(value: object) -> str:
    if isinstance(value, float):
        return FLOAT_FORMAT.format(value)
    return str(value)


class ReportGenerator:
    """Write loss traces and evaluation reports under a base directory."""

    def __init__(self, base_path: PathLike) -> None:
        self.base_path = Path(base_path)
        self.base_path.mkdir(parents=True, exist_ok=True)

    def _write_rows(self, name: str, fields: Sequence[str], rows: Iterable[Mapping[str, object]]) -> tuple[Path, int]:
        path = self.base_path / name
        count = 0
        with path.open("w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(fields)
            for row in rows:
                writer.writerow([_cell(row[key]) for key in fields])
                count += 1
        return path, count

    def write_traces(self, rows: Iterable[Mapping[str, object]], name: str = "traces.csv") -> Path:
        path, count = self._write_rows(name, TRACE_FIELDS, rows)
        logger.info("report.traces", path=str(path), rows=count)
        return path

    def write_comparison(self, rows: Iterable[Mapping[str, object]], name: str = "comparison.csv") -> Path:
        """One row per seed: both mean material PSNRs, their margin and wall times."""
        path, count = self._write_rows(name, COMPARISON_FIELDS, rows)
        logger.info("report.comparison", path=str(path), rows=count)
        return path

    def write_eval(self, report: EvalReport, name: str = "report.csv") -> Path:
        return write_eval_csv(self.base_path / name, report)


def write_eval_csv(path: PathLike, report: EvalReport) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(report.header())
        writer.writerow([_cell(v) for v in report.values()])
    logger.info("report.eval", path=str(path), columns=len(report.header()))
    return path


def read_trace_csv(path: PathLike) -> list[dict[str, str]]:
    with Path(path).open(newline="", encoding="utf-8") as handle:
        return list(csv.DictReader(handle))


__all__ = ["ReportGenerator", "TRACE_FIELDS", "COMPARISON_FIELDS", "write_eval_csv", "read_trace_csv"]
