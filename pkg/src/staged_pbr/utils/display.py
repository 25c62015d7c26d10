"""Shared formatting utilities for human-readable output."""

from __future__ import annotations

from typing import Iterable, Optional

from rich import box
from rich.table import Table

from staged_pbr.estimation.estimator import StageSummary
from staged_pbr.monitoring.metrics import EvalReport


def format_duration(seconds: Optional[float]) -> str:
    """Turn seconds into a compact human-readable duration string."""
    if seconds is None:
        return "—"
    if seconds < 60:
        return f"{seconds:.1f}s"

    seconds = int(abs(seconds))
    hours, remainder = divmod(seconds, 3600)
    minutes, secs = divmod(remainder, 60)

    parts: list[str] = []
    if hours:
        parts.append(f"{hours}h")
    if minutes:
        parts.append(f"{minutes}m")
    if secs or not parts:
        parts.append(f"{secs}s")
    return " ".join(parts)


def eval_table(report: EvalReport) -> Table:
    table = Table(box=box.ROUNDED, title="PSNR (dB)")
    for name in report.header():
        table.add_column(name, justify="right")
    table.add_row(*(f"{v:.2f}" for v in report.values()))
    return table


def stage_table(summaries: Iterable[StageSummary]) -> Table:
    table = Table(box=box.ROUNDED, title="Stages")
    table.add_column("Stage", style="bold cyan")
    table.add_column("Steps", justify="right")
    table.add_column("Loss before", justify="right")
    table.add_column("Loss after", justify="right")
    table.add_column("Time", justify="right", style="dim")
    for s in summaries:
        table.add_row(
            s.stage.value,
            str(s.steps),
            f"{s.initial_loss:.6g}",
            f"{s.final_loss:.6g}",
            format_duration(s.seconds),
        )
    return table


__all__ = ["format_duration", "eval_table", "stage_table"]
