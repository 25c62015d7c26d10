"""Structured logging for staged-pbr.

Events are structlog records with dotted names (``estimator.stage.done``)
and key=value context. They render through Rich on stderr, so stdout stays
free for command summaries, and optionally as JSON lines under a log
directory.
"""

from __future__ import annotations

import logging
import os
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, Iterable, Optional

import structlog
from rich.console import Console
from structlog.contextvars import merge_contextvars

__all__ = [
    "configure_logging",
    "get_logger",
    "logger",
]

LEVEL_ENV_VAR = "STAGED_PBR_LOG_LEVEL"
DIR_ENV_VAR = "STAGED_PBR_LOG_DIR"
PACKAGE_PREFIX = "staged_pbr"

_CONFIGURED = False
_CONSOLE = Console(soft_wrap=True, stderr=True)

_LEVEL_STYLES: Dict[str, str] = {
    "CRITICAL": "bold white on red",
    "ERROR": "bold red",
    "WARNING": "bold yellow",
    "INFO": "bold blue",
    "DEBUG": "dim cyan",
}


class PackageFilter(logging.Filter):
    """Pass every staged_pbr record and only warnings from other libraries."""

    def filter(self, record: logging.LogRecord) -> bool:
        return record.name.startswith(PACKAGE_PREFIX) or record.levelno >= logging.WARNING


class RichConsoleHandler(logging.Handler):
    def __init__(self, console: Console = _CONSOLE) -> None:
        super().__init__()
        self.console = console

    def emit(self, record: logging.LogRecord) -> None:  # pragma: no cover - thin wrapper
        try:
            self.console.print(self.format(record), markup=True, highlight=False, overflow="ignore")
        except Exception:
            self.handleError(record)


def _format_value(value: Any) -> str:
    if isinstance(value, float):
        return f"{value:.6g}"
    if isinstance(value, (list, tuple, dict)):
        return repr(value)
    if isinstance(value, str) and " " in value:
        return f'"{value}"'
    return str(value)


def _format_pairs(pairs: Iterable[tuple[str, Any]]) -> str:
    return " ".join(f"{key}={_format_value(value)}" for key, value in pairs)


def _console_renderer(logger: logging.Logger, name: str, event_dict: Dict[str, Any]) -> str:
    event_dict.pop("timestamp", None)
    level = str(event_dict.pop("level", "info")).upper()
    component = str(event_dict.pop("logger", name)).removeprefix(PACKAGE_PREFIX + ".")
    event = event_dict.pop("event", "")

    style = _LEVEL_STYLES.get(level, "white")
    label = "WARN" if level == "WARNING" else level[:4]
    prefix = f"[dim]{datetime.now():%H:%M:%S}[/] [{style}]{label:<4}[/] [magenta]{component}[/]"
    pairs = _format_pairs(sorted(event_dict.items()))
    return f"{prefix} {event} [dim]{pairs}[/]" if pairs else f"{prefix} {event}"


def _processors() -> list[Any]:
    return [
        merge_contextvars,
        structlog.stdlib.add_logger_name,
        structlog.processors.add_log_level,
        structlog.processors.TimeStamper(fmt="iso", key="timestamp"),
        structlog.processors.StackInfoRenderer(),
        structlog.processors.format_exc_info,
    ]


def configure_logging(
    level: Optional[str] = None,
    log_dir: Optional[Path | str] = None,
    *,
    force: bool = False,
) -> None:
    """Install the console (and optional JSONL file) handlers.

    The first call wins unless ``force`` is set; the CLI forces a second
    configuration once the YAML settings and flags are known.
    """
    global _CONFIGURED
    if _CONFIGURED and not force:
        return

    resolved_level = str(level or os.getenv(LEVEL_ENV_VAR, "INFO")).upper()
    if resolved_level not in logging.getLevelNamesMapping():
        resolved_level = "INFO"

    console_handler = RichConsoleHandler()
    console_handler.addFilter(PackageFilter())
    console_handler.setFormatter(
        structlog.stdlib.ProcessorFormatter(processor=_console_renderer, foreign_pre_chain=_processors())
    )
    handlers: list[logging.Handler] = [console_handler]

    directory_hint = log_dir or os.getenv(DIR_ENV_VAR)
    if directory_hint:
        directory = Path(directory_hint).expanduser().resolve()
        directory.mkdir(parents=True, exist_ok=True)
        file_handler = logging.FileHandler(directory / f"staged-pbr-{datetime.now():%Y%m%d}.jsonl", encoding="utf-8")
        file_handler.setFormatter(
            structlog.stdlib.ProcessorFormatter(
                processor=structlog.processors.JSONRenderer(sort_keys=True),
                foreign_pre_chain=_processors(),
            )
        )
        handlers.append(file_handler)

    logging.basicConfig(level=getattr(logging, resolved_level), handlers=handlers, force=True)

    structlog.configure(
        processors=_processors() + [structlog.stdlib.ProcessorFormatter.wrap_for_formatter],
        logger_factory=structlog.stdlib.LoggerFactory(),
        wrapper_class=structlog.stdlib.BoundLogger,
        cache_logger_on_first_use=True,
    )
    _CONFIGURED = True


def get_logger(name: Optional[str] = None, **context: Any) -> structlog.stdlib.BoundLogger:
    """Return a structlog logger bound to the given name and context."""
    configure_logging()
    base = structlog.get_logger(name or PACKAGE_PREFIX)
    return base.bind(**context) if context else base


logger = get_logger()
