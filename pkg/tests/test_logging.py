import json
import logging

import pytest

from staged_pbr.monitoring.logging import (
    PackageFilter,
    _console_renderer,
    configure_logging,
    get_logger,
)


@pytest.fixture
def restore_logging():
    yield
    configure_logging(force=True)


def _record(name, level):
    return logging.LogRecord(name, level, __file__, 1, "msg", None, None)


def test_package_filter():
    keep = PackageFilter()
    assert keep.filter(_record("staged_pbr.core.shader", logging.DEBUG))
    assert not keep.filter(_record("imageio", logging.INFO))
    assert keep.filter(_record("imageio", logging.WARNING))


def test_console_line_layout():
    line = _console_renderer(
        None,
        "info",
        {"event": "estimator.stage.done", "level": "info", "logger": "staged_pbr.estimation.estimator",
         "loss": 0.123456789, "stage": "albedo", "timestamp": "x"},
    )
    assert "estimation.estimator" in line
    assert "estimator.stage.done" in line
    assert "loss=0.123457 stage=albedo" in line
    assert "timestamp" not in line


def test_json_sink(tmp_path, restore_logging):
    configure_logging("DEBUG", tmp_path / "logs", force=True)
    get_logger("staged_pbr.tests").info("unit.event", value=1.5)
    for handler in logging.getLogger().handlers:
        handler.flush()
    files = list((tmp_path / "logs").glob("staged-pbr-*.jsonl"))
    assert len(files) == 1
    entries = [json.loads(line) for line in files[0].read_text(encoding="utf-8").splitlines()]
    assert any(e["event"] == "unit.event" and e["value"] == 1.5 for e in entries)


def test_unknown_level_falls_back_to_info(restore_logging):
    configure_logging("chatty", force=True)
    assert logging.getLogger().level == logging.INFO

