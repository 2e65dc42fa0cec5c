from __future__ import annotations

import json
from pathlib import Path

import pytest


@pytest.fixture
def write_jsonl_file(tmp_path: Path):
    """Write rows to a jsonl file under tmp_path and return its path."""

    def _write(name: str, rows: list[dict | str]) -> Path:
        path = tmp_path / name
        with open(path, "w", encoding="utf-8") as handle:
            for row in rows:
                handle.write(row if isinstance(row, str) else json.dumps(row))
                handle.write("\n")
        return path

    return _write


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One pass/fail line per acceptance criterion at the end of the run."""
    rows: list[tuple[str, str]] = []
    for outcome in ("passed", "failed", "error"):
        for report in terminalreporter.stats.get(outcome, []):
            nodeid = getattr(report, "nodeid", "")
            if "test_acceptance.py" in nodeid:
                rows.append((nodeid.split("::")[-1], "PASS" if outcome == "passed" else "FAIL"))
    if rows:
        terminalreporter.write_line("")
        terminalreporter.write_line("acceptance criteria:")
        for name, verdict in sorted(rows):
            terminalreporter.write_line(f"  {verdict}  {name}")
