"""Line-delimited JSON helpers shared by every stage.

Writers are atomic (write to a temp file, then rename) so an interrupted run
never leaves a half-written stage output behind; readers skip and count
malformed lines instead of aborting, because web-scale corpus files are dirty.
"""

from __future__ import annotations

import json
import os
from pathlib import Path
from typing import Any, Callable, Iterable, Iterator


class LoadSummary:
    """Bookkeeping for one file load: rows kept, rows skipped, first errors."""

    def __init__(self, path: str) -> None:
        self.path = path
        self.loaded = 0
        self.skipped = 0
        self.errors: list[str] = []

    def skip(self, line_no: int, reason: str) -> None:
        self.skipped += 1
        if len(self.errors) < 10:
            self.errors.append(f"line {line_no}: {reason}")

    def __repr__(self) -> str:
        return f"LoadSummary(path={self.path!r}, loaded={self.loaded}, skipped={self.skipped})"


def iter_jsonl_numbered(
    path: str | Path, summary: LoadSummary | None = None
) -> Iterator[tuple[int, dict[str, Any]]]:
    """Yield (line_no, record) per well-formed JSON object line; count skips."""
    with open(path, "r", encoding="utf-8") as handle:
        for line_no, line in enumerate(handle):
            stripped = line.strip()
            if not stripped:
                continue
            try:
                record = json.loads(stripped)
            except json.JSONDecodeError as exc:
                if summary is not None:
                    summary.skip(line_no, f"invalid JSON ({exc.msg})")
                continue
            if not isinstance(record, dict):
                if summary is not None:
                    summary.skip(line_no, "not a JSON object")
                continue
            yield line_no, record


def iter_jsonl(path: str | Path, summary: LoadSummary | None = None) -> Iterator[dict[str, Any]]:
    for _, record in iter_jsonl_numbered(path, summary):
        yield record


def read_jsonl(path: str | Path) -> list[dict[str, Any]]:
    return list(iter_jsonl(path))


def dumps(record: dict[str, Any]) -> str:
    # Field order is preserved and separators are fixed so that re-running a
    # stage with identical inputs reproduces byte-identical files.
    return json.dumps(record, ensure_ascii=False, separators=(", ", ": "))


def write_jsonl(path: str | Path, records: Iterable[dict[str, Any]]) -> int:
    """Atomically write records to path; returns the number of rows written."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    count = 0
    with open(tmp, "w", encoding="utf-8") as handle:
        for record in records:
            handle.write(dumps(record))
            handle.write("\n")
            count += 1
    os.replace(tmp, path)
    return count


def maybe_resume(path: str | Path, loader: Callable[[dict[str, Any]], Any]) -> list[Any] | None:
    """Load a completed stage output if it exists, else None (stage must run)."""
    path = Path(path)
    if not path.exists():
        return None
    return [loader(row) for row in iter_jsonl(path)]
