"""Final dataset assembly, following-prompt rendering, and export.

Records carry full provenance (source, extraction strategy, template style,
winning perplexity, candidates considered) and content-hash ids, so re-runs
produce stable ids and exact (instruction, output) duplicates collapse to a
single record. Generated records never have an input: outputs come from
corpora and the generation templates produce self-contained instructions.
The with-input template exists for supervised pass-through data.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from .jsonl import iter_jsonl, write_jsonl
from .templates import (
    FOLLOWING_WITH_INPUT,
    FOLLOWING_WITHOUT_INPUT,
    fill_following_slots,
)

EXPORT_FORMATS = ("pairs", "rendered")


class DatasetError(Exception):
    pass


@dataclass(frozen=True)
class FollowingTemplate:
    with_input: str = FOLLOWING_WITH_INPUT
    without_input: str = FOLLOWING_WITHOUT_INPUT


DEFAULT_FOLLOWING = FollowingTemplate()


@dataclass(frozen=True)
class Provenance:
    source: str
    strategy: str
    style: str
    ppl: float | None
    k_considered: int

    def __post_init__(self) -> None:
        if self.ppl is not None and self.ppl < 1.0:
            raise ValueError("provenance ppl must be >= 1 when present")
        if self.k_considered < 1:
            raise ValueError("k_considered must be >= 1")

    def to_dict(self) -> dict[str, Any]:
        return {
            "source": self.source,
            "strategy": self.strategy,
            "style": self.style,
            "ppl": self.ppl,
            "k_considered": self.k_considered,
        }


@dataclass(frozen=True)
class InstructionRecord:
    id: str
    instruction: str
    input: str | None
    output: str
    provenance: Provenance

    def __post_init__(self) -> None:
        if not self.instruction.strip():
            raise ValueError("instruction must be non-empty")
        if not self.output.strip():
            raise ValueError("output must be non-empty")


@dataclass(frozen=True)
class WinnerRecord:
    """A filtered winner joined back to its output; the unit assemble() eats."""

    output_ref: str
    instruction: str
    output: str
    source: str
    strategy: str
    style: str
    ppl: float | None
    k_considered: int


def record_id(instruction: str, output: str) -> str:
    digest = hashlib.sha256(f"{instruction}\x1f{output}".encode("utf-8")).hexdigest()
    return digest[:16]


def assemble(winners: list[WinnerRecord]) -> tuple[list[InstructionRecord], int]:
    """One record per winner, minus exact (instruction, output) duplicates.

    Returns (records, dedup_count); the first occurrence of a duplicate pair
    wins, so assembly is deterministic for a fixed winner order.
    """
    records: list[InstructionRecord] = []
    seen: set[tuple[str, str]] = set()
    deduped = 0
    for winner in winners:
        key = (winner.instruction, winner.output)
        if key in seen:
            deduped += 1
            continue
        seen.add(key)
        records.append(
            InstructionRecord(
                id=record_id(winner.instruction, winner.output),
                instruction=winner.instruction,
                input=None,
                output=winner.output,
                provenance=Provenance(
                    source=winner.source,
                    strategy=winner.strategy,
                    style=winner.style,
                    ppl=winner.ppl,
                    k_considered=winner.k_considered,
                ),
            )
        )
    return records, deduped


def render_following(instruction: str, input_text: str | None = None,
                     templates: FollowingTemplate = DEFAULT_FOLLOWING) -> str:
    if input_text is None:
        return fill_following_slots(templates.without_input, instruction)
    return fill_following_slots(templates.with_input, instruction, input_text)


def render_following_prompt(record: InstructionRecord,
                            templates: FollowingTemplate = DEFAULT_FOLLOWING) -> str:
    """with_input template when the record has an input, else without_input."""
    return render_following(record.instruction, record.input, templates)


def record_to_row(record: InstructionRecord) -> dict[str, Any]:
    return {
        "id": record.id,
        "instruction": record.instruction,
        "input": record.input,
        "output": record.output,
        "provenance": record.provenance.to_dict(),
    }


def row_to_record(row: dict[str, Any]) -> InstructionRecord:
    provenance = row.get("provenance") or {}
    return InstructionRecord(
        id=str(row["id"]),
        instruction=row["instruction"],
        input=row.get("input"),
        output=row["output"],
        provenance=Provenance(
            source=provenance.get("source", "other"),
            strategy=provenance.get("strategy", "full_passage"),
            style=provenance.get("style", "instruction_answer"),
            ppl=provenance.get("ppl"),
            k_considered=int(provenance.get("k_considered", 1)),
        ),
    )


def export(
    records: list[InstructionRecord],
    path: str | Path,
    format: str = "pairs",
    allow_empty: bool = False,
) -> int:
    """Write records as line-delimited JSON; returns rows written.

    "pairs" keeps the structured fields for re-import; "rendered" emits
    {prompt, completion} rows ready for any trainer, where the completion is
    the record's output verbatim.
    """
    if format not in EXPORT_FORMATS:
        raise DatasetError(f"unknown export format {format!r}")
    if not records and not allow_empty:
        raise DatasetError("refusing to export an empty dataset (pass allow_empty)")
    if format == "pairs":
        rows = (record_to_row(record) for record in records)
    else:
        rows = (
            {"prompt": render_following_prompt(record), "completion": record.output}
            for record in records
        )
    try:
        return write_jsonl(path, rows)
    except OSError as exc:
        raise DatasetError(f"cannot write export to {path}: {exc}") from exc


def load_records(path: str | Path) -> list[InstructionRecord]:
    """Re-import a pairs-format export; inverse of export(..., "pairs")."""
    return [row_to_record(row) for row in iter_jsonl(path)]
