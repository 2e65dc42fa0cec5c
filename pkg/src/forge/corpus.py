"""Corpus ingestion, working-set sampling, and reverse-training export.

Input files are UTF-8 line-delimited JSON. Passage rows need at least a
"text" field ({id?, text, meta?}); supervised rows need "instruction" and
"output" ({task_id?, instruction, input?, output}). Malformed rows are
skipped and counted, never fatal: pipeline runs over web-scale corpora must
survive dirty data.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any

from .jsonl import LoadSummary, iter_jsonl_numbered
from .templates import GENERATION_BODIES, GenerationStyle, fill_corpus_slot


class Source(str, Enum):
    wikipedia = "wikipedia"
    c4 = "c4"
    supervised = "supervised"
    other = "other"


SOURCE_ORDER = [Source.wikipedia, Source.c4, Source.supervised, Source.other]

# Per-source sampling presets for the long-form working set (9,000 Wikipedia
# + 4,500 C4 passages = 13,500). Both names refer to the same preset.
SAMPLE_PRESETS: dict[str, dict[Source, int]] = {
    "longform-unsup": {Source.wikipedia: 9000, Source.c4: 4500},
    "longform-13500": {Source.wikipedia: 9000, Source.c4: 4500},
}


class CorpusError(Exception):
    pass


@dataclass(frozen=True)
class Passage:
    id: str
    text: str
    source: Source
    meta: dict[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.text.strip():
            raise ValueError("passage text must be non-empty after trimming")


@dataclass(frozen=True)
class SupervisedRecord:
    task_id: str
    instruction: str
    input: str | None
    output: str

    def __post_init__(self) -> None:
        if not self.instruction.strip():
            raise ValueError("instruction must be non-empty")
        if not self.output.strip():
            raise ValueError("output must be non-empty")


@dataclass(frozen=True)
class ReverseTrainingExample:
    prompt: str
    completion: str


def load_passages(path: str | Path, source_tag: Source | str) -> tuple[list[Passage], LoadSummary]:
    """Load one passage per valid line; ids default to "<source>-<line#>"."""
    source = Source(source_tag)
    summary = LoadSummary(str(path))
    passages: list[Passage] = []
    seen_ids: set[str] = set()
    try:
        rows = list(iter_jsonl_numbered(path, summary))
    except OSError as exc:
        raise CorpusError(f"cannot read passage file {path}: {exc}") from exc
    for line_no, row in rows:
        text = row.get("text")
        if not isinstance(text, str) or not text.strip():
            summary.skip(line_no, "missing or empty text field")
            continue
        passage_id = row.get("id")
        if passage_id is None:
            passage_id = f"{source.value}-{line_no}"
        passage_id = str(passage_id)
        if passage_id in seen_ids:
            summary.skip(line_no, f"duplicate id {passage_id!r}")
            continue
        meta = row.get("meta")
        if not isinstance(meta, dict):
            meta = {}
        seen_ids.add(passage_id)
        passages.append(Passage(id=passage_id, text=text, source=source, meta=meta))
        summary.loaded += 1
    return passages, summary


def load_supervised(path: str | Path) -> tuple[list[SupervisedRecord], LoadSummary]:
    """Load supervised task records; absent input stays absent, not ""."""
    summary = LoadSummary(str(path))
    records: list[SupervisedRecord] = []
    try:
        rows = list(iter_jsonl_numbered(path, summary))
    except OSError as exc:
        raise CorpusError(f"cannot read supervised file {path}: {exc}") from exc
    for line_no, row in rows:
        instruction = row.get("instruction")
        output = row.get("output")
        if not isinstance(instruction, str) or not instruction.strip():
            summary.skip(line_no, "missing instruction")
            continue
        if not isinstance(output, str) or not output.strip():
            summary.skip(line_no, "missing output")
            continue
        raw_input = row.get("input")
        input_text = raw_input if isinstance(raw_input, str) and raw_input.strip() else None
        task_id = str(row.get("task_id") or f"sup-{line_no}")
        records.append(
            SupervisedRecord(task_id=task_id, instruction=instruction, input=input_text, output=output)
        )
        summary.loaded += 1
    return records, summary


def sample_passages(
    passages: list[Passage],
    per_source_counts: dict[Source | str, int],
    seed: int,
) -> list[Passage]:
    """Sample uniformly without replacement per source, deterministically.

    The pool is sorted by id before drawing, so the result depends only on
    the pool's contents and the seed, never on input order. Output is
    concatenated in source-enum order, each block in sampled order.
    """
    requested = {Source(key): count for key, count in per_source_counts.items()}
    for source, count in requested.items():
        if count < 0:
            raise CorpusError(f"negative sample count for source {source.value}")
    pools: dict[Source, list[Passage]] = {source: [] for source in requested}
    for passage in passages:
        if passage.source in pools:
            pools[passage.source].append(passage)

    sampled: list[Passage] = []
    for source in SOURCE_ORDER:
        if source not in requested:
            continue
        count = requested[source]
        pool = sorted(pools[source], key=lambda p: p.id)
        if count > len(pool):
            shortfall = count - len(pool)
            raise CorpusError(
                f"source {source.value}: requested {count} passages but only "
                f"{len(pool)} available (short by {shortfall})"
            )
        if count == 0:
            continue
        rng = random.Random(f"{seed}:{source.value}")
        sampled.extend(rng.sample(pool, count))
    return sampled


def export_reverse_training(
    records: list[SupervisedRecord],
    style: GenerationStyle | str,
) -> list[ReverseTrainingExample]:
    """Turn (instruction, output) records into output-first training rows.

    The record's output fills the template's corpus slot to form the prompt;
    the completion is the original instruction verbatim. An external trainer
    consumes these to learn instruction generation.
    """
    body = GENERATION_BODIES[GenerationStyle(style)]
    return [
        ReverseTrainingExample(
            prompt=fill_corpus_slot(body, record.output),
            completion=record.instruction,
        )
        for record in records
    ]


def reverse_examples_to_rows(examples: list[ReverseTrainingExample]) -> list[dict[str, Any]]:
    return [{"prompt": ex.prompt, "completion": ex.completion} for ex in examples]
