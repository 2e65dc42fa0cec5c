"""One-shot pipeline: ingest -> sample -> extract -> generate -> filter ->
assemble -> export, with resumable intermediates.

Every stage writes its full output atomically as line-delimited JSON inside
the run's output directory, so an aborted run leaves only completed stages
behind and a re-run picks up from the first missing file. A lock file keeps
two runs out of the same directory. All randomness derives from the config
seed, so a mock-backend run is byte-reproducible end to end.
"""

from __future__ import annotations

import json
import logging
import os
import time
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .backend import GenerationBackend, run_bounded
from .config import PipelineConfig
from .corpus import Passage, Source, load_passages, load_supervised, sample_passages
from .dataset import WinnerRecord, assemble, export
from .extraction import Fragment, Strategy, derive_seed, extract
from .filtering import score_candidates
from .generation import CandidateInstruction, generate_candidates_with_report
from .jsonl import iter_jsonl, write_jsonl
from .keywords import KeywordParams
from .templates import GenerationStyle

logger = logging.getLogger(__name__)

PASSAGES_FILE = "passages.jsonl"
SAMPLED_FILE = "sampled.jsonl"
FRAGMENTS_FILE = "fragments.jsonl"
CANDIDATES_FILE = "candidates.jsonl"
WINNERS_FILE = "winners.jsonl"
SCORE_REPORT_FILE = "score_report.jsonl"
SUMMARY_FILE = "summary.json"
LOCK_FILE = ".forge.lock"


class StageError(Exception):
    def __init__(self, stage: str, message: str) -> None:
        super().__init__(f"[{stage}] {message}")
        self.stage = stage


@dataclass
class RunSummary:
    out_dir: str
    export_path: str = ""
    stages: dict[str, dict[str, Any]] = field(default_factory=dict)

    def record(self, stage: str, seconds: float, **counts: Any) -> None:
        self.stages[stage] = {**counts, "seconds": round(seconds, 3)}

    def to_dict(self) -> dict[str, Any]:
        return {"out_dir": self.out_dir, "export": self.export_path, "stages": self.stages}


def _passage_row(passage: Passage) -> dict[str, Any]:
    return {
        "id": passage.id,
        "text": passage.text,
        "source": passage.source.value,
        "meta": passage.meta,
    }


def _row_passage(row: dict[str, Any]) -> Passage:
    return Passage(
        id=str(row["id"]),
        text=row["text"],
        source=Source(row.get("source", "other")),
        meta=row.get("meta") or {},
    )


def _fragment_row(fragment: Fragment, source: Source) -> dict[str, Any]:
    return {
        "passage_id": fragment.passage_id,
        "text": fragment.text,
        "strategy": fragment.strategy.value,
        "span": list(fragment.span) if fragment.span else None,
        "source": source.value,
    }


def _row_fragment(row: dict[str, Any]) -> tuple[Fragment, Source]:
    span = row.get("span")
    fragment = Fragment(
        passage_id=str(row["passage_id"]),
        text=row["text"],
        strategy=Strategy(row["strategy"]),
        span=(span[0], span[1]) if span else None,
    )
    return fragment, Source(row.get("source", "other"))


def _candidate_row(candidate: CandidateInstruction) -> dict[str, Any]:
    return {
        "output_ref": candidate.output_ref,
        "text": candidate.text,
        "style": candidate.style.value,
        "raw": candidate.raw,
    }


def _row_candidate(row: dict[str, Any]) -> CandidateInstruction:
    return CandidateInstruction(
        output_ref=str(row["output_ref"]),
        text=row["text"],
        style=GenerationStyle(row["style"]),
        raw=row.get("raw", row["text"]),
    )


def _winner_row(winner: WinnerRecord) -> dict[str, Any]:
    return {
        "output_ref": winner.output_ref,
        "instruction": winner.instruction,
        "output": winner.output,
        "source": winner.source,
        "strategy": winner.strategy,
        "style": winner.style,
        "ppl": winner.ppl,
        "k_considered": winner.k_considered,
    }


def row_winner(row: dict[str, Any]) -> WinnerRecord:
    return WinnerRecord(
        output_ref=str(row["output_ref"]),
        instruction=row["instruction"],
        output=row["output"],
        source=row.get("source", "other"),
        strategy=row.get("strategy", "full_passage"),
        style=row.get("style", "instruction_answer"),
        ppl=row.get("ppl"),
        k_considered=int(row.get("k_considered", 1)),
    )


def _stage_ingest(config: PipelineConfig, out: Path, resume: bool, summary: RunSummary) -> list[Passage]:
    path = out / PASSAGES_FILE
    start = time.perf_counter()
    if resume and path.exists():
        passages = [_row_passage(row) for row in iter_jsonl(path)]
        summary.record("ingest", time.perf_counter() - start, loaded=len(passages), skipped=0, resumed=True)
        return passages
    passages: list[Passage] = []
    skipped = 0
    seen: set[str] = set()
    for entry in config.passage_inputs:
        try:
            loaded, load_summary = load_passages(entry.path, entry.source)
        except Exception as exc:
            raise StageError("ingest", str(exc)) from exc
        skipped += load_summary.skipped
        for passage in loaded:
            if passage.id in seen:
                skipped += 1
                continue
            seen.add(passage.id)
            passages.append(passage)
    for sup_path in config.supervised_inputs:
        try:
            records, load_summary = load_supervised(sup_path)
        except Exception as exc:
            raise StageError("ingest", str(exc)) from exc
        skipped += load_summary.skipped
        for record in records:
            passage_id = f"supervised-{record.task_id}"
            if passage_id in seen:
                skipped += 1
                continue
            seen.add(passage_id)
            # Supervised outputs become passages: they are already curated
            # extracts, so they flow through the same downstream stages.
            passages.append(
                Passage(id=passage_id, text=record.output, source=Source.supervised)
            )
    write_jsonl(path, (_passage_row(p) for p in passages))
    summary.record("ingest", time.perf_counter() - start, loaded=len(passages), skipped=skipped)
    return passages


def _stage_sample(
    config: PipelineConfig, passages: list[Passage], out: Path, resume: bool, summary: RunSummary
) -> list[Passage]:
    path = out / SAMPLED_FILE
    start = time.perf_counter()
    if resume and path.exists():
        sampled = [_row_passage(row) for row in iter_jsonl(path)]
        summary.record("sample", time.perf_counter() - start, sampled=len(sampled), resumed=True)
        return sampled
    if config.sample_counts is None:
        sampled = list(passages)
    else:
        try:
            sampled = sample_passages(passages, dict(config.sample_counts), config.seed)
        except Exception as exc:
            raise StageError("sample", str(exc)) from exc
    write_jsonl(path, (_passage_row(p) for p in sampled))
    summary.record("sample", time.perf_counter() - start, sampled=len(sampled))
    return sampled


def _stage_extract(
    config: PipelineConfig,
    passages: list[Passage],
    backend: GenerationBackend,
    out: Path,
    resume: bool,
    summary: RunSummary,
) -> list[tuple[Fragment, Source]]:
    path = out / FRAGMENTS_FILE
    start = time.perf_counter()
    if resume and path.exists():
        fragments = [_row_fragment(row) for row in iter_jsonl(path)]
        summary.record("extract", time.perf_counter() - start, extracted=len(fragments), failures=0, resumed=True)
        return fragments
    keyword_params = KeywordParams(top_k=config.keyword_top_k)

    def one(passage: Passage) -> Fragment:
        return extract(
            passage,
            config.strategy,
            seed=config.seed,
            keyword_params=keyword_params,
            backend=backend,
            sampling=config.sampling,
        )

    items = {passage.id: passage for passage in passages}
    workers = backend.max_in_flight if config.strategy is Strategy.llm_extraction else 1
    results, failures = run_bounded(one, items, workers)
    for passage_id, exc in failures.items():
        logger.warning("extraction failed for %s: %s", passage_id, exc)
    fragments = [
        (results[passage.id], passage.source) for passage in passages if passage.id in results
    ]
    write_jsonl(path, (_fragment_row(frag, source) for frag, source in fragments))
    summary.record(
        "extract", time.perf_counter() - start, extracted=len(fragments), failures=len(failures)
    )
    return fragments


def _stage_generate(
    config: PipelineConfig,
    fragments: list[tuple[Fragment, Source]],
    backend: GenerationBackend,
    out: Path,
    resume: bool,
    summary: RunSummary,
) -> list[CandidateInstruction]:
    path = out / CANDIDATES_FILE
    start = time.perf_counter()
    if resume and path.exists():
        candidates = [_row_candidate(row) for row in iter_jsonl(path)]
        summary.record(
            "generate", time.perf_counter() - start,
            outputs=len(fragments), candidates=len(candidates), dropped={}, resumed=True,
        )
        return candidates

    def one(item: tuple[Fragment, Source]) -> tuple[list[CandidateInstruction], Counter[str]]:
        fragment, source = item
        # Supervised outputs presume a self-contained task, so only the
        # instruction-answer template applies; document-like outputs cycle
        # through every configured style.
        styles = (
            [GenerationStyle.instruction_answer]
            if source is Source.supervised
            else list(config.styles)
        )
        params = config.sampling.with_seed(derive_seed(config.seed, f"gen:{fragment.passage_id}"))
        return generate_candidates_with_report(
            fragment.text, config.k, styles, backend, params, output_ref=fragment.passage_id
        )

    items = {fragment.passage_id: (fragment, source) for fragment, source in fragments}
    results, failures = run_bounded(one, items, backend.max_in_flight)
    if failures:
        ref, exc = next(iter(failures.items()))
        raise StageError("generate", f"backend failure for output {ref}: {exc}")
    candidates: list[CandidateInstruction] = []
    drops: Counter[str] = Counter()
    for fragment, _ in fragments:
        kept, dropped = results[fragment.passage_id]
        candidates.extend(kept)
        drops.update(dropped)
    write_jsonl(path, (_candidate_row(c) for c in candidates))
    summary.record(
        "generate", time.perf_counter() - start,
        outputs=len(fragments), candidates=len(candidates), dropped=dict(sorted(drops.items())),
    )
    return candidates


def _stage_filter(
    config: PipelineConfig,
    fragments: list[tuple[Fragment, Source]],
    candidates: list[CandidateInstruction],
    backend: GenerationBackend | None,
    out: Path,
    resume: bool,
    summary: RunSummary,
) -> list[WinnerRecord]:
    path = out / WINNERS_FILE
    report_path = out / SCORE_REPORT_FILE
    start = time.perf_counter()
    if resume and path.exists():
        winners = [row_winner(row) for row in iter_jsonl(path)]
        summary.record("filter", time.perf_counter() - start, selected=len(winners), resumed=True)
        return winners

    by_ref: dict[str, list[CandidateInstruction]] = {}
    for candidate in candidates:
        by_ref.setdefault(candidate.output_ref, []).append(candidate)
    fragment_info = {fragment.passage_id: (fragment, source) for fragment, source in fragments}

    report_rows: list[dict[str, Any]] = []
    winners: list[WinnerRecord] = []
    scored_count = 0
    failure_count = 0
    unscorable = 0

    def winner_from(candidate: CandidateInstruction, fragment: Fragment, source: Source,
                    ppl: float | None, considered: int) -> WinnerRecord:
        return WinnerRecord(
            output_ref=fragment.passage_id,
            instruction=candidate.text,
            output=fragment.text,
            source=source.value,
            strategy=fragment.strategy.value,
            style=candidate.style.value,
            ppl=ppl,
            k_considered=considered,
        )

    if not config.filtering_enabled:
        for fragment, source in fragments:
            group = by_ref.get(fragment.passage_id)
            if not group:
                continue
            winners.append(winner_from(group[0], fragment, source, None, len(group)))
        write_jsonl(report_path, iter(()))
    else:
        assert backend is not None

        def one(group: list[CandidateInstruction]) -> tuple[Any, Any]:
            output_text = fragment_info[group[0].output_ref][0].text
            return score_candidates(group, output_text, backend, bare=config.bare_instruction)

        items = {ref: group for ref, group in by_ref.items()}
        results, failures = run_bounded(one, items, backend.max_in_flight)
        if failures:
            ref, exc = next(iter(failures.items()))
            raise StageError("filter", f"scoring failed for output {ref}: {exc}")
        for fragment, source in fragments:
            group = by_ref.get(fragment.passage_id)
            if not group:
                continue
            scored, failed = results[fragment.passage_id]
            scored_count += len(scored)
            failure_count += len(failed)
            for entry in scored:
                report_rows.append({
                    "output_ref": fragment.passage_id,
                    "candidate": entry.candidate.text,
                    "style": entry.candidate.style.value,
                    "ppl": entry.ppl,
                    "token_count": entry.token_count,
                })
            for candidate, error in failed:
                report_rows.append({
                    "output_ref": fragment.passage_id,
                    "candidate": candidate.text,
                    "style": candidate.style.value,
                    "ppl": None,
                    "error": error,
                })
            if not scored:
                unscorable += 1
                logger.warning("no scorable candidate for output %s", fragment.passage_id)
                continue
            best = scored[0]
            for entry in scored[1:]:
                if entry.ppl < best.ppl:
                    best = entry
            winners.append(winner_from(best.candidate, fragment, source, best.ppl, len(group)))
        write_jsonl(report_path, iter(report_rows))

    write_jsonl(path, (_winner_row(w) for w in winners))
    summary.record(
        "filter", time.perf_counter() - start,
        scored=scored_count, scoring_failures=failure_count,
        selected=len(winners), unscorable_outputs=unscorable,
    )
    return winners


def _stage_build(
    config: PipelineConfig, winners: list[WinnerRecord], out: Path, summary: RunSummary
) -> Path:
    start = time.perf_counter()
    records, deduped = assemble(winners)
    export_path = out / config.export_name
    try:
        exported = export(records, export_path, format=config.export_format, allow_empty=True)
    except Exception as exc:
        raise StageError("build", str(exc)) from exc
    summary.record(
        "build", time.perf_counter() - start,
        selected=len(winners), deduped=deduped, exported=exported,
    )
    return export_path


def run_pipeline(config: PipelineConfig, resume: bool = True) -> RunSummary:
    """Execute every stage; returns the run summary (also written to disk)."""
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    lock_path = out / LOCK_FILE
    try:
        lock = open(lock_path, "x", encoding="utf-8")
    except FileExistsError:
        raise StageError(
            "lock", f"output directory {out} is locked by another run ({lock_path})"
        ) from None

    summary = RunSummary(out_dir=str(out))
    try:
        lock.write(f"pid={os.getpid()}\n")
        lock.flush()

        generate_backend = config.generate_backend()
        score_backend = config.score_backend() if config.filtering_enabled else None
        probe_start = time.perf_counter()
        if not generate_backend.health():
            raise StageError("health", f"generate backend {config.generate_url} is unhealthy")
        if score_backend is not None and not score_backend.health():
            raise StageError("health", f"score backend {config.score_url} is unhealthy")
        summary.record("health", time.perf_counter() - probe_start, ok=True)

        passages = _stage_ingest(config, out, resume, summary)
        sampled = _stage_sample(config, passages, out, resume, summary)
        fragments = _stage_extract(config, sampled, generate_backend, out, resume, summary)
        candidates = _stage_generate(config, fragments, generate_backend, out, resume, summary)
        winners = _stage_filter(config, fragments, candidates, score_backend, out, resume, summary)
        export_path = _stage_build(config, winners, out, summary)
        summary.export_path = str(export_path)

        with open(out / SUMMARY_FILE, "w", encoding="utf-8") as handle:
            json.dump(summary.to_dict(), handle, indent=2, sort_keys=True)
            handle.write("\n")
        return summary
    finally:
        lock.close()
        lock_path.unlink(missing_ok=True)
