"""The forge command line: every stage standalone, plus one-shot runs.

Exit codes: 0 success, 1 fatal stage error, 2 invalid config or usage.
Progress goes to stderr; machine-readable outputs go to files (or stdout
for eval reports).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import __version__
from .backend import (
    DEFAULT_MAX_IN_FLIGHT,
    DEFAULT_RETRIES,
    DEFAULT_TIMEOUT_MS,
    BackendError,
    GenerationBackend,
    HttpBackend,
    MockBackend,
    SamplingParams,
)
from .config import ENV_BACKEND_URL, ConfigError, load_config, validate_config
from .corpus import SAMPLE_PRESETS, CorpusError, Source, load_passages, sample_passages
from .dataset import DatasetError, assemble, export
from .diversity import DiversityError, diversity_report, sunburst_data
from .extraction import ExtractionError, Strategy, extract
from .filtering import score_candidates
from .generation import generate_candidates_with_report
from .jsonl import iter_jsonl, write_jsonl
from .keywords import KeywordParams
from .metrics import METRIC_NAMES, EvalPair, MetricsError, evaluate_dataset
from .pipeline import (
    StageError,
    _candidate_row,
    _fragment_row,
    _passage_row,
    _row_candidate,
    _row_fragment,
    _row_passage,
    _winner_row,
    row_winner,
    run_pipeline,
)
from .templates import GenerationStyle

logger = logging.getLogger("forge")

EXIT_OK = 0
EXIT_FATAL = 1
EXIT_CONFIG = 2

STRATEGY_ALIASES = {
    "keywords": Strategy.keywords,
    "sentence": Strategy.random_sentence,
    "llm": Strategy.llm_extraction,
    "full": Strategy.full_passage,
}


def _make_backend(args: argparse.Namespace, seed: int = 0) -> GenerationBackend:
    url = getattr(args, "backend_url", None) or os.environ.get(ENV_BACKEND_URL) or "mock:"
    if url.startswith("mock:"):
        return MockBackend(seed=seed)
    timeout_env = os.environ.get("FORGE_BACKEND_TIMEOUT_MS")
    timeout_ms = getattr(args, "timeout_ms", None) or (int(timeout_env) if timeout_env else DEFAULT_TIMEOUT_MS)
    return HttpBackend(
        url,
        timeout_ms=timeout_ms,
        max_in_flight=getattr(args, "max_in_flight", None) or DEFAULT_MAX_IN_FLIGHT,
        retries=getattr(args, "retries", None) or DEFAULT_RETRIES,
    )


def _cmd_ingest(args: argparse.Namespace) -> int:
    passages, summary = load_passages(args.input, Source(args.source))
    write_jsonl(args.out, (_passage_row(p) for p in passages))
    logger.info("ingested %d passages (%d skipped) -> %s", summary.loaded, summary.skipped, args.out)
    for error in summary.errors:
        logger.warning("skip: %s", error)
    return EXIT_OK


def _cmd_sample(args: argparse.Namespace) -> int:
    if args.preset:
        counts = {source: count for source, count in SAMPLE_PRESETS[args.preset].items()}
    else:
        counts = {}
        for piece in args.counts.split(","):
            name, _, value = piece.partition("=")
            counts[Source(name.strip())] = int(value)
    passages = [_row_passage(row) for row in iter_jsonl(args.input)]
    sampled = sample_passages(passages, counts, args.seed)
    write_jsonl(args.out, (_passage_row(p) for p in sampled))
    logger.info("sampled %d of %d passages -> %s", len(sampled), len(passages), args.out)
    return EXIT_OK


def _cmd_extract(args: argparse.Namespace) -> int:
    strategy = STRATEGY_ALIASES[args.strategy]
    backend = _make_backend(args, seed=args.seed) if strategy is Strategy.llm_extraction else None
    keyword_params = KeywordParams(top_k=args.top_k)
    rows = []
    failures = 0
    for row in iter_jsonl(args.input):
        passage = _row_passage(row)
        try:
            fragment = extract(
                passage, strategy, seed=args.seed,
                keyword_params=keyword_params, backend=backend,
            )
        except ExtractionError as exc:
            failures += 1
            logger.warning("%s", exc)
            continue
        rows.append(_fragment_row(fragment, passage.source))
    write_jsonl(args.out, iter(rows))
    logger.info("extracted %d fragments (%d failures) -> %s", len(rows), failures, args.out)
    return EXIT_OK


def _cmd_gen(args: argparse.Namespace) -> int:
    from .extraction import derive_seed

    backend = _make_backend(args, seed=args.seed)
    styles = [GenerationStyle(name.strip()) for name in args.styles.split(",") if name.strip()]
    base = SamplingParams(
        top_p=args.top_p, top_k=args.sampling_top_k,
        temperature=args.temperature, max_tokens=args.max_tokens,
    )
    rows = []
    drop_total = 0
    for row in iter_jsonl(args.fragments):
        fragment, source = _row_fragment(row)
        use_styles = (
            [GenerationStyle.instruction_answer] if source is Source.supervised else styles
        )
        params = base.with_seed(derive_seed(args.seed, f"gen:{fragment.passage_id}"))
        candidates, drops = generate_candidates_with_report(
            fragment.text, args.k, use_styles, backend, params, output_ref=fragment.passage_id
        )
        drop_total += sum(drops.values())
        rows.extend(_candidate_row(c) for c in candidates)
    write_jsonl(args.out, iter(rows))
    logger.info("generated %d candidates (%d dropped) -> %s", len(rows), drop_total, args.out)
    return EXIT_OK


def _cmd_filter(args: argparse.Namespace) -> int:
    backend = _make_backend(
        argparse.Namespace(
            backend_url=args.score_backend,
            timeout_ms=args.timeout_ms,
            max_in_flight=args.max_in_flight,
            retries=args.retries,
        ),
        seed=0,
    )
    outputs = {}
    for row in iter_jsonl(args.outputs):
        fragment, source = _row_fragment(row)
        outputs[fragment.passage_id] = (fragment, source)
    groups: dict[str, list] = {}
    order: list[str] = []
    for row in iter_jsonl(args.candidates):
        candidate = _row_candidate(row)
        if candidate.output_ref not in groups:
            order.append(candidate.output_ref)
        groups.setdefault(candidate.output_ref, []).append(candidate)

    winner_rows = []
    report_rows = []
    for ref in order:
        if ref not in outputs:
            logger.warning("candidates reference unknown output %s", ref)
            continue
        fragment, source = outputs[ref]
        scored, failed = score_candidates(groups[ref], fragment.text, backend, bare=args.bare)
        for entry in scored:
            report_rows.append({
                "output_ref": ref, "candidate": entry.candidate.text,
                "style": entry.candidate.style.value, "ppl": entry.ppl,
                "token_count": entry.token_count,
            })
        for candidate, error in failed:
            report_rows.append({
                "output_ref": ref, "candidate": candidate.text,
                "style": candidate.style.value, "ppl": None, "error": error,
            })
        if not scored:
            logger.warning("no scorable candidate for %s", ref)
            continue
        best = scored[0]
        for entry in scored[1:]:
            if entry.ppl < best.ppl:
                best = entry
        from .dataset import WinnerRecord

        winner_rows.append(_winner_row(WinnerRecord(
            output_ref=ref,
            instruction=best.candidate.text,
            output=fragment.text,
            source=source.value,
            strategy=fragment.strategy.value,
            style=best.candidate.style.value,
            ppl=best.ppl,
            k_considered=len(groups[ref]),
        )))
    write_jsonl(args.out, iter(winner_rows))
    if args.report:
        write_jsonl(args.report, iter(report_rows))
    logger.info("selected %d winners -> %s", len(winner_rows), args.out)
    return EXIT_OK


def _cmd_build(args: argparse.Namespace) -> int:
    winners = [row_winner(row) for row in iter_jsonl(args.winners)]
    records, deduped = assemble(winners)
    exported = export(records, args.out, format=args.format, allow_empty=args.allow_empty)
    logger.info("exported %d records (%d duplicates collapsed) -> %s", exported, deduped, args.out)
    return EXIT_OK


def _cmd_eval(args: argparse.Namespace) -> int:
    pred_rows = list(iter_jsonl(args.pred))
    if args.ref:
        ref_rows = list(iter_jsonl(args.ref))
        if len(ref_rows) != len(pred_rows):
            logger.error(
                "prediction/reference row counts differ (%d vs %d)", len(pred_rows), len(ref_rows)
            )
            return EXIT_FATAL
    else:
        ref_rows = pred_rows

    pairs = []
    for pred_row, ref_row in zip(pred_rows, ref_rows):
        reference = ref_row.get("reference", ref_row.get("references"))
        if reference is None:
            logger.error("row without a reference field; pass --ref or embed references")
            return EXIT_FATAL
        pairs.append(EvalPair(
            prediction=pred_row.get("prediction", ""),
            reference=reference,
            task_id=pred_row.get("task_id", ref_row.get("task_id")),
        ))
    report = evaluate_dataset(pairs, args.metric)
    text = json.dumps(report, indent=2, sort_keys=True)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
        logger.info("wrote eval report -> %s", args.out)
    else:
        print(text)
    return EXIT_OK


def _cmd_diversity(args: argparse.Namespace) -> int:
    instructions = []
    for row in iter_jsonl(args.data):
        value = row.get("instruction", row.get("text"))
        if isinstance(value, str) and value.strip():
            instructions.append(value)
    report = diversity_report(instructions, top_verbs=args.top_verbs, top_objects=args.top_objects)
    Path(args.out).write_text(
        json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    logger.info("diversity report (%d/%d parsed) -> %s", report.parsed, report.total, args.out)
    if args.plot_data:
        Path(args.plot_data).write_text(
            json.dumps(sunburst_data(report), indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
        logger.info("sunburst data -> %s", args.plot_data)
    return EXIT_OK


def _cmd_run(args: argparse.Namespace) -> int:
    violations = validate_config(args.config)
    if violations:
        for violation in violations:
            logger.error("config: %s", violation)
        return EXIT_CONFIG
    config = load_config(args.config)
    summary = run_pipeline(config, resume=not args.no_resume)
    logger.info("run complete -> %s", summary.export_path)
    for stage, counts in summary.stages.items():
        logger.info("  %-8s %s", stage, counts)
    return EXIT_OK


def _cmd_validate(args: argparse.Namespace) -> int:
    violations = validate_config(args.config)
    if violations:
        for violation in violations:
            print(violation)
        return EXIT_CONFIG
    print("config ok")
    return EXIT_OK


def _add_backend_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--backend-url", help="generation backend URL (mock: for the built-in mock)")
    parser.add_argument("--timeout-ms", type=int, default=None)
    parser.add_argument("--max-in-flight", type=int, default=None)
    parser.add_argument("--retries", type=int, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="forge",
        description="Synthesize instruction-tuning datasets from existing corpora.",
    )
    parser.add_argument("--version", action="version", version=f"forge {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="load a passage file into normalized rows")
    p.add_argument("--input", required=True)
    p.add_argument("--source", required=True, choices=[s.value for s in Source])
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_ingest)

    p = sub.add_parser("sample", help="sample a working set per source")
    p.add_argument("--input", required=True)
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--preset", choices=sorted(SAMPLE_PRESETS))
    group.add_argument("--counts", help="e.g. wikipedia=9000,c4=4500")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_sample)

    p = sub.add_parser("extract", help="extract output fragments from passages")
    p.add_argument("--input", required=True)
    p.add_argument("--strategy", required=True, choices=sorted(STRATEGY_ALIASES))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--top-k", type=int, default=5, help="keyphrases per passage")
    p.add_argument("--out", required=True)
    _add_backend_args(p)
    p.set_defaults(func=_cmd_extract)

    p = sub.add_parser("gen", help="generate candidate instructions for fragments")
    p.add_argument("--fragments", required=True)
    p.add_argument("--k", type=int, default=4)
    p.add_argument("--styles", default="instruction_answer,chatbot,search_query")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--top-p", type=float, default=0.9)
    p.add_argument("--sampling-top-k", type=int, default=40)
    p.add_argument("--temperature", type=float, default=0.7)
    p.add_argument("--max-tokens", type=int, default=256)
    p.add_argument("--out", required=True)
    _add_backend_args(p)
    p.set_defaults(func=_cmd_gen)

    p = sub.add_parser("filter", help="select the min-perplexity candidate per output")
    p.add_argument("--candidates", required=True)
    p.add_argument("--outputs", required=True, help="fragments file the candidates refer to")
    p.add_argument("--score-backend", required=True)
    p.add_argument("--bare", action="store_true", help="condition on the bare instruction")
    p.add_argument("--out", required=True)
    p.add_argument("--report", help="write every (output, candidate, ppl) row here")
    p.add_argument("--timeout-ms", type=int, default=None)
    p.add_argument("--max-in-flight", type=int, default=None)
    p.add_argument("--retries", type=int, default=None)
    p.set_defaults(func=_cmd_filter)

    p = sub.add_parser("build", help="assemble winners into the final dataset")
    p.add_argument("--winners", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--format", choices=["pairs", "rendered"], default="pairs")
    p.add_argument("--allow-empty", action="store_true")
    p.set_defaults(func=_cmd_build)

    p = sub.add_parser("eval", help="score predictions against references")
    p.add_argument("--pred", required=True)
    p.add_argument("--ref")
    p.add_argument("--metric", required=True, choices=sorted(METRIC_NAMES))
    p.add_argument("--out")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("diversity", help="root-verb / object diversity report")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--plot-data")
    p.add_argument("--top-verbs", type=int, default=20)
    p.add_argument("--top-objects", type=int, default=4)
    p.set_defaults(func=_cmd_diversity)

    p = sub.add_parser("run", help="run the full pipeline from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--no-resume", action="store_true", help="ignore existing intermediates")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("validate", help="check a config file; exit 2 when invalid")
    p.add_argument("--config", required=True)
    p.set_defaults(func=_cmd_validate)

    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(
        stream=sys.stderr, level=logging.INFO, format="%(levelname)s %(name)s: %(message)s"
    )
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        logger.error("%s", exc)
        return EXIT_CONFIG
    except (StageError, CorpusError, ExtractionError, DatasetError,
            MetricsError, DiversityError, BackendError) as exc:
        logger.error("%s", exc)
        return EXIT_FATAL
    except OSError as exc:
        logger.error("%s", exc)
        return EXIT_FATAL


if __name__ == "__main__":
    sys.exit(main())
