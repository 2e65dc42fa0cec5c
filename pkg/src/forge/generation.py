"""Candidate-instruction generation from output fragments.

Prompts come from the three output-first templates; each output gets k raw
completions with styles assigned by cycling through the requested style list
(candidate i gets styles[i mod len(styles)]). Raw completions pass through a
rule-based post-processor, and candidates it rejects are dropped (with a
per-rule count surfaced for the run report).
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass

from .backend import GenerationBackend, SamplingParams
from .templates import GENERATION_BODIES, GenerationStyle, fill_corpus_slot

MIN_WORDS = 3
MAX_WORDS = 200
SLOT_MARKER = "<corpus_example>"

# A line starting with any of these is the template talking, not the
# instruction; everything from there on is cut.
_MARKER_LINE = re.compile(r"(?m)^[ \t]*(?:Output:|Message:|Reply:|Query:|Document:|###)")
_LEADING_LABEL = re.compile(r"^\s*(?:X\s*:|Instruction\s*:)\s*", re.IGNORECASE)
_WHITESPACE_RUN = re.compile(r"\s+")


@dataclass(frozen=True)
class GenerationTemplate:
    style: GenerationStyle
    body: str


TEMPLATES: dict[GenerationStyle, GenerationTemplate] = {
    style: GenerationTemplate(style=style, body=body)
    for style, body in GENERATION_BODIES.items()
}


@dataclass(frozen=True)
class CandidateInstruction:
    output_ref: str
    text: str
    style: GenerationStyle
    raw: str


def render_generation_prompt(output_text: str, style: GenerationStyle | str) -> str:
    """Substitute the output into the style's corpus slot, nothing else."""
    if not output_text:
        raise ValueError("output_text must be non-empty")
    return fill_corpus_slot(TEMPLATES[GenerationStyle(style)].body, output_text)


def postprocess_with_reason(raw: str) -> tuple[str | None, str | None]:
    """Clean one raw completion; returns (instruction, None) or (None, reason).

    Rules, in order: truncate at the first template-marker line, strip a
    leading "X:"/"Instruction:" label, collapse whitespace runs, reject when
    shorter than 3 or longer than 200 words, reject when the literal corpus
    slot marker survives. Stripping a label can expose a marker prefix, so
    the truncate/strip rules iterate to a fixpoint; that is what makes the
    whole post-processor idempotent.
    """
    text = raw
    while True:
        before = text
        marker = _MARKER_LINE.search(text)
        if marker is not None:
            text = text[: marker.start()]
        text = _LEADING_LABEL.sub("", text, count=1)
        if text == before:
            break
    text = _WHITESPACE_RUN.sub(" ", text).strip()
    if not text:
        return None, "empty"
    words = text.split(" ")
    if len(words) < MIN_WORDS:
        return None, "too_short"
    if len(words) > MAX_WORDS:
        return None, "too_long"
    if SLOT_MARKER in text:
        return None, "slot_marker"
    return text, None


def postprocess_candidate(raw: str) -> str | None:
    cleaned, _ = postprocess_with_reason(raw)
    return cleaned


def assign_styles(k: int, styles: list[GenerationStyle]) -> list[GenerationStyle]:
    return [styles[i % len(styles)] for i in range(k)]


def _raw_completions(
    output_text: str,
    k: int,
    styles: list[GenerationStyle],
    backend: GenerationBackend,
    params: SamplingParams,
) -> list[tuple[GenerationStyle, str]]:
    """Fetch k completions, one batch per distinct style when supported.

    The sequential fallback offsets the seed by the completion's per-style
    index, which reproduces the batched request exactly on a deterministic
    server (the mock derives completion j of a request from seed + j).
    """
    assigned = assign_styles(k, styles)
    by_style: dict[GenerationStyle, list[int]] = {}
    for index, style in enumerate(assigned):
        by_style.setdefault(style, []).append(index)

    raw: list[tuple[GenerationStyle, str] | None] = [None] * k
    for style, indices in by_style.items():
        prompt = render_generation_prompt(output_text, style)
        if backend.supports_batch:
            completions = backend.generate(prompt, params, n=len(indices))
        else:
            completions = []
            for offset in range(len(indices)):
                seed = params.seed + offset if params.seed is not None else None
                completions.extend(backend.generate(prompt, params.with_seed(seed), n=1))
        for index, completion in zip(indices, completions):
            raw[index] = (style, completion)
    return [entry for entry in raw if entry is not None]


def generate_candidates_with_report(
    output_text: str,
    k: int,
    styles: list[GenerationStyle | str],
    backend: GenerationBackend,
    params: SamplingParams,
    output_ref: str = "",
) -> tuple[list[CandidateInstruction], Counter[str]]:
    """Generate, post-process, and account for every dropped candidate."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if not styles:
        raise ValueError("styles must be non-empty")
    style_list = [GenerationStyle(style) for style in styles]
    drops: Counter[str] = Counter()
    candidates: list[CandidateInstruction] = []
    for style, raw in _raw_completions(output_text, k, style_list, backend, params):
        cleaned, reason = postprocess_with_reason(raw)
        if cleaned is None:
            drops[reason or "rejected"] += 1
            continue
        candidates.append(
            CandidateInstruction(output_ref=output_ref, text=cleaned, style=style, raw=raw)
        )
    return candidates, drops


def generate_candidates(
    output_text: str,
    k: int,
    styles: list[GenerationStyle | str],
    backend: GenerationBackend,
    params: SamplingParams,
    output_ref: str = "",
) -> list[CandidateInstruction]:
    candidates, _ = generate_candidates_with_report(
        output_text, k, styles, backend, params, output_ref=output_ref
    )
    return candidates
