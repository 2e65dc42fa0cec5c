"""Output-fragment extraction: the extract-then-generate strategies.

A passage yields one fragment per strategy per run: the whole passage, its
top keyphrases, one uniformly drawn sentence, or a model-extracted segment.
When a fragment is a verbatim substring of its passage, the span records the
exact character offsets; fragments shorter than three characters after
trimming are rejected to keep degenerate outputs out of the pipeline.
"""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass
from enum import Enum

from .backend import GenerationBackend, SamplingParams
from .corpus import Passage
from .keywords import KeywordParams, score_keyphrases
from .segmenter import split_sentences
from .templates import EXTRACTION_PROMPT, INPUT_SLOT

MIN_FRAGMENT_CHARS = 3


class Strategy(str, Enum):
    full_passage = "full_passage"
    keywords = "keywords"
    random_sentence = "random_sentence"
    llm_extraction = "llm_extraction"


class ExtractionError(Exception):
    pass


@dataclass(frozen=True)
class Fragment:
    passage_id: str
    text: str
    strategy: Strategy
    span: tuple[int, int] | None = None

    def __post_init__(self) -> None:
        if len(self.text.strip()) < MIN_FRAGMENT_CHARS:
            raise ExtractionError(
                f"fragment for passage {self.passage_id!r} is shorter than "
                f"{MIN_FRAGMENT_CHARS} characters after trimming"
            )


def _spanned_fragment(passage: Passage, text: str, strategy: Strategy, start: int) -> Fragment:
    span = (start, start + len(text))
    assert passage.text[span[0] : span[1]] == text
    return Fragment(passage_id=passage.id, text=text, strategy=strategy, span=span)


def extract_full(passage: Passage) -> Fragment:
    return _spanned_fragment(passage, passage.text, Strategy.full_passage, 0)


def extract_keywords(passage: Passage, params: KeywordParams | None = None) -> Fragment:
    """Join the top-k keyphrases with ", "; keywords are not contiguous, so
    the fragment carries no span. The joined text is capped at the passage
    length (a keyword fragment is a condensation, never an expansion)."""
    params = params or KeywordParams()
    phrases = score_keyphrases(passage.text, params)
    if not phrases:
        raise ExtractionError(f"no extractable keywords in passage {passage.id!r}")
    kept: list[str] = []
    length = 0
    for keyphrase in phrases:
        grown = length + len(keyphrase.phrase) + (2 if kept else 0)
        if kept and grown > len(passage.text):
            break
        kept.append(keyphrase.phrase)
        length = grown
    return Fragment(
        passage_id=passage.id,
        text=", ".join(kept),
        strategy=Strategy.keywords,
        span=None,
    )


def extract_random_sentence(passage: Passage, seed: int) -> Fragment:
    """Pick exactly one sentence uniformly at random, deterministic per seed."""
    sentences = split_sentences(passage.text)
    if not sentences:
        raise ExtractionError(f"passage {passage.id!r} has no sentences")
    choice = sentences[random.Random(seed).randrange(len(sentences))]
    return _spanned_fragment(passage, choice.text, Strategy.random_sentence, choice.start)


def render_extraction_prompt(passage_text: str) -> str:
    # The extraction template's instruction is fixed; only the input slot is
    # filled with the passage.
    return EXTRACTION_PROMPT.replace(INPUT_SLOT, passage_text)


def extract_llm(
    passage: Passage,
    backend: GenerationBackend,
    params: SamplingParams | None = None,
) -> Fragment:
    """Ask the backend to pull key segments; one completion per passage."""
    params = params or SamplingParams()
    prompt = render_extraction_prompt(passage.text)
    completion = backend.generate(prompt, params, n=1)[0].strip()
    if not completion:
        raise ExtractionError(f"empty extraction for passage {passage.id!r}")
    start = passage.text.find(completion)
    if start >= 0:
        return _spanned_fragment(passage, completion, Strategy.llm_extraction, start)
    return Fragment(
        passage_id=passage.id,
        text=completion,
        strategy=Strategy.llm_extraction,
        span=None,
    )


def derive_seed(run_seed: int, label: str) -> int:
    """Stable per-item seed so results do not depend on processing order."""
    digest = hashlib.sha256(f"{run_seed}:{label}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def extract(
    passage: Passage,
    strategy: Strategy | str,
    *,
    seed: int = 0,
    keyword_params: KeywordParams | None = None,
    backend: GenerationBackend | None = None,
    sampling: SamplingParams | None = None,
) -> Fragment:
    """Dispatch one passage through the named strategy."""
    strategy = Strategy(strategy)
    if strategy is Strategy.full_passage:
        return extract_full(passage)
    if strategy is Strategy.keywords:
        return extract_keywords(passage, keyword_params)
    if strategy is Strategy.random_sentence:
        return extract_random_sentence(passage, derive_seed(seed, passage.id))
    if backend is None:
        raise ExtractionError("llm_extraction needs a generation backend")
    return extract_llm(passage, backend, sampling)
