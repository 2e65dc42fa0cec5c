"""Statistical single-document keyphrase scoring (YAKE-style, lower = better).

Each term gets five unsupervised features:

* casing      w_case   = max(tf_capitalized, tf_acronym) / (1 + ln tf)
* position    w_pos    = ln(ln(3 + first_sentence_index))
* frequency   w_freq   = tf / (mean_tf + stdev_tf) over non-stopword terms
* relatedness w_rel    = 1 + (dl + dr) * tf / max_tf, where dl (dr) is the
                         ratio of distinct to total left (right) neighbours
                         inside the co-occurrence window
* dispersion  w_spread = sentence_frequency / sentence_count

combined as

    s(t) = (w_pos * w_rel) / (w_case + w_freq / w_rel + w_spread / w_rel)

Candidate phrases are in-sentence n-grams with no stopword or numeric token,
scored as

    s(kw) = prod(s(t)) / (tf_kw * (1 + sum(s(t))))

and ranked ascending, with near-duplicates (normalized Levenshtein similarity
above the dedup threshold) removed. Casing counts include sentence-initial
capitals and the position feature uses the first occurrence, so a term that
is frequent, early, and spread across sentences wins even when every mention
opens a sentence.
"""

from __future__ import annotations

import math
import re
import statistics
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources

from .segmenter import split_sentences

_WORD = re.compile(r"[^\W_]+", re.UNICODE)


@dataclass(frozen=True)
class KeywordParams:
    max_ngram: int = 3
    window: int = 1
    dedup_threshold: float = 0.9
    top_k: int = 5

    def __post_init__(self) -> None:
        if self.top_k < 1:
            raise ValueError("top_k must be >= 1")
        if self.max_ngram < 1:
            raise ValueError("max_ngram must be >= 1")
        if self.window < 1:
            raise ValueError("window must be >= 1")
        if not 0.0 < self.dedup_threshold <= 1.0:
            raise ValueError("dedup_threshold must be in (0, 1]")


@dataclass(frozen=True)
class Keyphrase:
    phrase: str
    score: float


@dataclass
class _Term:
    tf: int = 0
    tf_capitalized: int = 0
    tf_acronym: int = 0
    sentences: set[int] = field(default_factory=set)
    first_sentence: int = 0
    left_total: int = 0
    left_distinct: set[str] = field(default_factory=set)
    right_total: int = 0
    right_distinct: set[str] = field(default_factory=set)


@lru_cache(maxsize=1)
def stopwords() -> frozenset[str]:
    raw = resources.files("forge.data").joinpath("stopwords.txt").read_text("utf-8")
    return frozenset(line.strip() for line in raw.splitlines() if line.strip() and not line.startswith("#"))


def _is_numeric(token: str) -> bool:
    return any(ch.isdigit() for ch in token)


def _tokenize_sentences(text: str) -> list[list[str]]:
    return [_WORD.findall(sent.text) for sent in split_sentences(text)]


def _levenshtein(a: str, b: str) -> int:
    if len(a) < len(b):
        a, b = b, a
    previous = list(range(len(b) + 1))
    for i, ch_a in enumerate(a, start=1):
        current = [i]
        for j, ch_b in enumerate(b, start=1):
            cost = 0 if ch_a == ch_b else 1
            current.append(min(previous[j] + 1, current[j - 1] + 1, previous[j - 1] + cost))
        previous = current
    return previous[-1]


def _similarity(a: str, b: str) -> float:
    longest = max(len(a), len(b))
    if longest == 0:
        return 1.0
    return 1.0 - _levenshtein(a, b) / longest


def term_scores(text: str, window: int = 1) -> dict[str, float]:
    """Score every non-stopword term in the text (lower = more important)."""
    sentences = _tokenize_sentences(text)
    stops = stopwords()
    terms: dict[str, _Term] = {}

    for sent_idx, tokens in enumerate(sentences):
        lowered = [tok.lower() for tok in tokens]
        for pos, (token, low) in enumerate(zip(tokens, lowered)):
            entry = terms.get(low)
            if entry is None:
                entry = _Term(first_sentence=sent_idx)
                terms[low] = entry
            entry.tf += 1
            entry.sentences.add(sent_idx)
            if len(token) > 1 and token.isupper():
                entry.tf_acronym += 1
            elif len(token) > 1 and token[0].isupper():
                entry.tf_capitalized += 1
            for offset in range(1, window + 1):
                if pos - offset >= 0:
                    entry.left_total += 1
                    entry.left_distinct.add(lowered[pos - offset])
                if pos + offset < len(tokens):
                    entry.right_total += 1
                    entry.right_distinct.add(lowered[pos + offset])

    content = {
        term: entry
        for term, entry in terms.items()
        if term not in stops and not _is_numeric(term)
    }
    if not content:
        return {}

    tfs = [entry.tf for entry in content.values()]
    mean_tf = statistics.fmean(tfs)
    stdev_tf = statistics.pstdev(tfs)
    max_tf = max(tfs)
    n_sentences = max(len(sentences), 1)

    scores: dict[str, float] = {}
    for term, entry in content.items():
        w_case = max(entry.tf_capitalized, entry.tf_acronym) / (1.0 + math.log(entry.tf))
        w_pos = math.log(math.log(3.0 + entry.first_sentence))
        w_freq = entry.tf / (mean_tf + stdev_tf)
        dl = len(entry.left_distinct) / entry.left_total if entry.left_total else 0.0
        dr = len(entry.right_distinct) / entry.right_total if entry.right_total else 0.0
        w_rel = 1.0 + (dl + dr) * entry.tf / max_tf
        w_spread = len(entry.sentences) / n_sentences
        scores[term] = (w_pos * w_rel) / (w_case + w_freq / w_rel + w_spread / w_rel)
    return scores


def score_keyphrases(text: str, params: KeywordParams | None = None) -> list[Keyphrase]:
    """Rank candidate phrases ascending by score; empty when nothing qualifies."""
    params = params or KeywordParams()
    scores = term_scores(text, window=params.window)
    if not scores:
        return []

    sentences = _tokenize_sentences(text)
    stops = stopwords()
    phrase_tf: dict[tuple[str, ...], int] = {}
    phrase_surface: dict[tuple[str, ...], str] = {}
    for tokens in sentences:
        lowered = [tok.lower() for tok in tokens]
        for start in range(len(tokens)):
            for length in range(1, params.max_ngram + 1):
                end = start + length
                if end > len(tokens):
                    break
                gram = tuple(lowered[start:end])
                if any(term in stops or term not in scores for term in gram):
                    continue
                phrase_tf[gram] = phrase_tf.get(gram, 0) + 1
                phrase_surface.setdefault(gram, " ".join(tokens[start:end]))

    ranked: list[Keyphrase] = []
    for gram, tf_kw in phrase_tf.items():
        product = math.prod(scores[term] for term in gram)
        total = sum(scores[term] for term in gram)
        ranked.append(Keyphrase(phrase_surface[gram], product / (tf_kw * (1.0 + total))))
    ranked.sort(key=lambda kp: (kp.score, kp.phrase.lower()))

    selected: list[Keyphrase] = []
    for candidate in ranked:
        if any(
            _similarity(candidate.phrase.lower(), kept.phrase.lower()) >= params.dedup_threshold
            for kept in selected
        ):
            continue
        selected.append(candidate)
        if len(selected) >= params.top_k:
            break
    return selected
