"""Rule-based sentence segmentation with character spans.

Boundaries are terminator runs (. ! ?) followed by optional closing quotes or
brackets, then whitespace and an uppercase letter, digit, or opening quote, or
the end of the text. Periods after known abbreviations (shipped in
data/abbreviations.txt) and after single uppercase initials do not split.
No learned model is involved, so segmentation is deterministic and the spans
always slice back to the exact sentence text.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

_TERMINATOR_RUN = re.compile(r"[.!?]+")
_TRAILING_WORD = re.compile(r"[A-Za-z][A-Za-z.]*$")
_CLOSERS = "\"')]}”’"
_OPENERS = "\"'([{“‘"


@dataclass(frozen=True)
class Sentence:
    text: str
    start: int
    end: int


@lru_cache(maxsize=1)
def abbreviations() -> frozenset[str]:
    raw = resources.files("forge.data").joinpath("abbreviations.txt").read_text("utf-8")
    return frozenset(line.strip().lower() for line in raw.splitlines() if line.strip())


def _protected(text: str, period_start: int) -> bool:
    """True when the period at period_start ends an abbreviation or initial."""
    match = _TRAILING_WORD.search(text, 0, period_start)
    if match is None:
        return False
    token = match.group().rstrip(".")
    if len(token) == 1 and token.isupper():
        return True
    return token.lower() in abbreviations()


def split_sentences(text: str) -> list[Sentence]:
    """Segment text into sentences with (start, end) character spans."""
    cut_points: list[int] = []
    n = len(text)
    for match in _TERMINATOR_RUN.finditer(text):
        j = match.end()
        while j < n and text[j] in _CLOSERS:
            j += 1
        if j >= n:
            cut_points.append(j)
            continue
        if not text[j].isspace():
            continue
        k = j
        while k < n and text[k].isspace():
            k += 1
        if k < n:
            nxt = text[k]
            if not (nxt.isupper() or nxt.isdigit() or nxt in _OPENERS):
                continue
        if match.group().endswith(".") and _protected(text, match.end() - 1):
            continue
        cut_points.append(j)

    sentences: list[Sentence] = []
    prev = 0
    for cut in cut_points + [n]:
        if cut <= prev:
            continue
        segment = text[prev:cut]
        if segment.strip():
            lead = len(segment) - len(segment.lstrip())
            trail = len(segment) - len(segment.rstrip())
            start = prev + lead
            end = cut - trail
            sentences.append(Sentence(text=text[start:end], start=start, end=end))
        prev = cut
    return sentences
