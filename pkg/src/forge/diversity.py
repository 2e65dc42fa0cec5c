"""Root-verb / direct-object diversity analysis of instruction sets.

Instead of a neural parser this uses a rule-based imperative chunker backed
by the bundled verb lexicon and a suffix lemmatizer: the root verb is the
first token whose lemma is in the lexicon (politeness tokens skipped), and
the object is the head noun of the first noun phrase after it. Instructions
with no imperative verb contribute to the total but not to the table, and
the report header discloses the heuristic so nobody mistakes these counts
for parser output.
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from typing import Any

_TOKEN = re.compile(r"[A-Za-z]+(?:'[A-Za-z]+)?|\d+|[^\w\s]")

PARSER_NOTE = (
    "rule-based imperative chunker (lexicon + suffix lemmatizer); "
    "not a constituency parse"
)

POLITENESS = {"please", "kindly"}

# Auxiliary/copula inflections and modals never act as imperative roots.
NEVER_VERB = {
    "is", "are", "was", "were", "am", "been", "being",
    "does", "did", "has", "had",
    "can", "could", "will", "would", "shall", "should", "may", "might", "must",
}

DETERMINERS = {
    "the", "a", "an", "this", "that", "these", "those", "my", "your", "his",
    "her", "its", "our", "their", "some", "any", "each", "every", "all",
    "both", "few", "many", "much", "more", "most", "several", "no",
    "another", "such", "either", "neither", "one", "two", "three",
}

PRONOUNS = {
    "you", "me", "us", "it", "them", "him", "everything", "something",
    "anything", "nothing", "yourself", "myself", "itself", "themselves",
}

ADVERBS = {
    "now", "then", "here", "there", "today", "tomorrow", "yesterday",
    "soon", "later", "again", "always", "never", "often", "sometimes",
    "twice", "once", "first", "next", "well", "too", "also", "very",
    "really", "quite", "rather", "instead", "anyway", "though", "yet",
    "still", "already", "just", "even", "only", "back", "away", "together",
    "apart", "aloud", "alone", "accordingly",
}

# Tokens that end the object noun phrase: prepositions, conjunctions,
# complementizers, and question words.
BREAKS = {
    "about", "above", "across", "after", "against", "along", "among",
    "around", "as", "at", "before", "behind", "below", "beneath", "beside",
    "between", "beyond", "by", "despite", "down", "during", "except",
    "for", "from", "in", "inside", "into", "like", "near", "of", "off",
    "on", "onto", "out", "outside", "over", "past", "per", "since",
    "through", "throughout", "to", "toward", "towards", "under", "until",
    "up", "upon", "versus", "via", "with", "within", "without",
    "and", "or", "but", "nor", "so", "because", "if", "when", "while",
    "that", "which", "who", "whom", "whose", "where", "why", "how", "what",
    "than", "then",
}


class DiversityError(Exception):
    pass


@dataclass(frozen=True)
class VerbObjectPair:
    verb: str
    object: str | None


@dataclass(frozen=True)
class DiversityReport:
    total: int
    parsed: int
    verb_table: list[tuple[str, int, list[tuple[str, int]]]]
    method: str = PARSER_NOTE

    def to_dict(self) -> dict[str, Any]:
        return {
            "method": self.method,
            "total": self.total,
            "parsed": self.parsed,
            "verb_table": [
                {
                    "verb": verb,
                    "count": count,
                    "top_objects": [{"object": obj, "count": n} for obj, n in objects],
                }
                for verb, count, objects in self.verb_table
            ],
        }


@lru_cache(maxsize=1)
def verb_lexicon() -> frozenset[str]:
    raw = resources.files("forge.data").joinpath("verbs.txt").read_text("utf-8")
    return frozenset(
        line.strip() for line in raw.splitlines() if line.strip() and not line.startswith("#")
    )


def lemmatize_verb(token: str) -> str | None:
    """Map an inflected form to a lexicon lemma via suffix rules, else None."""
    lexicon = verb_lexicon()
    word = token.lower()
    if word in NEVER_VERB:
        return None
    if word in lexicon:
        return word
    candidates: list[str] = []
    if word.endswith("ies") and len(word) > 4:
        candidates.append(word[:-3] + "y")
    if word.endswith("es"):
        candidates.extend((word[:-2], word[:-1]))
    elif word.endswith("s"):
        candidates.append(word[:-1])
    if word.endswith("ied") and len(word) > 4:
        candidates.append(word[:-3] + "y")
    if word.endswith("ed"):
        candidates.extend((word[:-2], word[:-1]))
        if len(word) > 4 and word[-3] == word[-4]:
            candidates.append(word[:-3])
    if word.endswith("ing"):
        candidates.extend((word[:-3], word[:-3] + "e"))
        if len(word) > 5 and word[-4] == word[-5]:
            candidates.append(word[:-4])
    for candidate in candidates:
        if candidate in lexicon:
            return candidate
    return None


def _is_base_verb(token: str) -> bool:
    lowered = token.lower()
    return lowered in verb_lexicon() and lowered not in NEVER_VERB


def _object_after(tokens: list[str], verb_index: int) -> str | None:
    """Head noun of the first noun phrase after the verb: the last noun-ish
    token before the next verb, preposition, or punctuation."""
    collected: list[str] = []
    for token in tokens[verb_index + 1 :]:
        lowered = token.lower()
        if token[0].isdigit():
            continue
        if not token[0].isalpha():
            break
        if lowered in BREAKS or lowered in NEVER_VERB:
            break
        # A bare base-form verb ends the phrase; inflected forms after a
        # determiner ("the following article") act as modifiers instead.
        if _is_base_verb(lowered):
            break
        if lowered in DETERMINERS or lowered in PRONOUNS or lowered in ADVERBS:
            continue
        if lowered in POLITENESS:
            continue
        collected.append(lowered)
    for candidate in reversed(collected):
        if not candidate.endswith("ly"):
            return candidate
    return None


def verb_object(instruction: str) -> VerbObjectPair | None:
    """Extract (root verb lemma, object noun) from an imperative instruction."""
    tokens = _TOKEN.findall(instruction)
    for index, token in enumerate(tokens):
        lowered = token.lower()
        if lowered in POLITENESS:
            continue
        if not token[0].isalpha():
            continue
        lemma = lemmatize_verb(lowered)
        if lemma is not None:
            return VerbObjectPair(verb=lemma, object=_object_after(tokens, index))
    return None


def diversity_report(
    instructions: list[str],
    top_verbs: int = 20,
    top_objects: int = 4,
) -> DiversityReport:
    """Count root verbs and their objects; top verbs each with top objects."""
    if not instructions:
        raise DiversityError("diversity_report needs at least one instruction")
    verb_counts: Counter[str] = Counter()
    object_counts: dict[str, Counter[str]] = {}
    parsed = 0
    for instruction in instructions:
        pair = verb_object(instruction)
        if pair is None:
            continue
        parsed += 1
        verb_counts[pair.verb] += 1
        if pair.object is not None:
            object_counts.setdefault(pair.verb, Counter())[pair.object] += 1

    ordered_verbs = sorted(verb_counts.items(), key=lambda item: (-item[1], item[0]))
    table: list[tuple[str, int, list[tuple[str, int]]]] = []
    for verb, count in ordered_verbs[:top_verbs]:
        objects = sorted(
            object_counts.get(verb, Counter()).items(), key=lambda item: (-item[1], item[0])
        )[:top_objects]
        table.append((verb, count, objects))
    return DiversityReport(total=len(instructions), parsed=parsed, verb_table=table)


def sunburst_data(report: DiversityReport) -> dict[str, list[Any]]:
    """Plot-ready rings: inner = verbs, outer = each verb's top objects."""
    labels: list[str] = []
    parents: list[str] = []
    values: list[int] = []
    for verb, count, objects in report.verb_table:
        labels.append(verb)
        parents.append("")
        values.append(count)
        for obj, obj_count in objects:
            labels.append(f"{verb}/{obj}")
            parents.append(verb)
            values.append(obj_count)
    return {"labels": labels, "parents": parents, "values": values}
