"""Perplexity-based instruction filtering.

For every candidate instruction I of an output O, the scoring backend
computes token log-probabilities of O conditioned on the instruction-
following prompt rendered from I, and the candidate minimizing

    ppl(O | I) = exp(-(1/T) * sum_t log p_t)

wins. Ties resolve to the earliest candidate in input order, and every score
is kept so run reports can show the whole ranking. Conditioning uses the
full no-input following template because that is what the scoring model was
trained to consume; a bare-instruction mode exists for ablation.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

from .backend import BackendError, GenerationBackend, perplexity_from_logprobs
from .generation import CandidateInstruction
from .templates import FOLLOWING_WITHOUT_INPUT, fill_following_slots

logger = logging.getLogger(__name__)


class FilterError(Exception):
    pass


@dataclass(frozen=True)
class ScoredCandidate:
    candidate: CandidateInstruction
    ppl: float
    token_count: int

    def __post_init__(self) -> None:
        if not math.isfinite(self.ppl) or self.ppl < 1.0:
            raise ValueError("perplexity must be finite and >= 1")
        if self.token_count < 1:
            raise ValueError("token_count must be >= 1")


def render_conditioning(instruction: str, bare: bool = False) -> str:
    """Context the output is scored against; ends after "### Response:\\n"."""
    if bare:
        return instruction + "\n"
    return fill_following_slots(FOLLOWING_WITHOUT_INPUT, instruction)


def perplexity(
    backend: GenerationBackend,
    instruction: str,
    output: str,
    bare: bool = False,
) -> tuple[float, int]:
    """Token-normalized perplexity of output given the rendered instruction."""
    if not instruction.strip():
        raise FilterError("instruction must be non-empty")
    if not output.strip():
        raise FilterError("output must be non-empty")
    result = backend.score(render_conditioning(instruction, bare=bare), output)
    try:
        ppl = perplexity_from_logprobs(result.token_logprobs)
    except OverflowError as exc:
        raise FilterError("perplexity overflowed (log-probabilities too small)") from exc
    if not math.isfinite(ppl):
        raise FilterError("perplexity is not finite")
    return ppl, result.token_count


def score_candidates(
    candidates: list[CandidateInstruction],
    output: str,
    backend: GenerationBackend,
    bare: bool = False,
) -> tuple[list[ScoredCandidate], list[tuple[CandidateInstruction, str]]]:
    """Score every candidate; scoring failures drop only that candidate."""
    scored: list[ScoredCandidate] = []
    failed: list[tuple[CandidateInstruction, str]] = []
    for candidate in candidates:
        try:
            ppl, token_count = perplexity(backend, candidate.text, output, bare=bare)
            scored.append(ScoredCandidate(candidate=candidate, ppl=ppl, token_count=token_count))
        except (BackendError, FilterError, ValueError) as exc:
            logger.warning("candidate %r failed scoring: %s", candidate.text[:60], exc)
            failed.append((candidate, str(exc)))
    return scored, failed


def select_best(
    candidates: list[CandidateInstruction],
    output: str,
    backend: GenerationBackend,
    bare: bool = False,
) -> ScoredCandidate:
    """Argmin of ppl(output | candidate); ties break to earliest position."""
    if not candidates:
        raise FilterError("no candidates to select from")
    scored, _ = score_candidates(candidates, output, backend, bare=bare)
    if not scored:
        raise FilterError("no scorable candidate")
    best = scored[0]
    for entry in scored[1:]:
        if entry.ppl < best.ppl:
            best = entry
    return best
