"""Generation/scoring backends behind one small wire protocol.

Two operations cover everything the pipeline needs from a model server:

* ``POST {base}/generate``  body ``{prompt, n, max_tokens, top_p, top_k,
  temperature, seed?}`` -> ``{"completions": [str, ...]}``
* ``POST {base}/score``     body ``{context, continuation}`` ->
  ``{"token_logprobs": [float, ...]}``

Tokenization is owned by the server, so perplexities stay consistent with
whatever model answers. The MockBackend implements both operations as pure
functions of its inputs and configured seed, which makes full pipeline runs
bit-reproducible and gives filtering tests an exact oracle.
"""

from __future__ import annotations

import hashlib
import logging
import math
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Any, Callable, Hashable, Iterable, TypeVar

import requests

logger = logging.getLogger(__name__)

DEFAULT_TOP_P = 0.9
DEFAULT_TOP_K = 40
DEFAULT_TEMPERATURE = 0.7
DEFAULT_MAX_TOKENS = 256
DEFAULT_TIMEOUT_MS = 30_000
DEFAULT_MAX_IN_FLIGHT = 4
DEFAULT_RETRIES = 3


class BackendError(Exception):
    """Base class for backend failures."""


class BackendTimeout(BackendError):
    """Request timed out after the configured number of attempts."""

    def __init__(self, message: str, attempts: int) -> None:
        super().__init__(f"{message} (after {attempts} attempts)")
        self.attempts = attempts


class BackendProtocolError(BackendError):
    """Server answered with a non-success status or an invalid body."""


@dataclass(frozen=True)
class SamplingParams:
    top_p: float = DEFAULT_TOP_P
    top_k: int = DEFAULT_TOP_K
    temperature: float = DEFAULT_TEMPERATURE
    max_tokens: int = DEFAULT_MAX_TOKENS
    seed: int | None = None

    def __post_init__(self) -> None:
        if not 0.0 < self.top_p <= 1.0:
            raise ValueError("top_p must be in (0, 1]")
        if self.top_k < 0:
            raise ValueError("top_k must be >= 0 (0 disables top-k)")
        if self.temperature <= 0.0:
            raise ValueError("temperature must be positive")
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be >= 1")

    def with_seed(self, seed: int | None) -> "SamplingParams":
        return replace(self, seed=seed)

    def to_request(self, prompt: str, n: int) -> dict[str, Any]:
        body: dict[str, Any] = {
            "prompt": prompt,
            "n": n,
            "max_tokens": self.max_tokens,
            "top_p": self.top_p,
            "top_k": self.top_k,
            "temperature": self.temperature,
        }
        if self.seed is not None:
            body["seed"] = self.seed
        return body


@dataclass(frozen=True)
class ScoreResult:
    token_logprobs: tuple[float, ...]
    token_count: int

    def __post_init__(self) -> None:
        if self.token_count != len(self.token_logprobs):
            raise ValueError("token_count must equal len(token_logprobs)")
        if self.token_count < 1:
            raise ValueError("a ScoreResult needs at least one token")
        if any(lp > 0.0 for lp in self.token_logprobs):
            raise ValueError("log-probabilities must be <= 0")

    @classmethod
    def from_logprobs(cls, logprobs: Iterable[float]) -> "ScoreResult":
        values = tuple(float(lp) for lp in logprobs)
        return cls(token_logprobs=values, token_count=len(values))


class GenerationBackend:
    """Interface every backend implements; instances are thread-shareable."""

    name = "backend"
    supports_batch = True
    max_in_flight = DEFAULT_MAX_IN_FLIGHT

    def generate(self, prompt: str, params: SamplingParams, n: int = 1) -> list[str]:
        raise NotImplementedError

    def score(self, context: str, continuation: str) -> ScoreResult:
        raise NotImplementedError

    def health(self) -> bool:
        """Cheap readiness probe: a minimal scoring call must succeed."""
        try:
            self.score("", "ok")
            return True
        except BackendError:
            return False

    def _check_generate_args(self, prompt: str, n: int) -> None:
        if not prompt:
            raise ValueError("prompt must be non-empty")
        if n < 1:
            raise ValueError("n must be >= 1")


# Word tables for hash-derived mock completions. Verbs come from the bundled
# lexicon so diversity analysis has something to count on mock runs.
_MOCK_VERBS = (
    "Describe", "Explain", "Summarize", "List", "Compare", "Write",
    "Analyze", "Identify", "Outline", "Classify", "Translate", "Rewrite",
    "Define", "Evaluate", "Draft", "Review",
)
_MOCK_ADJECTIVES = (
    "main", "key", "short", "detailed", "notable", "central", "common",
    "specific", "broad", "essential", "recent", "primary", "simple",
    "unusual", "relevant", "core",
)
_MOCK_NOUNS = (
    "passage", "article", "report", "story", "document", "summary", "text",
    "paragraph", "review", "essay", "letter", "message", "guide", "answer",
    "topic", "excerpt",
)
_MOCK_TAILS = (
    "above", "below", "in detail", "in one sentence", "for a reader",
    "step by step", "in plain words", "with examples", "briefly",
    "in context", "as a list", "for beginners", "in your own words",
    "for the record", "from memory", "without jargon",
)

ScoreKey = str | tuple[str, str]
ScoreValue = float | list[float] | tuple[float, ...]


class MockBackend(GenerationBackend):
    """Deterministic in-process backend for tests and dry runs.

    generate: completion j of a request is derived from
    sha256(prompt, effective_seed + j), where effective_seed is the request
    seed (or the configured default). Sequential n=1 requests with seeds
    offset by j therefore reproduce a single n=k batch exactly.

    score: ``score_table`` maps keys to per-token log-probabilities. A plain
    string key matches when it is a prefix of the continuation; a
    ``(context_substring, continuation_prefix)`` tuple key additionally
    requires the substring to occur in the context (tuple keys win over
    string keys, longer matches over shorter). Values are either a full
    log-probability list (the mock's "tokenizer" for that continuation) or a
    single float applied to every whitespace token. With no match, scoring
    falls back to ``default_logprob`` per token, or to hash-derived values in
    [-2.0, -0.5] so selection stays meaningful on synthetic runs.
    """

    name = "mock"

    def __init__(
        self,
        seed: int = 0,
        score_table: dict[ScoreKey, ScoreValue] | None = None,
        default_logprob: float | None = None,
        max_in_flight: int = DEFAULT_MAX_IN_FLIGHT,
    ) -> None:
        self.seed = seed
        self.score_table = dict(score_table or {})
        self.default_logprob = default_logprob
        self.max_in_flight = max_in_flight

    def _completion(self, prompt: str, effective_seed: int) -> str:
        digest = hashlib.sha256(f"{prompt}\x1f{effective_seed}".encode("utf-8")).digest()
        verb = _MOCK_VERBS[digest[0] % len(_MOCK_VERBS)]
        adjective = _MOCK_ADJECTIVES[digest[1] % len(_MOCK_ADJECTIVES)]
        noun = _MOCK_NOUNS[digest[2] % len(_MOCK_NOUNS)]
        tail = _MOCK_TAILS[digest[3] % len(_MOCK_TAILS)]
        return f"{verb} the {adjective} {noun} {tail}."

    def generate(self, prompt: str, params: SamplingParams, n: int = 1) -> list[str]:
        self._check_generate_args(prompt, n)
        base = params.seed if params.seed is not None else self.seed
        return [self._completion(prompt, base + j) for j in range(n)]

    def _lookup(self, context: str, continuation: str) -> ScoreValue | None:
        best: tuple[int, int] | None = None
        value: ScoreValue | None = None
        for key, candidate in self.score_table.items():
            if isinstance(key, tuple):
                ctx_sub, prefix = key
                if ctx_sub in context and continuation.startswith(prefix):
                    rank = (1, len(ctx_sub) + len(prefix))
                else:
                    continue
            else:
                if continuation.startswith(key):
                    rank = (0, len(key))
                else:
                    continue
            if best is None or rank > best:
                best = rank
                value = candidate
        return value

    def _hash_logprob(self, context: str, continuation: str, index: int) -> float:
        digest = hashlib.sha256(
            f"{context}\x1f{continuation}\x1f{index}".encode("utf-8")
        ).digest()
        fraction = int.from_bytes(digest[:4], "big") / 2**32
        return -0.5 - 1.5 * fraction

    def score(self, context: str, continuation: str) -> ScoreResult:
        if not continuation.strip():
            raise BackendError("empty continuation")
        tokens = continuation.split()
        value = self._lookup(context, continuation)
        if isinstance(value, (list, tuple)):
            return ScoreResult.from_logprobs(value)
        if isinstance(value, float):
            return ScoreResult.from_logprobs([value] * len(tokens))
        if self.default_logprob is not None:
            return ScoreResult.from_logprobs([self.default_logprob] * len(tokens))
        return ScoreResult.from_logprobs(
            [self._hash_logprob(context, continuation, t) for t in range(len(tokens))]
        )


class HttpBackend(GenerationBackend):
    """Client for any server speaking the /generate + /score protocol.

    Retries timeouts only (up to ``retries`` attempts, exponential backoff);
    every other failure is surfaced immediately. A semaphore caps the number
    of in-flight requests regardless of how many threads share the client.
    """

    name = "http"

    def __init__(
        self,
        base_url: str,
        timeout_ms: int = DEFAULT_TIMEOUT_MS,
        max_in_flight: int = DEFAULT_MAX_IN_FLIGHT,
        retries: int = DEFAULT_RETRIES,
        backoff_s: float = 0.5,
    ) -> None:
        if max_in_flight < 1:
            raise ValueError("max_in_flight must be >= 1")
        if retries < 1:
            raise ValueError("retries must be >= 1")
        self.base_url = base_url.rstrip("/")
        self.timeout_s = timeout_ms / 1000.0
        self.max_in_flight = max_in_flight
        self.retries = retries
        self.backoff_s = backoff_s
        self._session = requests.Session()
        self._slots = threading.Semaphore(max_in_flight)

    def _post(self, path: str, body: dict[str, Any]) -> dict[str, Any]:
        url = f"{self.base_url}{path}"
        for attempt in range(1, self.retries + 1):
            with self._slots:
                try:
                    response = self._session.post(url, json=body, timeout=self.timeout_s)
                except requests.Timeout:
                    if attempt == self.retries:
                        raise BackendTimeout(f"timeout on {url}", attempts=attempt) from None
                    delay = self.backoff_s * 2 ** (attempt - 1)
                    logger.warning("timeout on %s (attempt %d), retrying in %.2fs", url, attempt, delay)
                    time.sleep(delay)
                    continue
                except requests.RequestException as exc:
                    raise BackendError(f"request to {url} failed: {exc}") from exc
            if response.status_code != 200:
                raise BackendProtocolError(
                    f"{url} returned {response.status_code}: {response.text[:200]}"
                )
            try:
                payload = response.json()
            except ValueError as exc:
                raise BackendProtocolError(f"{url} returned non-JSON body") from exc
            if not isinstance(payload, dict):
                raise BackendProtocolError(f"{url} returned a non-object body")
            return payload
        raise BackendTimeout(f"timeout on {url}", attempts=self.retries)

    def generate(self, prompt: str, params: SamplingParams, n: int = 1) -> list[str]:
        self._check_generate_args(prompt, n)
        payload = self._post("/generate", params.to_request(prompt, n))
        completions = payload.get("completions")
        if not isinstance(completions, list) or len(completions) != n:
            raise BackendProtocolError(
                f"expected {n} completions, got {completions!r:.200}"
            )
        return [str(completion) for completion in completions]

    def score(self, context: str, continuation: str) -> ScoreResult:
        if not continuation.strip():
            raise BackendError("empty continuation")
        payload = self._post("/score", {"context": context, "continuation": continuation})
        logprobs = payload.get("token_logprobs")
        if not isinstance(logprobs, list) or not logprobs:
            raise BackendProtocolError("server returned no token_logprobs")
        try:
            return ScoreResult.from_logprobs(logprobs)
        except (TypeError, ValueError) as exc:
            raise BackendProtocolError(f"invalid token_logprobs: {exc}") from exc


K = TypeVar("K", bound=Hashable)
T = TypeVar("T")
R = TypeVar("R")


def run_bounded(
    fn: Callable[[T], R],
    items: dict[K, T],
    max_in_flight: int,
) -> tuple[dict[K, R], dict[K, BaseException]]:
    """Apply fn to every item with bounded concurrency.

    Results and failures are re-associated by key, never by completion
    order, so concurrent backend calls cannot shuffle outputs.
    """
    results: dict[K, R] = {}
    failures: dict[K, BaseException] = {}
    if not items:
        return results, failures
    with ThreadPoolExecutor(max_workers=max(1, max_in_flight)) as pool:
        futures = {key: pool.submit(fn, value) for key, value in items.items()}
        for key, future in futures.items():
            try:
                results[key] = future.result()
            except BaseException as exc:  # noqa: BLE001 - reported per key
                failures[key] = exc
    return results, failures


def perplexity_from_logprobs(logprobs: Iterable[float]) -> float:
    values = list(logprobs)
    if not values:
        raise ValueError("cannot compute perplexity of zero tokens")
    return math.exp(-sum(values) / len(values))
