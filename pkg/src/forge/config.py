"""Pipeline configuration: YAML file, defaults, validation, env overrides.

A config must carry an explicit seed (no implicit entropy), and the sampling
defaults are the standard nucleus-sampling settings (top_p 0.9, top_k 40,
temperature 0.7) unless overridden. ``validate_data`` checks structure,
ranges, and cross-field dependencies; whether input files exist is checked
when the run starts, so the shipped default config validates clean.

Backend URLs starting with "mock:" select the in-process deterministic
backend; anything else is treated as an HTTP endpoint. ``FORGE_BACKEND_URL``
overrides the generation endpoint (and the scoring endpoint when the config
does not pin one); ``FORGE_BACKEND_TIMEOUT_MS`` overrides the timeout.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from .backend import (
    DEFAULT_MAX_IN_FLIGHT,
    DEFAULT_MAX_TOKENS,
    DEFAULT_RETRIES,
    DEFAULT_TEMPERATURE,
    DEFAULT_TIMEOUT_MS,
    DEFAULT_TOP_K,
    DEFAULT_TOP_P,
    GenerationBackend,
    HttpBackend,
    MockBackend,
    SamplingParams,
)
from .corpus import SAMPLE_PRESETS, Source
from .extraction import Strategy
from .templates import GenerationStyle

ENV_BACKEND_URL = "FORGE_BACKEND_URL"
ENV_BACKEND_TIMEOUT_MS = "FORGE_BACKEND_TIMEOUT_MS"

KNOWN_SECTIONS = {
    "seed", "corpus", "extraction", "generation", "sampling",
    "backend", "filtering", "output",
}


class ConfigError(Exception):
    pass


def default_config_data() -> dict[str, Any]:
    """The shipped default: mock backends, sentence extraction, k=4."""
    return {
        "seed": 0,
        "corpus": {
            "passages": [{"path": "passages.jsonl", "source": "wikipedia"}],
            "supervised": [],
            "sample": None,
        },
        "extraction": {"strategy": "random_sentence", "top_k": 5},
        "generation": {
            "k": 4,
            "styles": ["instruction_answer", "chatbot", "search_query"],
        },
        "sampling": {
            "top_p": DEFAULT_TOP_P,
            "top_k": DEFAULT_TOP_K,
            "temperature": DEFAULT_TEMPERATURE,
            "max_tokens": DEFAULT_MAX_TOKENS,
        },
        "backend": {
            "generate_url": "mock:",
            "score_url": None,
            "timeout_ms": DEFAULT_TIMEOUT_MS,
            "max_in_flight": DEFAULT_MAX_IN_FLIGHT,
            "retries": DEFAULT_RETRIES,
        },
        "filtering": {"enabled": True, "bare_instruction": False},
        "output": {"dir": "forge-out", "format": "pairs", "export": "dataset.jsonl"},
    }


def _merge(base: dict[str, Any], override: dict[str, Any]) -> dict[str, Any]:
    merged = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(base.get(key), dict):
            merged[key] = _merge(base[key], value)
        else:
            merged[key] = value
    return merged


def _is_int(value: Any) -> bool:
    return isinstance(value, int) and not isinstance(value, bool)


def _is_number(value: Any) -> bool:
    return (isinstance(value, (int, float))) and not isinstance(value, bool)


def validate_data(data: dict[str, Any]) -> list[str]:
    """Every violation names the offending field and the broken rule."""
    violations: list[str] = []

    for section in data:
        if section not in KNOWN_SECTIONS:
            violations.append(f"{section}: unknown section")

    if not _is_int(data.get("seed")):
        violations.append("seed: required and must be an integer (no implicit entropy)")

    corpus = data.get("corpus") or {}
    passages = corpus.get("passages") or []
    supervised = corpus.get("supervised") or []
    if not isinstance(passages, list):
        violations.append("corpus.passages: must be a list of {path, source} entries")
        passages = []
    for index, entry in enumerate(passages):
        if not isinstance(entry, dict) or not entry.get("path"):
            violations.append(f"corpus.passages[{index}]: needs a path")
            continue
        try:
            Source(entry.get("source", "other"))
        except ValueError:
            violations.append(
                f"corpus.passages[{index}].source: must be one of "
                f"{[s.value for s in Source]}"
            )
    if not isinstance(supervised, list):
        violations.append("corpus.supervised: must be a list of paths")
        supervised = []
    if not passages and not supervised:
        violations.append("corpus: at least one passage or supervised input is required")
    sample = corpus.get("sample")
    if sample is not None:
        if not isinstance(sample, dict):
            violations.append("corpus.sample: must be a mapping with preset or counts")
        else:
            preset = sample.get("preset")
            counts = sample.get("counts")
            if preset is not None and preset not in SAMPLE_PRESETS:
                violations.append(
                    f"corpus.sample.preset: unknown preset {preset!r}; "
                    f"available: {sorted(SAMPLE_PRESETS)}"
                )
            if preset is None and counts is None:
                violations.append("corpus.sample: needs either preset or counts")
            if counts is not None:
                if not isinstance(counts, dict):
                    violations.append("corpus.sample.counts: must map source to count")
                else:
                    for key, value in counts.items():
                        try:
                            Source(key)
                        except ValueError:
                            violations.append(f"corpus.sample.counts.{key}: unknown source")
                        if not _is_int(value) or value < 0:
                            violations.append(
                                f"corpus.sample.counts.{key}: must be a non-negative integer"
                            )

    extraction = data.get("extraction") or {}
    try:
        Strategy(extraction.get("strategy", "random_sentence"))
    except ValueError:
        violations.append(
            f"extraction.strategy: must be one of {[s.value for s in Strategy]}"
        )
    top_k = extraction.get("top_k", 5)
    if not _is_int(top_k) or top_k < 1:
        violations.append("extraction.top_k: must be an integer >= 1")

    generation = data.get("generation") or {}
    k = generation.get("k", 4)
    if not _is_int(k) or not 1 <= k <= 16:
        violations.append("generation.k: must be an integer in [1, 16]")
    styles = generation.get("styles") or []
    if not styles:
        violations.append("generation.styles: must list at least one style")
    for style in styles:
        try:
            GenerationStyle(style)
        except ValueError:
            violations.append(
                f"generation.styles: unknown style {style!r}; "
                f"valid: {[s.value for s in GenerationStyle]}"
            )

    sampling = data.get("sampling") or {}
    top_p = sampling.get("top_p", DEFAULT_TOP_P)
    if not _is_number(top_p) or not 0.0 < top_p <= 1.0:
        violations.append("sampling.top_p: must be in (0,1]")
    sample_top_k = sampling.get("top_k", DEFAULT_TOP_K)
    if not _is_int(sample_top_k) or sample_top_k < 0:
        violations.append("sampling.top_k: must be an integer >= 0 (0 disables top-k)")
    temperature = sampling.get("temperature", DEFAULT_TEMPERATURE)
    if not _is_number(temperature) or temperature <= 0:
        violations.append("sampling.temperature: must be positive")
    max_tokens = sampling.get("max_tokens", DEFAULT_MAX_TOKENS)
    if not _is_int(max_tokens) or max_tokens < 1:
        violations.append("sampling.max_tokens: must be an integer >= 1")

    backend = data.get("backend") or {}
    generate_url = backend.get("generate_url")
    if not isinstance(generate_url, str) or not generate_url:
        violations.append("backend.generate_url: required")
        generate_url = ""
    for key, minimum in (("timeout_ms", 1), ("max_in_flight", 1), ("retries", 1)):
        value = backend.get(key, {"timeout_ms": DEFAULT_TIMEOUT_MS,
                                  "max_in_flight": DEFAULT_MAX_IN_FLIGHT,
                                  "retries": DEFAULT_RETRIES}[key])
        if not _is_int(value) or value < minimum:
            violations.append(f"backend.{key}: must be an integer >= {minimum}")

    filtering = data.get("filtering") or {}
    enabled = filtering.get("enabled", True)
    if not isinstance(enabled, bool):
        violations.append("filtering.enabled: must be a boolean")
        enabled = True
    if not isinstance(filtering.get("bare_instruction", False), bool):
        violations.append("filtering.bare_instruction: must be a boolean")
    score_url = backend.get("score_url") or generate_url
    if enabled and not score_url:
        violations.append("backend.score_url: a score backend is required when filtering is enabled")

    output = data.get("output") or {}
    if not output.get("dir"):
        violations.append("output.dir: required")
    if output.get("format", "pairs") not in ("pairs", "rendered"):
        violations.append("output.format: must be 'pairs' or 'rendered'")
    if not output.get("export", "dataset.jsonl"):
        violations.append("output.export: must be a file name")

    return violations


@dataclass(frozen=True)
class CorpusInput:
    path: str
    source: Source


@dataclass(frozen=True)
class PipelineConfig:
    seed: int
    passage_inputs: list[CorpusInput]
    supervised_inputs: list[str]
    sample_counts: dict[Source, int] | None
    strategy: Strategy
    keyword_top_k: int
    k: int
    styles: list[GenerationStyle]
    sampling: SamplingParams
    generate_url: str
    score_url: str
    timeout_ms: int
    max_in_flight: int
    retries: int
    filtering_enabled: bool
    bare_instruction: bool
    out_dir: str
    export_format: str
    export_name: str
    raw: dict[str, Any] = field(default_factory=dict, repr=False)

    def make_backend(self, url: str) -> GenerationBackend:
        if url.startswith("mock:"):
            return MockBackend(seed=self.seed, max_in_flight=self.max_in_flight)
        return HttpBackend(
            url,
            timeout_ms=self.timeout_ms,
            max_in_flight=self.max_in_flight,
            retries=self.retries,
        )

    def generate_backend(self) -> GenerationBackend:
        return self.make_backend(self.generate_url)

    def score_backend(self) -> GenerationBackend:
        if self.score_url == self.generate_url:
            return self.generate_backend()
        return self.make_backend(self.score_url)


def _apply_env_overrides(data: dict[str, Any]) -> dict[str, Any]:
    backend = dict(data.get("backend") or {})
    env_url = os.environ.get(ENV_BACKEND_URL)
    if env_url:
        backend["generate_url"] = env_url
    env_timeout = os.environ.get(ENV_BACKEND_TIMEOUT_MS)
    if env_timeout:
        try:
            backend["timeout_ms"] = int(env_timeout)
        except ValueError:
            raise ConfigError(f"{ENV_BACKEND_TIMEOUT_MS} must be an integer, got {env_timeout!r}")
    data = dict(data)
    data["backend"] = backend
    return data


def config_from_data(data: dict[str, Any]) -> PipelineConfig:
    """Build a PipelineConfig from merged+validated data."""
    merged = _merge(default_config_data(), data)
    merged = _apply_env_overrides(merged)
    violations = validate_data(merged)
    if violations:
        raise ConfigError("invalid config: " + "; ".join(violations))

    corpus = merged["corpus"]
    sample = corpus.get("sample")
    sample_counts: dict[Source, int] | None = None
    if sample:
        if sample.get("preset"):
            sample_counts = dict(SAMPLE_PRESETS[sample["preset"]])
        else:
            sample_counts = {Source(k): v for k, v in sample["counts"].items()}

    backend = merged["backend"]
    generate_url = backend["generate_url"]
    score_url = backend.get("score_url") or generate_url
    sampling = merged["sampling"]
    return PipelineConfig(
        seed=merged["seed"],
        passage_inputs=[
            CorpusInput(path=entry["path"], source=Source(entry.get("source", "other")))
            for entry in corpus.get("passages") or []
        ],
        supervised_inputs=list(corpus.get("supervised") or []),
        sample_counts=sample_counts,
        strategy=Strategy(merged["extraction"]["strategy"]),
        keyword_top_k=merged["extraction"]["top_k"],
        k=merged["generation"]["k"],
        styles=[GenerationStyle(style) for style in merged["generation"]["styles"]],
        sampling=SamplingParams(
            top_p=sampling["top_p"],
            top_k=sampling["top_k"],
            temperature=sampling["temperature"],
            max_tokens=sampling["max_tokens"],
        ),
        generate_url=generate_url,
        score_url=score_url,
        timeout_ms=backend["timeout_ms"],
        max_in_flight=backend["max_in_flight"],
        retries=backend["retries"],
        filtering_enabled=merged["filtering"]["enabled"],
        bare_instruction=merged["filtering"]["bare_instruction"],
        out_dir=merged["output"]["dir"],
        export_format=merged["output"]["format"],
        export_name=merged["output"]["export"],
        raw=merged,
    )


def read_config_file(path: str | Path) -> dict[str, Any]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from exc
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"config {path} must be a mapping at top level")
    return data


def validate_config(path: str | Path) -> list[str]:
    """Violations for a config file; empty list iff the config is runnable."""
    try:
        data = read_config_file(path)
    except ConfigError as exc:
        return [str(exc)]
    merged = _merge(default_config_data(), data)
    try:
        merged = _apply_env_overrides(merged)
    except ConfigError as exc:
        return [str(exc)]
    return validate_data(merged)


def load_config(path: str | Path) -> PipelineConfig:
    return config_from_data(read_config_file(path))
