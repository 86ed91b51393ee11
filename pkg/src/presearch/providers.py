"""Clients for external inference endpoints plus deterministic offline fallbacks.

Wire protocol (JSON over HTTP, relative to a provider's base URL):
  POST /v1/generate  {prompt, max_tokens, temperature, stop[]} -> {text}
  POST /v1/embed     {texts[]}                                 -> {vectors[[]]}
  POST /v1/score     {a, b}                                    -> {score}

The offline fallbacks are first-class providers: pure functions of their
inputs, so every pipeline runs with no network at all.
"""

from __future__ import annotations

import hashlib
import logging
import math
import os
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

import requests

from .configfiles import load_structured
from .lexical import tokenize

log = logging.getLogger(__name__)


class ProviderError(RuntimeError):
    """Endpoint failure after retries, or a malformed response."""


@dataclass(frozen=True)
class GenerationRequest:
    prompt: str
    max_tokens: int = 64
    temperature: float = 0.0
    stop: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.max_tokens < 1:
            raise ValueError(f"max_tokens must be >= 1, got {self.max_tokens}")
        if self.temperature < 0:
            raise ValueError(f"temperature must be >= 0, got {self.temperature}")


@dataclass(frozen=True)
class EmbeddingVector:
    values: tuple[float, ...]

    @property
    def dimension(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class ProviderConfig:
    name: str
    base_url: str = ""  # empty -> offline fallback
    timeout_ms: int = 10_000
    max_retries: int = 3
    parallelism: int = 4
    auth_env: str | None = None
    embed_dim: int = 256  # fallback embedding dimension


def load_provider_configs(path: str | Path) -> dict[str, ProviderConfig]:
    """Read a `[providers.NAME]`-sectioned TOML (or JSON) config file."""
    data = load_structured(path)
    sections = data.get("providers", data)
    configs: dict[str, ProviderConfig] = {}
    for name, raw in sections.items():
        known = {k: v for k, v in raw.items() if k in ProviderConfig.__dataclass_fields__}
        known.pop("name", None)
        configs[name] = ProviderConfig(name=name, **known)
    return configs


def make_provider(config: ProviderConfig):
    return HttpProvider(config) if config.base_url else OfflineProvider(config)


def _apply_stop(text: str, stop: tuple[str, ...]) -> str:
    for s in stop:
        cut = text.find(s)
        if cut != -1:
            text = text[:cut]
    return text


_PAIR_TEMPLATES = [
    "what is the {intent} of {context}?",
    "how is the {intent} of {context} determined?",
    "when does the {intent} of {context} matter?",
]
_CONTEXT_TEMPLATES = [
    "what is {context}?",
    "how does {context} work?",
    "why is {context} important?",
]


class OfflineProvider:
    """Deterministic fallbacks: template-echo generation, hashed
    bag-of-words embeddings, token-overlap Jaccard pair scoring."""

    def __init__(self, config: ProviderConfig | None = None):
        self.config = config or ProviderConfig(name="fallback")
        self.name = self.config.name
        self.offline = True

    def reachable(self) -> bool:
        return True

    def generate(self, request: GenerationRequest) -> str:
        fields = _parse_labeled_lines(request.prompt)
        variation = 0
        if "variation" in fields:
            try:
                variation = int(fields["variation"])
            except ValueError:
                variation = 0
        context = fields.get("context") or _head(fields.get("source", ""), 12)
        intent = fields.get("intent")
        if context and intent:
            text = _PAIR_TEMPLATES[variation % len(_PAIR_TEMPLATES)].format(
                intent=intent, context=context
            )
        elif context:
            text = _CONTEXT_TEMPLATES[variation % len(_CONTEXT_TEMPLATES)].format(context=context)
        else:
            first = next((l.strip() for l in request.prompt.splitlines() if l.strip()), "what")
            text = first.rstrip("?") + "?"
        text = _apply_stop(text, request.stop)
        words = text.split()
        if len(words) > request.max_tokens:
            text = " ".join(words[: request.max_tokens])
        if not text:
            raise ProviderError("generation fallback produced empty output")
        return text

    def embed(self, texts: list[str]) -> list[EmbeddingVector]:
        if not texts:
            raise ValueError("texts must be nonempty")
        dim = self.config.embed_dim
        out = []
        for text in texts:
            values = [0.0] * dim
            for token in tokenize(text):
                bucket = int.from_bytes(hashlib.sha1(token.encode("utf-8")).digest()[:8], "big")
                values[bucket % dim] += 1.0
            norm = math.sqrt(sum(v * v for v in values))
            if norm > 0:
                values = [v / norm for v in values]
            out.append(EmbeddingVector(tuple(values)))
        return out

    def score_pair(self, input_text: str, candidate_text: str) -> float:
        a = set(tokenize(input_text))
        b = set(tokenize(candidate_text))
        if not a and not b:
            return 1.0 if input_text.strip() == candidate_text.strip() else 0.0
        union = a | b
        return len(a & b) / len(union)


def _parse_labeled_lines(prompt: str) -> dict[str, str]:
    fields: dict[str, str] = {}
    for line in prompt.splitlines():
        if ":" not in line:
            continue
        label, _, value = line.partition(":")
        label = label.strip().lower()
        if label in ("context", "intent", "source", "variation") and value.strip():
            fields[label] = value.strip()
    return fields


def _head(text: str, n_tokens: int) -> str:
    return " ".join(tokenize(text)[:n_tokens])


class HttpProvider:
    """JSON-over-HTTP client with bounded retries and capped concurrency."""

    def __init__(self, config: ProviderConfig):
        if not config.base_url:
            raise ValueError("HttpProvider requires a base_url")
        self.config = config
        self.name = config.name
        self.offline = False
        self._slots = threading.Semaphore(max(1, config.parallelism))

    def reachable(self) -> bool:
        try:
            requests.get(self.config.base_url, timeout=self.config.timeout_ms / 1000.0)
            return True
        except requests.RequestException:
            return False

    def _headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        if self.config.auth_env:
            token = os.environ.get(self.config.auth_env, "")
            if token:
                headers["Authorization"] = f"Bearer {token}"
        return headers

    def _post(self, route: str, payload: dict) -> dict:
        url = self.config.base_url.rstrip("/") + route
        timeout = self.config.timeout_ms / 1000.0
        attempts = self.config.max_retries + 1
        last: Exception | None = None
        for attempt in range(attempts):
            if attempt:
                time.sleep(0.05 * 2 ** (attempt - 1))
            started = time.perf_counter()
            try:
                with self._slots:
                    response = requests.post(url, json=payload, headers=self._headers(), timeout=timeout)
            except (requests.Timeout, requests.ConnectionError) as exc:
                last = exc
                log.warning("provider %s %s attempt %d failed: %s", self.name, route, attempt + 1, exc)
                continue
            latency_ms = int((time.perf_counter() - started) * 1000)
            log.debug("provider %s %s status=%d latency_ms=%d", self.name, route, response.status_code, latency_ms)
            if not 200 <= response.status_code < 300:
                raise ProviderError(
                    f"{self.name} {route} returned {response.status_code}: {response.text[:200]}"
                )
            try:
                return response.json()
            except ValueError as exc:
                raise ProviderError(f"{self.name} {route} returned non-JSON body") from exc
        raise ProviderError(f"{self.name} {route} unreachable after {attempts} attempts: {last}")

    def generate(self, request: GenerationRequest) -> str:
        body = self._post(
            "/v1/generate",
            {
                "prompt": request.prompt,
                "max_tokens": request.max_tokens,
                "temperature": request.temperature,
                "stop": list(request.stop),
            },
        )
        text = _apply_stop(str(body.get("text", "")), request.stop).strip()
        if not text:
            raise ProviderError(f"{self.name} returned empty generation")
        return text

    def embed(self, texts: list[str]) -> list[EmbeddingVector]:
        if not texts:
            raise ValueError("texts must be nonempty")
        body = self._post("/v1/embed", {"texts": list(texts)})
        vectors = body.get("vectors")
        if not isinstance(vectors, list) or len(vectors) != len(texts):
            raise ProviderError(f"{self.name} returned {len(vectors or [])} vectors for {len(texts)} texts")
        dims = {len(v) for v in vectors}
        if len(dims) != 1:
            raise ProviderError(f"{self.name} returned mixed embedding dimensions {sorted(dims)}")
        out = []
        for vector in vectors:
            values = tuple(float(x) for x in vector)
            if not all(math.isfinite(x) for x in values):
                raise ProviderError(f"{self.name} returned non-finite embedding values")
            out.append(EmbeddingVector(values))
        return out

    def score_pair(self, input_text: str, candidate_text: str) -> float:
        body = self._post("/v1/score", {"a": input_text, "b": candidate_text})
        score = float(body.get("score", math.nan))
        if math.isnan(score):
            raise ProviderError(f"{self.name} returned no score")
        if not 0.0 <= score <= 1.0:
            log.warning("provider %s score %.4f outside [0,1]; clamped", self.name, score)
            score = min(1.0, max(0.0, score))
        return score
