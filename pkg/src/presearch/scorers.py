"""Scorer families over (input, candidate) pairs, training losses, and
the training-pair exporter.

In-process gradient training is deliberately absent: the losses exist as
pure functions for verification and for external trainers consuming the
exported pairs.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .adaptation import TrainingPair
from .corpus import Document
from .lexical import InvertedIndex, bm25_score, tokenize
from .providers import EmbeddingVector

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class LossSpec:
    margin: float = 0.5

    def __post_init__(self) -> None:
        if not 0.0 <= self.margin <= 1.0:
            raise ValueError(f"margin must be in [0, 1], got {self.margin}")


def _values(v: EmbeddingVector | Sequence[float]) -> Sequence[float]:
    return v.values if isinstance(v, EmbeddingVector) else v


def cosine_similarity(a: EmbeddingVector | Sequence[float], b: EmbeddingVector | Sequence[float]) -> float:
    va, vb = _values(a), _values(b)
    if len(va) != len(vb):
        raise ValueError(f"dimension mismatch: {len(va)} vs {len(vb)}")
    dot = sum(x * y for x, y in zip(va, vb))
    norm_a_sq = sum(x * x for x in va)
    norm_b_sq = sum(y * y for y in vb)
    if norm_a_sq == 0.0 or norm_b_sq == 0.0:
        raise ValueError("cosine similarity is undefined for a zero vector")
    # sqrt of the product keeps cos(a, a) at exactly 1.0
    return max(-1.0, min(1.0, dot / math.sqrt(norm_a_sq * norm_b_sq)))


def cosine_embedding_loss(
    a: EmbeddingVector | Sequence[float],
    b: EmbeddingVector | Sequence[float],
    label: str,
    spec: LossSpec = LossSpec(),
) -> float:
    """positive -> 1 - cos(a, b); negative -> max(0, cos(a, b) - margin)."""
    cos = cosine_similarity(a, b)
    if label == "positive":
        return 1.0 - cos
    if label == "negative":
        return max(0.0, cos - spec.margin)
    raise ValueError(f"label must be 'positive' or 'negative', got {label!r}")


def mse_label_loss(predicted: float, label: str) -> float:
    """(predicted - y)^2 with y = 1 for positive, 0 for negative."""
    if label == "positive":
        y = 1.0
    elif label == "negative":
        y = 0.0
    else:
        raise ValueError(f"label must be 'positive' or 'negative', got {label!r}")
    return (predicted - y) ** 2


class LexicalScorer:
    """BM25 against an index covering the candidate pool."""

    kind = "lexical"

    def __init__(self, index: InvertedIndex):
        self.index = index

    def score(self, input_text: str, doc: Document) -> float:
        return bm25_score(self.index, tokenize(input_text), doc.doc_id)


class EmbeddingScorer:
    """Bi-encoder style: embed both sides independently, compare by
    cosine, affinely mapped to [0, 1] so scorer kinds share a range."""

    kind = "embedding"

    def __init__(self, provider):
        self.provider = provider
        self._cache: dict[str, EmbeddingVector] = {}

    def _embed(self, text: str) -> EmbeddingVector:
        if text not in self._cache:
            self._cache[text] = self.provider.embed([text])[0]
        return self._cache[text]

    def score(self, input_text: str, doc: Document) -> float:
        cos = cosine_similarity(self._embed(input_text), self._embed(doc.text))
        log.debug("embedding cosine %.6f for doc %s", cos, doc.doc_id)
        return (cos + 1.0) / 2.0


class CrossScorer:
    """Cross-encoder style: one joint relevance scalar per pair."""

    kind = "cross"

    def __init__(self, provider):
        self.provider = provider

    def score(self, input_text: str, doc: Document) -> float:
        return self.provider.score_pair(input_text, doc.text)


@dataclass
class ScorerConfig:
    kind: str  # lexical | embedding | cross
    provider: object | None = None
    index_ref: InvertedIndex | None = None

    def __post_init__(self) -> None:
        if self.kind == "lexical":
            if self.index_ref is None:
                raise ValueError("lexical scorer requires index_ref")
        elif self.kind in ("embedding", "cross"):
            if self.provider is None:
                raise ValueError(f"{self.kind} scorer requires a provider")
        else:
            raise ValueError(f"unknown scorer kind {self.kind!r}")


def make_scorer(config: ScorerConfig):
    if config.kind == "lexical":
        return LexicalScorer(config.index_ref)
    if config.kind == "embedding":
        return EmbeddingScorer(config.provider)
    return CrossScorer(config.provider)


def score(config: ScorerConfig, input_text: str, doc: Document) -> float:
    return make_scorer(config).score(input_text, doc)


def export_training_pairs(
    pairs: Iterable[TrainingPair],
    documents: Mapping[str, Document],
    out: str | Path,
    fmt: str = "jsonl",
) -> int:
    """Write {input_text, target_text, label in {1, 0}} rows; returns the
    row count.  Re-export of the same pairs is byte-identical."""
    if fmt != "jsonl":
        raise ValueError(f"unsupported export format {fmt!r}")
    n = 0
    with open(out, "w", encoding="utf-8", newline="\n") as f:
        for pair in pairs:
            if pair.target_doc_id not in documents:
                raise KeyError(f"pair for sample '{pair.sample_id}' references unknown "
                               f"doc '{pair.target_doc_id}'")
            row = {
                "input_text": pair.input_text,
                "target_text": documents[pair.target_doc_id].text,
                "label": 1 if pair.label == "positive" else 0,
            }
            f.write(json.dumps(row, sort_keys=True, ensure_ascii=False) + "\n")
            n += 1
    return n
