"""Tokenization and a BM25 inverted index.

The tokenizer here is the single normalization point for the whole
package: indexing, source simulation, metric n-grams, and the offline
provider fallbacks all share it.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping

from .corpus import Corpus, Document
from .ranking import RankedList

# Word characters minus underscore: lowercase alphanumerics, numerals kept.
_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)

INDEX_MAGIC = "presearch-bm25-index"
INDEX_VERSION = 1

DEFAULT_K1 = 0.9
DEFAULT_B = 0.4


def tokenize(text: str) -> list[str]:
    """Lowercase and split on any non-alphanumeric character."""
    return _TOKEN_RE.findall(text.lower())


@dataclass
class InvertedIndex:
    postings: dict[str, dict[str, int]]  # term -> {doc_id: term frequency}
    doc_lengths: dict[str, int]
    avg_doc_length: float
    doc_count: int
    k1: float = DEFAULT_K1
    b: float = DEFAULT_B

    def __contains__(self, doc_id: str) -> bool:
        return doc_id in self.doc_lengths

    def idf(self, term: str) -> float:
        df = len(self.postings.get(term, ()))
        return math.log(1.0 + (self.doc_count - df + 0.5) / (df + 0.5))


def build_index(
    documents: Corpus | Mapping[str, Document] | Iterable[Document],
    k1: float = DEFAULT_K1,
    b: float = DEFAULT_B,
) -> InvertedIndex:
    if isinstance(documents, Corpus):
        docs = list(documents.documents.values())
    elif isinstance(documents, Mapping):
        docs = list(documents.values())
    else:
        docs = list(documents)
    if not docs:
        raise ValueError("cannot build an index over an empty corpus")
    if k1 < 0:
        raise ValueError(f"k1 must be >= 0, got {k1}")
    if not 0 <= b <= 1:
        raise ValueError(f"b must be in [0, 1], got {b}")
    postings: dict[str, dict[str, int]] = {}
    doc_lengths: dict[str, int] = {}
    for doc in docs:
        tokens = tokenize(doc.text)
        doc_lengths[doc.doc_id] = len(tokens)
        for term in tokens:
            bucket = postings.setdefault(term, {})
            bucket[doc.doc_id] = bucket.get(doc.doc_id, 0) + 1
    avg = sum(doc_lengths.values()) / len(doc_lengths)
    return InvertedIndex(
        postings=postings,
        doc_lengths=doc_lengths,
        avg_doc_length=avg,
        doc_count=len(doc_lengths),
        k1=k1,
        b=b,
    )


def bm25_score(index: InvertedIndex, query_tokens: list[str], doc_id: str) -> float:
    """Sum over query token occurrences of idf(t) * tf * (k1+1) / (tf + k1*(1-b+b*len/avglen))."""
    if doc_id not in index.doc_lengths:
        raise KeyError(f"unknown doc_id '{doc_id}'")
    length = index.doc_lengths[doc_id]
    score = 0.0
    for term in query_tokens:
        tf = index.postings.get(term, {}).get(doc_id, 0)
        if tf == 0:
            continue
        idf = index.idf(term)
        score += (
            idf
            * tf
            * (index.k1 + 1.0)
            / (tf + index.k1 * (1.0 - index.b + index.b * length / index.avg_doc_length))
        )
    return score


def search(
    index: InvertedIndex,
    query_text: str,
    k: int,
    exclude: frozenset[str] | set[str] = frozenset(),
    query_ref: str | None = None,
) -> RankedList:
    """Top-k docs by BM25, ties broken by ascending doc_id.

    Docs containing no query term (score 0) are never returned, so an
    empty result means the query matched nothing outside `exclude`.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    tokens = tokenize(query_text)
    scores: dict[str, float] = {}
    for term in tokens:
        plist = index.postings.get(term)
        if not plist:
            continue
        idf = index.idf(term)
        for doc_id, tf in plist.items():
            if doc_id in exclude:
                continue
            length = index.doc_lengths[doc_id]
            contribution = (
                idf
                * tf
                * (index.k1 + 1.0)
                / (tf + index.k1 * (1.0 - index.b + index.b * length / index.avg_doc_length))
            )
            scores[doc_id] = scores.get(doc_id, 0.0) + contribution
    ranked = sorted(scores.items(), key=lambda item: (-item[1], item[0]))[:k]
    return RankedList(query_ref if query_ref is not None else query_text, ranked)


def save_index(index: InvertedIndex, path: str | Path) -> None:
    """Serialize to versioned JSON; byte-identical for identical indexes."""
    payload = {
        "magic": INDEX_MAGIC,
        "version": INDEX_VERSION,
        "k1": index.k1,
        "b": index.b,
        "doc_count": index.doc_count,
        "avg_doc_length": index.avg_doc_length,
        "doc_lengths": index.doc_lengths,
        "postings": index.postings,
    }
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        json.dump(payload, f, sort_keys=True, separators=(",", ":"))
        f.write("\n")


def load_index(path: str | Path) -> InvertedIndex:
    with open(path, encoding="utf-8") as f:
        payload = json.load(f)
    if payload.get("magic") != INDEX_MAGIC:
        raise ValueError(f"{path}: not a presearch index file")
    if payload.get("version") != INDEX_VERSION:
        raise ValueError(f"{path}: unsupported index version {payload.get('version')}")
    return InvertedIndex(
        postings=payload["postings"],
        doc_lengths=payload["doc_lengths"],
        avg_doc_length=payload["avg_doc_length"],
        doc_count=payload["doc_count"],
        k1=payload["k1"],
        b=payload["b"],
    )
