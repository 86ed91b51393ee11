"""Synthetic desk-scale collections for demos, smoke tests, and the
verification suite.

Each passage opens with a key sentence holding two passage-unique tokens
plus a shared topic token; query j is a verbatim copy of passage j's key
sentence and is judged relevant only to that passage.  Topic tokens
guarantee every query also matches non-answering passages, so source
simulation always finds a candidate.
"""

from __future__ import annotations

import random
from pathlib import Path

from .corpus import Corpus, Document, Judgment, Query, save_collection


def make_synthetic_collection(
    n_passages: int = 1000,
    n_queries: int = 100,
    seed: int = 7,
    n_topics: int = 20,
) -> Corpus:
    if n_queries > n_passages:
        raise ValueError("cannot have more queries than passages")
    if n_topics < 1 or (n_passages > 1 and n_topics < 2 and n_queries):
        raise ValueError("need at least one topic")
    rng = random.Random(seed)
    documents: dict[str, Document] = {}
    key_sentences: dict[str, str] = {}
    for i in range(n_passages):
        topic = i % n_topics
        stem = f"item{i:04d}"
        key = f"what makes {stem}alpha and {stem}beta special about topic{topic:02d}"
        filler = " ".join(f"{stem}extra{j}" for j in range(rng.randint(1, 3)))
        text = f"{key}. the {stem}gamma detail sits with topic{topic:02d} notes. {filler}."
        doc_id = f"d{i:04d}"
        documents[doc_id] = Document(doc_id=doc_id, text=text)
        key_sentences[doc_id] = key
    queries: dict[str, Query] = {}
    judgments: list[Judgment] = []
    for j in range(n_queries):
        query_id = f"q{j:03d}"
        doc_id = f"d{j:04d}"
        queries[query_id] = Query(query_id=query_id, text=key_sentences[doc_id])
        judgments.append(Judgment(query_id=query_id, doc_id=doc_id, grade=1))
    return Corpus(documents=documents, queries=queries, judgments=judgments)


def write_synthetic_collection(
    out_dir: str | Path,
    n_passages: int = 1000,
    n_queries: int = 100,
    seed: int = 7,
    n_topics: int = 20,
) -> dict[str, Path]:
    """Write passages.tsv, queries.tsv, and qrels.txt; returns the paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    corpus = make_synthetic_collection(n_passages, n_queries, seed, n_topics)
    paths = {
        "passages": out_dir / "passages.tsv",
        "queries": out_dir / "queries.tsv",
        "qrels": out_dir / "qrels.txt",
    }
    save_collection(corpus, paths["passages"], paths["queries"], paths["qrels"])
    return paths
