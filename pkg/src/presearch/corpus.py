"""Document, query, and judgment collections: loading, validation, splits.

File formats:
  passages:  TSV ``doc_id<TAB>text[<TAB>title]``, UTF-8, LF
  queries:   TSV ``query_id<TAB>text``
  judgments: whitespace-separated qrels, ``query_id 0 doc_id grade``
  splits:    JSONL, one ``{"query_id": ..., "split": ...}`` per line
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

SPLITS = ("train", "validation", "test")


class CollectionError(ValueError):
    """Malformed or internally inconsistent collection files."""


@dataclass(frozen=True)
class Document:
    doc_id: str
    text: str
    title: str | None = None


@dataclass(frozen=True)
class Query:
    query_id: str
    text: str


@dataclass(frozen=True)
class Judgment:
    query_id: str
    doc_id: str
    grade: int


@dataclass(frozen=True)
class SplitAssignment:
    query_id: str
    split: str


@dataclass
class Corpus:
    """Immutable after load; safe to share read-only across tasks."""

    documents: dict[str, Document] = field(default_factory=dict)
    queries: dict[str, Query] = field(default_factory=dict)
    judgments: list[Judgment] = field(default_factory=list)

    def sizes(self) -> tuple[int, int, int]:
        return (len(self.documents), len(self.queries), len(self.judgments))

    def relevant_docs(self, query_id: str) -> set[str]:
        """Doc ids judged relevant (grade >= 1) for the query."""
        if not hasattr(self, "_relevant_cache"):
            cache: dict[str, set[str]] = {}
            for j in self.judgments:
                if j.grade >= 1:
                    cache.setdefault(j.query_id, set()).add(j.doc_id)
            object.__setattr__(self, "_relevant_cache", cache)
        return self._relevant_cache.get(query_id, set())


def load_passages(path: str | Path) -> dict[str, Document]:
    docs: dict[str, Document] = {}
    with open(path, encoding="utf-8") as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.rstrip("\n")
            if not line:
                continue
            fields = line.split("\t")
            if len(fields) not in (2, 3):
                raise CollectionError(
                    f"{path}:{lineno}: expected 2 or 3 tab-separated fields, got {len(fields)}"
                )
            doc_id, text = fields[0], fields[1]
            title = fields[2] if len(fields) == 3 else None
            if not doc_id:
                raise CollectionError(f"{path}:{lineno}: empty doc_id")
            if not text.strip():
                raise CollectionError(f"{path}:{lineno}: empty text for doc '{doc_id}'")
            if doc_id in docs:
                raise CollectionError(f"{path}:{lineno}: duplicate doc_id '{doc_id}'")
            docs[doc_id] = Document(doc_id=doc_id, text=text, title=title)
    return docs


def load_queries(path: str | Path) -> dict[str, Query]:
    queries: dict[str, Query] = {}
    with open(path, encoding="utf-8") as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.rstrip("\n")
            if not line:
                continue
            fields = line.split("\t")
            if len(fields) != 2:
                raise CollectionError(
                    f"{path}:{lineno}: expected 2 tab-separated fields, got {len(fields)}"
                )
            query_id, text = fields
            if not query_id:
                raise CollectionError(f"{path}:{lineno}: empty query_id")
            if not text.strip():
                raise CollectionError(f"{path}:{lineno}: empty text for query '{query_id}'")
            if query_id in queries:
                raise CollectionError(f"{path}:{lineno}: duplicate query_id '{query_id}'")
            queries[query_id] = Query(query_id=query_id, text=text)
    return queries


def load_judgments(path: str | Path) -> list[Judgment]:
    judgments: list[Judgment] = []
    seen: set[tuple[str, str]] = set()
    with open(path, encoding="utf-8") as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.strip()
            if not line:
                continue
            fields = line.split()
            if len(fields) != 4:
                raise CollectionError(
                    f"{path}:{lineno}: expected 4 whitespace-separated fields, got {len(fields)}"
                )
            query_id, _, doc_id, grade_s = fields
            try:
                grade = int(grade_s)
            except ValueError:
                raise CollectionError(f"{path}:{lineno}: grade '{grade_s}' is not an integer")
            key = (query_id, doc_id)
            if key in seen:
                raise CollectionError(
                    f"{path}:{lineno}: duplicate judgment for ({query_id}, {doc_id})"
                )
            seen.add(key)
            judgments.append(Judgment(query_id=query_id, doc_id=doc_id, grade=grade))
    return judgments


def load_collection(
    passages_path: str | Path,
    queries_path: str | Path,
    judgments_path: str | Path | None = None,
) -> Corpus:
    """Load and cross-check a full collection; judgments are optional."""
    documents = load_passages(passages_path)
    queries = load_queries(queries_path)
    judgments = load_judgments(judgments_path) if judgments_path else []
    dangling = sorted(
        {j.query_id for j in judgments if j.query_id not in queries}
        | {j.doc_id for j in judgments if j.doc_id not in documents}
    )
    if dangling:
        raise CollectionError(
            "judgments reference unknown ids: " + ", ".join(repr(x) for x in dangling)
        )
    return Corpus(documents=documents, queries=queries, judgments=judgments)


def save_collection(
    corpus: Corpus,
    passages_path: str | Path,
    queries_path: str | Path,
    judgments_path: str | Path,
) -> None:
    """Inverse of load_collection; text must be free of tabs and newlines."""
    for doc in corpus.documents.values():
        _check_writable(doc.text, f"doc '{doc.doc_id}'")
        if doc.title is not None:
            _check_writable(doc.title, f"title of doc '{doc.doc_id}'")
    for query in corpus.queries.values():
        _check_writable(query.text, f"query '{query.query_id}'")
    with open(passages_path, "w", encoding="utf-8", newline="\n") as f:
        for doc in corpus.documents.values():
            if doc.title is None:
                f.write(f"{doc.doc_id}\t{doc.text}\n")
            else:
                f.write(f"{doc.doc_id}\t{doc.text}\t{doc.title}\n")
    with open(queries_path, "w", encoding="utf-8", newline="\n") as f:
        for query in corpus.queries.values():
            f.write(f"{query.query_id}\t{query.text}\n")
    with open(judgments_path, "w", encoding="utf-8", newline="\n") as f:
        for j in corpus.judgments:
            f.write(f"{j.query_id} 0 {j.doc_id} {j.grade}\n")


def _check_writable(text: str, what: str) -> None:
    if "\t" in text or "\n" in text or "\r" in text:
        raise CollectionError(f"{what} contains a tab or newline and cannot be saved as TSV")


def assign_splits(
    queries: Iterable[Query | str],
    ratios: tuple[float, float, float] = (0.8, 0.1, 0.1),
    seed: int = 0,
) -> list[SplitAssignment]:
    """Deterministically partition queries into train/validation/test.

    Validation and test counts are round(ratio * N); train absorbs the
    rounding remainder.  Pure function of (query ids, ratios, seed).
    """
    train_r, val_r, test_r = ratios
    if min(ratios) < 0:
        raise ValueError("split ratios must be nonnegative")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"split ratios must sum to 1.0, got {sum(ratios)}")
    ids = sorted(q.query_id if isinstance(q, Query) else str(q) for q in queries)
    if len(ids) != len(set(ids)):
        raise ValueError("duplicate query ids")
    rng = random.Random(seed)
    rng.shuffle(ids)
    n = len(ids)
    n_val = int(n * val_r + 0.5)
    n_test = int(n * test_r + 0.5)
    n_train = n - n_val - n_test
    if n_train < 0:
        raise ValueError("ratios round to more validation+test queries than exist")
    assignments = (
        [SplitAssignment(qid, "train") for qid in ids[:n_train]]
        + [SplitAssignment(qid, "validation") for qid in ids[n_train : n_train + n_val]]
        + [SplitAssignment(qid, "test") for qid in ids[n_train + n_val :]]
    )
    assignments.sort(key=lambda a: a.query_id)
    return assignments


def save_splits(assignments: Iterable[SplitAssignment], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for a in assignments:
            f.write(json.dumps({"query_id": a.query_id, "split": a.split}, sort_keys=True) + "\n")


def load_splits(path: str | Path) -> list[SplitAssignment]:
    out: list[SplitAssignment] = []
    with open(path, encoding="utf-8") as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                out.append(SplitAssignment(query_id=obj["query_id"], split=obj["split"]))
            except (json.JSONDecodeError, KeyError) as exc:
                raise CollectionError(f"{path}:{lineno}: bad split record ({exc})")
    return out
