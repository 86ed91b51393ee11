"""Ranked result lists and TREC-format run file IO."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable


@dataclass
class RankedList:
    """Ordered (doc_id, score) candidates for one query.

    Scores must be non-increasing and doc ids distinct.
    """

    query_ref: str
    entries: list[tuple[str, float]] = field(default_factory=list)

    def __post_init__(self) -> None:
        ids = [doc_id for doc_id, _ in self.entries]
        if len(ids) != len(set(ids)):
            raise ValueError(f"duplicate doc ids in ranked list for '{self.query_ref}'")
        scores = [score for _, score in self.entries]
        if any(a < b for a, b in zip(scores, scores[1:])):
            raise ValueError(f"scores not non-increasing in ranked list for '{self.query_ref}'")

    def doc_ids(self) -> list[str]:
        return [doc_id for doc_id, _ in self.entries]

    def rank_of(self, doc_id: str) -> int | None:
        """1-based rank, or None when absent."""
        for rank, (candidate, _) in enumerate(self.entries, start=1):
            if candidate == doc_id:
                return rank
        return None


def write_trec_run(lists: Iterable[RankedList], path: str | Path, run_tag: str) -> int:
    """Write `query_id Q0 doc_id rank score run_tag` lines; returns line count."""
    n = 0
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for ranked in lists:
            for rank, (doc_id, score) in enumerate(ranked.entries, start=1):
                f.write(f"{ranked.query_ref} Q0 {doc_id} {rank} {score!r} {run_tag}\n")
                n += 1
    return n


def read_trec_run(path: str | Path) -> dict[str, RankedList]:
    """Parse a TREC run file back into per-query ranked lists (rank order)."""
    rows: dict[str, list[tuple[int, str, float]]] = {}
    with open(path, encoding="utf-8") as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.strip()
            if not line:
                continue
            fields = line.split()
            if len(fields) != 6:
                raise ValueError(f"{path}:{lineno}: expected 6 fields, got {len(fields)}")
            query_id, _, doc_id, rank_s, score_s, _ = fields
            rows.setdefault(query_id, []).append((int(rank_s), doc_id, float(score_s)))
    out: dict[str, RankedList] = {}
    for query_id, triples in rows.items():
        triples.sort(key=lambda t: t[0])
        out[query_id] = RankedList(query_id, [(doc_id, score) for _, doc_id, score in triples])
    return out
