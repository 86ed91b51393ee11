"""Dataset adaptation: build 5-field silver samples from raw collections.

A sample records what was being read (source), the point of confusion in
it (context), what was asked about that context (intent), the full
question, and the answering passage when one exists (target).
"""

from __future__ import annotations

import json
import logging
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Protocol

from .corpus import Corpus, Judgment, Query, assign_splits
from .lexical import InvertedIndex, search, tokenize
from .ranking import RankedList

log = logging.getLogger(__name__)


class SampleSkipped(Exception):
    """No non-answering source passage survives the exclusion filter."""


class ReformulationRejected(ValueError):
    """Reformulator output was empty or unparseable."""


@dataclass
class Sample:
    sample_id: str
    source: str
    context: str
    question: str
    intent: str | None = None
    source_doc_id: str | None = None
    target_doc_id: str | None = None
    split: str = "train"
    provenance: str = ""

    def __post_init__(self) -> None:
        if not self.question.strip():
            raise ValueError(f"sample '{self.sample_id}': question must be nonempty")
        if not self.context.strip():
            raise ValueError(f"sample '{self.sample_id}': context must be nonempty")
        if not self.split:
            raise ValueError(f"sample '{self.sample_id}': split must be nonempty")


@dataclass(frozen=True)
class TrainingPair:
    sample_id: str
    input_text: str
    target_doc_id: str
    label: str  # "positive" | "negative"


@dataclass(frozen=True)
class AuditEntry:
    sample_id: str
    question: str
    context: str
    intent: str
    flag_reason: str


@dataclass(frozen=True)
class Reformulation:
    context: str
    intent: str
    flag_reason: str | None = None


class Reformulator(Protocol):
    name: str

    def reformulate(self, question: str) -> Reformulation: ...

    def extract_intent(self, question: str) -> tuple[str, str | None]: ...


WH_WORDS = {"who", "what", "when", "where", "why", "how", "which", "whom", "whose"}
HOW_MODIFIERS = {"many", "much", "long", "far", "old", "often", "big", "tall", "deep", "soon"}
AUX_WORDS = {
    "do", "does", "did", "is", "are", "was", "were", "am", "be", "been", "being",
    "can", "could", "will", "would", "shall", "should", "may", "might", "must",
    "have", "has", "had",
}


class RuleBasedReformulator:
    """Deterministic fallback: leading WH-word group becomes the intent,
    the remaining content tokens become the context.  Lower fidelity than
    a model-backed reformulator; flagged outputs land in the audit file."""

    name = "rule"

    def reformulate(self, question: str) -> Reformulation:
        if not question.strip():
            raise ReformulationRejected("question must be nonempty")
        tokens = tokenize(question)
        if not tokens:
            return Reformulation(context=question.strip(), intent="what", flag_reason="untokenizable")
        group: list[str] = []
        i = 0
        if tokens[0] in WH_WORDS:
            group.append(tokens[0])
            i = 1
            if tokens[0] == "how" and i < len(tokens) and tokens[i] in HOW_MODIFIERS:
                group.append(tokens[i])
                i += 1
            while i < len(tokens) and tokens[i] in AUX_WORDS:
                group.append(tokens[i])
                i += 1
        rest = tokens[i:]
        if group and rest:
            return Reformulation(context=" ".join(rest), intent=" ".join(group))
        if not group:
            return Reformulation(context=" ".join(tokens), intent="what", flag_reason="no_wh_prefix")
        return Reformulation(
            context=question.strip(), intent=" ".join(group), flag_reason="intent_only_question"
        )

    def extract_intent(self, question: str) -> tuple[str, str | None]:
        r = self.reformulate(question)
        return r.intent, r.flag_reason


DEFAULT_REFORMULATION_PROMPT = (
    "Split the question into the thing it is about and what it asks about that thing.\n"
    "Answer with exactly two lines, 'context: ...' and 'intent: ...'.\n"
    "question: {question}"
)


class ProviderReformulator:
    """Reformulates through a text-generation provider."""

    def __init__(self, provider, prompt_template: str = DEFAULT_REFORMULATION_PROMPT,
                 max_tokens: int = 64):
        from .providers import GenerationRequest  # local to avoid import cycle in docs builds

        self._provider = provider
        self._template = prompt_template
        self._max_tokens = max_tokens
        self._request_cls = GenerationRequest
        self.name = f"provider:{provider.name}"

    def _parse(self, output: str) -> dict[str, str]:
        fields: dict[str, str] = {}
        for line in output.splitlines():
            label, _, value = line.partition(":")
            if label.strip().lower() in ("context", "intent") and value.strip():
                fields[label.strip().lower()] = value.strip()
        return fields

    def reformulate(self, question: str) -> Reformulation:
        if not question.strip():
            raise ReformulationRejected("question must be nonempty")
        prompt = self._template.format(question=question)
        output = self._provider.generate(
            self._request_cls(prompt=prompt, max_tokens=self._max_tokens, temperature=0.0)
        )
        fields = self._parse(output)
        if "context" not in fields or "intent" not in fields:
            raise ReformulationRejected(
                f"provider output missing context/intent lines: {output[:120]!r}"
            )
        return Reformulation(context=fields["context"], intent=fields["intent"])

    def extract_intent(self, question: str) -> tuple[str, str | None]:
        r = self.reformulate(question)
        return r.intent, r.flag_reason


def reformulate(question: str, reformulator: Reformulator) -> tuple[str, str]:
    """Split a question into (context, intent)."""
    r = reformulator.reformulate(question)
    if not r.context.strip() or not r.intent.strip():
        raise ReformulationRejected(f"empty context or intent for question {question!r}")
    return r.context, r.intent


def simulate_source(
    index: InvertedIndex,
    query: Query,
    judgments: Iterable[Judgment],
    k: int = 20,
) -> tuple[str, RankedList]:
    """Best-matching passage that does *not* answer the query.

    All docs judged relevant (grade >= 1) for the query are excluded; the
    top survivor becomes the source.  The full filtered top-k is returned
    for audit.  Raises SampleSkipped when nothing survives.
    """
    relevant = {j.doc_id for j in judgments if j.query_id == query.query_id and j.grade >= 1}
    candidates = search(index, query.text, k, exclude=relevant, query_ref=query.query_id)
    if not candidates.entries:
        raise SampleSkipped(f"query '{query.query_id}': no non-answering match in corpus")
    return candidates.entries[0][0], candidates


@dataclass
class AdaptResult:
    samples: list[Sample] = field(default_factory=list)
    audit: list[AuditEntry] = field(default_factory=list)
    skipped: list[tuple[str, str]] = field(default_factory=list)  # (query_id, reason)


def adapt_marco(
    corpus: Corpus,
    index: InvertedIndex,
    reformulator: Reformulator,
    ratios: tuple[float, float, float] = (0.8, 0.1, 0.1),
    seed: int = 0,
    source_depth: int = 20,
    max_queries: int | None = None,
) -> AdaptResult:
    """TREC-style collection -> samples: query becomes the question, its
    positively judged passage the target, and the best non-answering BM25
    match the source.  Deterministic for a fixed seed and reformulator."""
    eligible = sorted(qid for qid in corpus.queries if corpus.relevant_docs(qid))
    if max_queries is not None and max_queries < len(eligible):
        rng = random.Random(seed)
        eligible = sorted(rng.sample(eligible, max_queries))
    split_of = {a.query_id: a.split for a in assign_splits(eligible, ratios, seed)}
    result = AdaptResult()
    for query_id in eligible:
        query = corpus.queries[query_id]
        try:
            source_doc_id, _ = simulate_source(index, query, corpus.judgments, k=source_depth)
        except SampleSkipped as exc:
            log.info("skipping %s: %s", query_id, exc)
            result.skipped.append((query_id, str(exc)))
            continue
        positives = sorted(
            (j for j in corpus.judgments if j.query_id == query_id and j.grade >= 1),
            key=lambda j: (-j.grade, j.doc_id),
        )
        target_doc_id = positives[0].doc_id
        try:
            r = reformulator.reformulate(query.text)
        except ReformulationRejected as exc:
            log.warning("reformulation rejected for %s: %s", query_id, exc)
            result.skipped.append((query_id, f"reformulation rejected: {exc}"))
            continue
        sample = Sample(
            sample_id=query_id,
            source=corpus.documents[source_doc_id].text,
            context=r.context,
            question=query.text,
            intent=r.intent,
            source_doc_id=source_doc_id,
            target_doc_id=target_doc_id,
            split=split_of[query_id],
            provenance=reformulator.name,
        )
        result.samples.append(sample)
        if r.flag_reason:
            result.audit.append(
                AuditEntry(query_id, query.text, r.context, r.intent, r.flag_reason)
            )
    return result


def adapt_inquisitive(records: Iterable[dict], reformulator: Reformulator) -> AdaptResult:
    """Inquisitive-style rows -> samples: sentence is the source, the
    selected span the context, targets absent.  Split labels are kept
    verbatim.  Only the intent comes from the reformulator."""
    result = AdaptResult()
    for i, record in enumerate(records):
        row = {str(k).lower(): v for k, v in record.items()}
        missing = [k for k in ("sentence", "span", "question", "split") if not row.get(k)]
        if missing:
            raise ValueError(f"inquisitive row {i}: missing field(s) {', '.join(missing)}")
        sample_id = str(row.get("id") or f"inq-{i:06d}")
        sentence, span, question = str(row["sentence"]), str(row["span"]), str(row["question"])
        flag = None
        if span not in sentence:
            log.warning("sample %s: span is not a substring of its sentence", sample_id)
            flag = "span_not_in_sentence"
        intent, intent_flag = reformulator.extract_intent(question)
        sample = Sample(
            sample_id=sample_id,
            source=sentence,
            context=span,
            question=question,
            intent=intent,
            split=str(row["split"]),
            provenance=reformulator.name,
        )
        result.samples.append(sample)
        reason = flag or intent_flag
        if reason:
            result.audit.append(AuditEntry(sample_id, question, span, intent, reason))
    return result


def assemble_pairs(
    samples: Iterable[Sample],
    negatives_per_positive: int,
    seed: int,
    render: Callable[[Sample], str] | None = None,
) -> list[TrainingPair]:
    """One positive pair per targeted sample plus N negatives drawn
    uniformly without replacement from same-split targets."""
    if negatives_per_positive < 0:
        raise ValueError("negatives_per_positive must be >= 0")
    render = render or (lambda s: s.question)
    targeted = sorted(
        (s for s in samples if s.target_doc_id), key=lambda s: s.sample_id
    )
    targets_by_split: dict[str, list[str]] = {}
    for s in targeted:
        targets_by_split.setdefault(s.split, [])
    for split in targets_by_split:
        targets_by_split[split] = sorted(
            {s.target_doc_id for s in targeted if s.split == split}  # type: ignore[arg-type]
        )
    rng = random.Random(seed)
    pairs: list[TrainingPair] = []
    for s in targeted:
        pool = [t for t in targets_by_split[s.split] if t != s.target_doc_id]
        if len(pool) < negatives_per_positive:
            raise ValueError(
                f"sample '{s.sample_id}': split '{s.split}' has {len(pool)} alternative "
                f"targets but {negatives_per_positive} negatives were requested"
            )
        text = render(s)
        pairs.append(TrainingPair(s.sample_id, text, s.target_doc_id, "positive"))
        for target in rng.sample(pool, negatives_per_positive):
            pairs.append(TrainingPair(s.sample_id, text, target, "negative"))
    return pairs


_SAMPLE_KEYS = (
    "sample_id", "source", "context", "intent", "question",
    "source_doc_id", "target_doc_id", "split", "provenance",
)


def save_samples(samples: Iterable[Sample], path: str | Path) -> int:
    n = 0
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for s in samples:
            row = {k: getattr(s, k) for k in _SAMPLE_KEYS}
            f.write(json.dumps(row, sort_keys=True, ensure_ascii=False) + "\n")
            n += 1
    return n


def load_samples(path: str | Path) -> list[Sample]:
    out: list[Sample] = []
    with open(path, encoding="utf-8") as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.strip()
            if not line:
                continue
            try:
                row = json.loads(line)
                out.append(Sample(**{k: row.get(k) for k in _SAMPLE_KEYS if row.get(k) is not None}))
            except (json.JSONDecodeError, TypeError, ValueError) as exc:
                raise ValueError(f"{path}:{lineno}: bad sample record ({exc})")
    return out


def save_audit(entries: Iterable[AuditEntry], path: str | Path) -> int:
    n = 0
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for e in entries:
            row = {
                "sample_id": e.sample_id,
                "question": e.question,
                "context": e.context,
                "intent": e.intent,
                "flag_reason": e.flag_reason,
            }
            f.write(json.dumps(row, sort_keys=True, ensure_ascii=False) + "\n")
            n += 1
    return n


def read_inquisitive_records(path: str | Path) -> list[dict]:
    """JSONL (one object per row) or TSV with a header naming at least
    sentence, span, question, and split columns."""
    path = Path(path)
    records: list[dict] = []
    with open(path, encoding="utf-8") as f:
        if path.suffix.lower() == ".jsonl":
            for line in f:
                line = line.strip()
                if line:
                    records.append(json.loads(line))
            return records
        header: list[str] | None = None
        for raw in f:
            line = raw.rstrip("\n")
            if not line:
                continue
            fields = line.split("\t")
            if header is None:
                header = [h.strip().lower() for h in fields]
                continue
            records.append(dict(zip(header, fields)))
    return records
