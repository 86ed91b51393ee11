"""The five input variants and the two prediction paths: question
generation and passage retrieval."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping

from .adaptation import Sample
from .corpus import Document
from .lexical import build_index
from .providers import GenerationRequest
from .ranking import RankedList
from .scorers import CrossScorer, EmbeddingScorer, LexicalScorer


class VariantKind(str, Enum):
    QUESTION = "question"
    CONTEXT_INTENT = "context_intent"
    SOURCE_INTENT = "source_intent"
    CONTEXT = "context"
    SOURCE = "source"


# Row order used by grid tables; question is a retrieval-only baseline.
VARIANT_ORDER = (
    VariantKind.QUESTION,
    VariantKind.CONTEXT_INTENT,
    VariantKind.SOURCE_INTENT,
    VariantKind.CONTEXT,
    VariantKind.SOURCE,
)
GENERATION_KINDS = tuple(k for k in VARIANT_ORDER if k is not VariantKind.QUESTION)

DEFAULT_SEPARATOR = "|"

_VARIANT_FIELDS: dict[VariantKind, tuple[str, ...]] = {
    VariantKind.QUESTION: ("question",),
    VariantKind.CONTEXT_INTENT: ("context", "intent"),
    VariantKind.SOURCE_INTENT: ("source", "intent"),
    VariantKind.CONTEXT: ("context",),
    VariantKind.SOURCE: ("source",),
}

DEFAULT_PROMPT_TEMPLATES: dict[VariantKind, str] = {
    VariantKind.CONTEXT_INTENT: (
        "context: {context}\nintent: {intent}\n"
        "write the full question this reader would ask."
    ),
    VariantKind.SOURCE_INTENT: (
        "source: {source}\nintent: {intent}\n"
        "write the full question this reader would ask."
    ),
    VariantKind.CONTEXT: (
        "context: {context}\nwrite the full question this reader would ask."
    ),
    VariantKind.SOURCE: (
        "source: {source}\nwrite the full question this reader would ask."
    ),
}


@dataclass(frozen=True)
class InputVariant:
    kind: VariantKind
    rendered_text: str
    sample_id: str | None = None
    fields: Mapping[str, str] = field(default_factory=dict)


def build_variant(sample: Sample, kind: VariantKind, separator: str = DEFAULT_SEPARATOR) -> InputVariant:
    """Render a sample into one of the five experiment inputs.

    Reads only the fields the kind names; raises naming the first field
    that is missing or empty.
    """
    kind = VariantKind(kind)
    values: dict[str, str] = {}
    for name in _VARIANT_FIELDS[kind]:
        value = getattr(sample, name)
        if value is None or not str(value).strip():
            raise ValueError(
                f"variant '{kind.value}' requires field '{name}', missing on sample "
                f"'{sample.sample_id}'"
            )
        values[name] = str(value)
    if kind is VariantKind.CONTEXT_INTENT:
        rendered = f"{values['context']} {separator} {values['intent']}"
    elif kind is VariantKind.SOURCE_INTENT:
        rendered = f"{values['source']} {separator} {values['intent']}"
    else:
        rendered = values[_VARIANT_FIELDS[kind][0]]
    return InputVariant(kind=kind, rendered_text=rendered, sample_id=sample.sample_id, fields=values)


def route_variant(source: str | None, context: str | None, intent: str | None) -> VariantKind | None:
    """Map present/absent request fields to the variant serving them.

    Returns None when neither context nor source carries text.
    """
    has_source = bool(source and source.strip())
    has_context = bool(context and context.strip())
    has_intent = bool(intent and intent.strip())
    if has_intent:
        if has_context:
            return VariantKind.CONTEXT_INTENT
        if has_source:
            return VariantKind.SOURCE_INTENT
        return None
    if has_context:
        return VariantKind.CONTEXT
    if has_source:
        return VariantKind.SOURCE
    return None


def variant_from_fields(
    source: str | None,
    context: str | None,
    intent: str | None,
    separator: str = DEFAULT_SEPARATOR,
) -> InputVariant | None:
    """Route raw request fields and render the resulting variant."""
    kind = route_variant(source, context, intent)
    if kind is None:
        return None
    available = {"source": source, "context": context, "intent": intent, "question": None}
    values = {name: str(available[name]).strip() for name in _VARIANT_FIELDS[kind]}
    if kind is VariantKind.CONTEXT_INTENT:
        rendered = f"{values['context']} {separator} {values['intent']}"
    elif kind is VariantKind.SOURCE_INTENT:
        rendered = f"{values['source']} {separator} {values['intent']}"
    else:
        rendered = values[_VARIANT_FIELDS[kind][0]]
    return InputVariant(kind=kind, rendered_text=rendered, fields=values)


def generate_question(
    variant: InputVariant,
    provider,
    prompt_template: str | None = None,
    max_tokens: int = 64,
    temperature: float = 0.0,
    variation: int = 0,
) -> str:
    """Predict the full question for a variant through a provider."""
    template = prompt_template or DEFAULT_PROMPT_TEMPLATES.get(variant.kind)
    if template is None:
        raise ValueError(f"no default prompt template for variant '{variant.kind.value}'")
    try:
        prompt = template.format(**variant.fields)
    except KeyError as exc:
        raise ValueError(
            f"template placeholder {exc} is not a field of variant '{variant.kind.value}'"
        )
    if variation:
        prompt += f"\nvariation: {variation}"
    text = provider.generate(
        GenerationRequest(prompt=prompt, max_tokens=max_tokens, temperature=temperature)
    ).strip()
    if not text:
        raise ValueError("provider returned an empty question")
    return text


def build_candidate_pool(samples: Iterable[Sample], splits: Iterable[str]) -> set[str]:
    """Union of target doc ids over the requested splits."""
    wanted = set(splits)
    return {s.target_doc_id for s in samples if s.target_doc_id and s.split in wanted}


@dataclass
class RetrievalPipeline:
    """First-stage scorer over a fixed candidate pool, with an optional
    reranker reordering the first stage's top-d."""

    documents: dict[str, Document]
    first_stage: object
    reranker: object | None = None
    depth: int | None = None

    def run(self, input_text: str, k: int, query_ref: str | None = None) -> RankedList:
        if not self.documents:
            raise ValueError("empty candidate pool")
        if k < 1:
            raise ValueError(f"k must be >= 1, got {k}")
        scored = [
            (doc_id, self.first_stage.score(input_text, doc))
            for doc_id, doc in self.documents.items()
        ]
        scored.sort(key=lambda item: (-item[1], item[0]))
        if self.reranker is not None:
            d = self.depth if self.depth is not None else len(scored)
            if d < k:
                raise ValueError(f"rerank depth {d} is smaller than k={k}")
            head = scored[:d]
            reranked = [
                (doc_id, self.reranker.score(input_text, self.documents[doc_id]))
                for doc_id, _ in head
            ]
            reranked.sort(key=lambda item: (-item[1], item[0]))
            scored = reranked
        return RankedList(query_ref if query_ref is not None else input_text, scored[:k])


def retrieve(variant: InputVariant, pipeline: RetrievalPipeline, k: int) -> RankedList:
    """Top-k candidates for a variant; query_ref is the sample id."""
    return pipeline.run(variant.rendered_text, k, query_ref=variant.sample_id)


def make_pipeline(
    documents: Mapping[str, Document],
    config: Mapping | None = None,
    providers: Mapping[str, object] | None = None,
) -> RetrievalPipeline:
    """Build a pipeline from a config mapping.

    Config shape: {"first": {"kind": ..., "provider": ..., "k1": ..., "b": ...},
    "reranker": {...} or absent, "depth": int or absent}.  Defaults to a
    lexical-only pipeline.
    """
    config = dict(config or {})
    providers = providers or {}
    documents = dict(documents)

    def stage(spec) -> object:
        if isinstance(spec, str):
            spec = {"kind": spec}
        kind = spec.get("kind", "lexical")
        if kind == "lexical":
            index = build_index(documents, k1=spec.get("k1", 0.9), b=spec.get("b", 0.4))
            return LexicalScorer(index)
        provider_name = spec.get("provider")
        if provider_name not in providers:
            raise ValueError(f"scorer kind '{kind}' names unknown provider {provider_name!r}")
        provider = providers[provider_name]
        if kind == "embedding":
            return EmbeddingScorer(provider)
        if kind == "cross":
            return CrossScorer(provider)
        raise ValueError(f"unknown scorer kind {kind!r}")

    first = stage(config.get("first", "lexical"))
    reranker = stage(config["reranker"]) if config.get("reranker") else None
    return RetrievalPipeline(
        documents=documents,
        first_stage=first,
        reranker=reranker,
        depth=config.get("depth"),
    )


def write_generations(records: Iterable[dict], path: str | Path) -> int:
    """JSONL of {sample_id, variant, generated_question} rows."""
    n = 0
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for record in records:
            f.write(json.dumps(record, sort_keys=True, ensure_ascii=False) + "\n")
            n += 1
    return n


def read_generations(path: str | Path) -> list[dict]:
    out = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if line:
                out.append(json.loads(line))
    return out
