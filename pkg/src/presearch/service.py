"""HTTP API for interactive prediction: highlight a context, optionally
type a partial intent, get predicted questions and answering passages.

Stateless: responses depend only on the request, the corpus loaded at
startup, and provider behavior.  User content is not logged unless debug
logging is explicitly enabled.
"""

from __future__ import annotations

import logging
import time

from fastapi import FastAPI
from fastapi.exceptions import HTTPException, RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field, field_validator

from .corpus import Corpus
from .prediction import RetrievalPipeline, generate_question, variant_from_fields
from .providers import ProviderError

log = logging.getLogger(__name__)

MODES = ("questions", "passages")


class PredictRequest(BaseModel):
    source: str | None = None
    context: str | None = None
    intent: str | None = None
    modes: list[str] = Field(default=list(MODES))
    k: int = Field(default=10, ge=1)
    n_questions: int = Field(default=3, ge=1)

    @field_validator("modes")
    @classmethod
    def _check_modes(cls, value: list[str]) -> list[str]:
        if not value:
            raise ValueError("modes must not be empty")
        unknown = [m for m in value if m not in MODES]
        if unknown:
            raise ValueError(f"unknown modes {unknown}; expected subset of {list(MODES)}")
        return value


class QuestionOut(BaseModel):
    text: str
    provider: str


class PassageOut(BaseModel):
    doc_id: str
    snippet: str
    score: float
    rank: int


class PredictResponse(BaseModel):
    questions: list[QuestionOut]
    passages: list[PassageOut]
    variant_used: str
    latency_ms: int


def create_app(
    corpus: Corpus,
    generation_provider,
    pipeline: RetrievalPipeline | None,
    separator: str = "|",
    allow_origins: tuple[str, ...] = ("*",),
    snippet_chars: int = 240,
) -> FastAPI:
    app = FastAPI(title="presearch", docs_url=None, redoc_url=None)
    app.add_middleware(
        CORSMiddleware,
        allow_origins=list(allow_origins),
        allow_methods=["*"],
        allow_headers=["*"],
    )

    providers = [generation_provider]
    if pipeline is not None:
        for stage in (pipeline.first_stage, pipeline.reranker):
            provider = getattr(stage, "provider", None)
            if provider is not None and provider not in providers:
                providers.append(provider)

    @app.exception_handler(HTTPException)
    async def _http_error(_, exc: HTTPException):
        return JSONResponse(
            status_code=exc.status_code,
            content={"code": exc.status_code, "message": str(exc.detail)},
        )

    @app.exception_handler(RequestValidationError)
    async def _validation_error(_, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"code": 400, "message": str(exc.errors())})

    @app.post("/api/predict", response_model=PredictResponse)
    def predict(request: PredictRequest) -> PredictResponse:
        started = time.perf_counter()
        variant = variant_from_fields(request.source, request.context, request.intent, separator)
        if variant is None:
            raise HTTPException(status_code=400, detail="context or source must be nonempty")
        questions: list[QuestionOut] = []
        if "questions" in request.modes:
            seen: set[str] = set()
            for i in range(request.n_questions):
                try:
                    text = generate_question(variant, generation_provider, variation=i)
                except ProviderError as exc:
                    raise HTTPException(status_code=503, detail=f"generation provider down: {exc}")
                if text not in seen:
                    seen.add(text)
                    questions.append(QuestionOut(text=text, provider=generation_provider.name))
        passages: list[PassageOut] = []
        if "passages" in request.modes:
            if pipeline is None:
                raise HTTPException(status_code=503, detail="no retrieval pipeline configured")
            try:
                ranked = pipeline.run(variant.rendered_text, request.k)
            except ProviderError as exc:
                raise HTTPException(status_code=503, detail=f"scoring provider down: {exc}")
            for rank, (doc_id, score) in enumerate(ranked.entries, start=1):
                doc = corpus.documents[doc_id]
                passages.append(
                    PassageOut(
                        doc_id=doc_id,
                        snippet=doc.text[:snippet_chars],
                        score=score,
                        rank=rank,
                    )
                )
        return PredictResponse(
            questions=questions,
            passages=passages,
            variant_used=variant.kind.value,
            latency_ms=int((time.perf_counter() - started) * 1000),
        )

    @app.get("/api/health")
    def health() -> dict:
        return {
            "status": "ok",
            "corpus_docs": len(corpus.documents),
            "providers": [
                {"name": p.name, "reachable": p.reachable()} for p in providers
            ],
        }

    @app.get("/api/document/{doc_id}")
    def document(doc_id: str) -> dict:
        doc = corpus.documents.get(doc_id)
        if doc is None:
            raise HTTPException(status_code=404, detail=f"unknown document '{doc_id}'")
        return {"doc_id": doc.doc_id, "text": doc.text, "title": doc.title}

    return app
