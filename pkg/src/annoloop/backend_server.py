"""HTTP server wrapping a generator/QA/extractor triple behind the wire protocol.

Used to serve the deterministic mocks as real network backends and as the
reference implementation for protocol conformance fixtures.
"""

from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse

from .backends import (
    ERR_INTERNAL,
    ERR_INVALID_BODY,
    CandidatesRequest,
    GenerateRequest,
    QARequest,
    AnswerSpan,
    extract_answer_candidates,
    generate_questions,
    predict_answer,
)
from .corpus import passage_from_record
from .errors import PlatformError


def create_backend_app(generator, qa, extractor) -> FastAPI:
    app = FastAPI(title="annoloop model backend", docs_url=None, redoc_url=None)

    @app.exception_handler(RequestValidationError)
    async def _bad_body(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"error": ERR_INVALID_BODY})

    @app.exception_handler(PlatformError)
    async def _domain_error(request: Request, exc: PlatformError):
        return JSONResponse(status_code=400, content={"error": str(exc)})

    @app.exception_handler(Exception)
    async def _internal(request: Request, exc: Exception):
        return JSONResponse(status_code=500, content={"error": ERR_INTERNAL})

    def _passage(pid: str, text: str):
        return passage_from_record({"id": pid or "wire", "text": text})

    @app.post("/v1/generate")
    def generate(req: GenerateRequest):
        passage = _passage(req.passage_id, req.passage)
        answer = AnswerSpan(req.answer.text, req.answer.char_start)
        questions = generate_questions(generator, passage, answer, req.n, req.top_p)
        return {
            "questions": [
                {"question": q.question, "log_likelihood": q.log_likelihood} for q in questions
            ]
        }

    @app.post("/v1/qa")
    def answer(req: QARequest):
        passage = _passage(req.passage_id, req.passage)
        pred = predict_answer(qa, passage, req.question)
        return {
            "answer": {"text": pred.span.text, "char_start": pred.span.char_start},
            "confidence": pred.confidence,
        }

    @app.post("/v1/candidates")
    def candidates(req: CandidatesRequest):
        passage = _passage(req.passage_id, req.passage)
        cands = extract_answer_candidates(extractor, passage, req.max)
        return {
            "candidates": [
                {"text": c.span.text, "char_start": c.span.char_start, "score": c.score}
                for c in cands
            ]
        }

    return app
