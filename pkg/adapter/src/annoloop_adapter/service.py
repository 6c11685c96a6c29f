"""HTTP surface: /v1/generate, /v1/qa, /v1/candidates.

Enforces the protocol's preconditions and response invariants regardless of
which model bundle sits underneath; a model is never trusted to validate.
"""

import json
import math
from pathlib import Path

import uvicorn
from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse

from .wire import (
    ERR_BAD_MAX,
    ERR_BAD_N,
    ERR_BAD_SPAN,
    ERR_BAD_TOP_P,
    ERR_EMPTY_QUESTION,
    ERR_INTERNAL,
    ERR_INVALID_BODY,
    CandidatesRequest,
    GenerateRequest,
    ModelBundle,
    QARequest,
    span_valid,
)


class RequestError(Exception):
    """Maps to HTTP 400 with the message as the error body."""


def create_app(models: ModelBundle) -> FastAPI:
    app = FastAPI(title="annoloop model adapter", docs_url=None, redoc_url=None)

    @app.exception_handler(RequestValidationError)
    async def _bad_body(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"error": ERR_INVALID_BODY})

    @app.exception_handler(RequestError)
    async def _bad_request(request: Request, exc: RequestError):
        return JSONResponse(status_code=400, content={"error": str(exc)})

    @app.exception_handler(Exception)
    async def _internal(request: Request, exc: Exception):
        return JSONResponse(status_code=500, content={"error": ERR_INTERNAL})

    @app.post("/v1/generate")
    def generate(req: GenerateRequest):
        if req.n < 1:
            raise RequestError(ERR_BAD_N)
        if not (0.0 < req.top_p <= 1.0):
            raise RequestError(ERR_BAD_TOP_P)
        if not span_valid(req.answer.text, req.answer.char_start, req.passage):
            raise RequestError(ERR_BAD_SPAN)
        raw = models.generate(req.passage, req.answer.text, req.answer.char_start, req.n, req.top_p)
        seen: set[str] = set()
        questions = []
        for question, ll in raw:
            if not question or question in seen:
                continue
            if not math.isfinite(ll):
                continue
            seen.add(question)
            # float noise in summed log-probabilities must not escape the contract
            questions.append({"question": question, "log_likelihood": min(ll, 0.0)})
            if len(questions) == req.n:
                break
        return {"questions": questions}

    @app.post("/v1/qa")
    def answer(req: QARequest):
        if not req.question:
            raise RequestError(ERR_EMPTY_QUESTION)
        text, start, confidence = models.predict(req.passage, req.question)
        if not span_valid(text, start, req.passage):
            raise RuntimeError(f"model produced an invalid span at {start}")
        confidence = min(max(confidence, 1e-9), 1.0)
        return {"answer": {"text": text, "char_start": start}, "confidence": confidence}

    @app.post("/v1/candidates")
    def candidates(req: CandidatesRequest):
        if req.max < 1:
            raise RequestError(ERR_BAD_MAX)
        raw = models.extract(req.passage, req.max)
        seen: set[tuple[int, str]] = set()
        out = []
        for text, start, score in raw:
            if not span_valid(text, start, req.passage):
                continue
            key = (start, text)
            if key in seen:
                continue
            seen.add(key)
            out.append({"text": text, "char_start": start, "score": score})
        out.sort(key=lambda c: (-c["score"], c["char_start"], c["text"]))
        return {"candidates": out[: req.max]}

    return app


def load_models(config: dict) -> ModelBundle:
    """Build the bundle named by config; real checkpoints need the models extra."""
    kind = config.get("kind", "stub")
    if kind == "stub":
        from .stub import StubModels

        return StubModels(seed=int(config.get("seed", 0)))
    if kind == "hf":
        from .hf import HFModels

        return HFModels(config)
    raise ValueError(f"unknown model kind {kind!r}")


def serve_backend(config_path: str | Path, host: str = "127.0.0.1", port: int = 8100) -> None:
    config = json.loads(Path(config_path).read_text())
    app = create_app(load_models(config))
    uvicorn.run(app, host=host, port=port, log_level="warning")
