"""Contracts for the three model roles and the HTTP+JSON wire protocol.

Three backends sit behind the platform: a question generator conditioned on
(passage, answer), an extractive QA model, and an answer-candidate
extractor.  All spans crossing this boundary are re-validated against the
passage text; backends are never trusted to return well-formed spans.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Protocol

import httpx
from pydantic import BaseModel

from .corpus import Passage
from .errors import PreconditionError, ProtocolViolationError, TransportError

# Standardized error strings: any server implementing the wire protocol must
# use these verbatim so conformance fixtures can compare bodies byte-for-byte.
ERR_INVALID_BODY = "invalid request body"
ERR_BAD_SPAN = "answer span does not match passage text"
ERR_BAD_N = "n must be >= 1"
ERR_BAD_TOP_P = "top_p must be in (0, 1]"
ERR_BAD_MAX = "max must be >= 1"
ERR_EMPTY_QUESTION = "question must be non-empty"
ERR_INTERNAL = "internal error"


@dataclass(frozen=True)
class AnswerSpan:
    text: str
    char_start: int

    def valid_in(self, passage_text: str) -> bool:
        if self.char_start < 0 or not self.text:
            return False
        end = self.char_start + len(self.text)
        return passage_text[self.char_start : end] == self.text

    def key(self) -> tuple[int, str]:
        from .text import normalize  # late import avoids cycle at module load

        return (self.char_start, " ".join(normalize(self.text)))


@dataclass(frozen=True)
class GeneratedQuestion:
    question: str
    log_likelihood: float
    generator_id: str


@dataclass(frozen=True)
class QAPrediction:
    span: AnswerSpan
    confidence: float


@dataclass(frozen=True)
class AnswerCandidate:
    span: AnswerSpan
    score: float


class GeneratorBackend(Protocol):
    def generate(
        self, passage: Passage, answer: AnswerSpan, n: int, top_p: float
    ) -> list[GeneratedQuestion]: ...


class QABackend(Protocol):
    def predict(self, passage: Passage, question: str) -> QAPrediction: ...


class CandidateBackend(Protocol):
    def extract(self, passage: Passage, max_candidates: int) -> list[AnswerCandidate]: ...


# --- wire models (shared by clients and any server implementation) ---------


class WireSpan(BaseModel):
    text: str
    char_start: int


class GenerateRequest(BaseModel):
    passage_id: str
    passage: str
    answer: WireSpan
    n: int
    top_p: float


class WireQuestion(BaseModel):
    question: str
    log_likelihood: float


class GenerateResponse(BaseModel):
    questions: list[WireQuestion]


class QARequest(BaseModel):
    passage_id: str
    passage: str
    question: str


class QAResponse(BaseModel):
    answer: WireSpan
    confidence: float


class CandidatesRequest(BaseModel):
    passage_id: str
    passage: str
    max: int


class WireCandidate(BaseModel):
    text: str
    char_start: int
    score: float


class CandidatesResponse(BaseModel):
    candidates: list[WireCandidate]


# --- validated operations ---------------------------------------------------


def _check_span(span: AnswerSpan, passage: Passage) -> None:
    if not span.valid_in(passage.text):
        raise ProtocolViolationError(
            f"span {span.text!r}@{span.char_start} does not match passage {passage.id}"
        )


def generate_questions(
    backend: GeneratorBackend,
    passage: Passage,
    answer: AnswerSpan,
    n: int,
    top_p: float,
) -> list[GeneratedQuestion]:
    """Ask the generator for up to n questions; dedupe exact repeats."""
    if n < 1:
        raise PreconditionError(ERR_BAD_N)
    if not (0.0 < top_p <= 1.0):
        raise PreconditionError(ERR_BAD_TOP_P)
    if not answer.valid_in(passage.text):
        raise PreconditionError(ERR_BAD_SPAN)
    seen: set[str] = set()
    out: list[GeneratedQuestion] = []
    for gq in backend.generate(passage, answer, n, top_p):
        if not gq.question:
            raise ProtocolViolationError("generator returned an empty question")
        if not math.isfinite(gq.log_likelihood) or gq.log_likelihood > 0:
            raise ProtocolViolationError(
                f"log_likelihood must be finite and <= 0, got {gq.log_likelihood}"
            )
        if gq.question in seen:
            continue
        seen.add(gq.question)
        out.append(gq)
        if len(out) == n:
            break
    return out


def predict_answer(backend: QABackend, passage: Passage, question: str) -> QAPrediction:
    if not question:
        raise PreconditionError(ERR_EMPTY_QUESTION)
    pred = backend.predict(passage, question)
    _check_span(pred.span, passage)
    if not (0.0 < pred.confidence <= 1.0):
        raise ProtocolViolationError(f"confidence must be in (0, 1], got {pred.confidence}")
    return pred


def extract_answer_candidates(
    backend: CandidateBackend, passage: Passage, max_candidates: int
) -> list[AnswerCandidate]:
    if max_candidates < 1:
        raise PreconditionError(ERR_BAD_MAX)
    seen: set[tuple[int, str]] = set()
    out: list[AnswerCandidate] = []
    for cand in backend.extract(passage, max_candidates):
        _check_span(cand.span, passage)
        key = (cand.span.char_start, cand.span.text)
        if key in seen:
            continue
        seen.add(key)
        out.append(cand)
    out.sort(key=lambda c: (-c.score, c.span.char_start, c.span.text))
    return out[:max_candidates]


# --- HTTP clients ------------------------------------------------------------


class _HttpBase:
    def __init__(self, base_url: str, client: httpx.Client | None = None, retries: int = 2):
        self.base_url = base_url.rstrip("/")
        self._client = client or httpx.Client(timeout=30.0)
        self.retries = retries

    def _post(self, path: str, body: dict) -> dict:
        url = self.base_url + path
        last_exc: Exception | None = None
        for attempt in range(1, self.retries + 1):
            try:
                resp = self._client.post(url, json=body)
            except httpx.HTTPError as exc:
                last_exc = exc
                continue
            if resp.status_code != 200:
                raise ProtocolViolationError(
                    f"backend {url} answered HTTP {resp.status_code}: {resp.text[:200]}"
                )
            try:
                return resp.json()
            except ValueError:
                raise ProtocolViolationError(f"backend {url} returned non-JSON body")
        raise TransportError(
            f"backend unreachable after {self.retries} attempts: {last_exc}",
            url=url,
            attempts=self.retries,
        )


class HttpGenerator(_HttpBase):
    def generate(
        self, passage: Passage, answer: AnswerSpan, n: int, top_p: float
    ) -> list[GeneratedQuestion]:
        body = GenerateRequest(
            passage_id=passage.id,
            passage=passage.text,
            answer=WireSpan(text=answer.text, char_start=answer.char_start),
            n=n,
            top_p=top_p,
        ).model_dump()
        raw = self._post("/v1/generate", body)
        try:
            parsed = GenerateResponse.model_validate(raw)
        except Exception as exc:
            raise ProtocolViolationError(f"bad generate response: {exc}") from None
        return [
            GeneratedQuestion(q.question, q.log_likelihood, generator_id=self.base_url)
            for q in parsed.questions
        ]


class HttpQA(_HttpBase):
    def predict(self, passage: Passage, question: str) -> QAPrediction:
        body = QARequest(passage_id=passage.id, passage=passage.text, question=question)
        raw = self._post("/v1/qa", body.model_dump())
        try:
            parsed = QAResponse.model_validate(raw)
        except Exception as exc:
            raise ProtocolViolationError(f"bad qa response: {exc}") from None
        return QAPrediction(
            AnswerSpan(parsed.answer.text, parsed.answer.char_start), parsed.confidence
        )


class HttpCandidates(_HttpBase):
    def extract(self, passage: Passage, max_candidates: int) -> list[AnswerCandidate]:
        body = CandidatesRequest(passage_id=passage.id, passage=passage.text, max=max_candidates)
        raw = self._post("/v1/candidates", body.model_dump())
        try:
            parsed = CandidatesResponse.model_validate(raw)
        except Exception as exc:
            raise ProtocolViolationError(f"bad candidates response: {exc}") from None
        return [
            AnswerCandidate(AnswerSpan(c.text, c.char_start), c.score) for c in parsed.candidates
        ]
