"""Wire protocol types, kept deliberately independent of the platform package.

The error strings are part of the wire contract: clients match on them and the
shared conformance fixtures compare response bodies byte for byte, so any
change here is a protocol break.
"""

from typing import Protocol

from pydantic import BaseModel

ERR_INVALID_BODY = "invalid request body"
ERR_BAD_SPAN = "answer span does not match passage text"
ERR_BAD_N = "n must be >= 1"
ERR_BAD_TOP_P = "top_p must be in (0, 1]"
ERR_BAD_MAX = "max must be >= 1"
ERR_EMPTY_QUESTION = "question must be non-empty"
ERR_INTERNAL = "internal error"


class WireSpan(BaseModel):
    text: str
    char_start: int


class GenerateRequest(BaseModel):
    passage_id: str
    passage: str
    answer: WireSpan
    n: int
    top_p: float


class QARequest(BaseModel):
    passage_id: str
    passage: str
    question: str


class CandidatesRequest(BaseModel):
    passage_id: str
    passage: str
    max: int


def span_valid(text: str, char_start: int, passage: str) -> bool:
    if char_start < 0 or not text:
        return False
    return passage[char_start : char_start + len(text)] == text


class ModelBundle(Protocol):
    """The three model roles behind one server process."""

    def generate(
        self, passage: str, answer_text: str, answer_start: int, n: int, top_p: float
    ) -> list[tuple[str, float]]:
        """(question, log_likelihood) pairs; may contain duplicates."""
        ...

    def predict(self, passage: str, question: str) -> tuple[str, int, float]:
        """(answer_text, char_start, confidence); the span must occur in passage."""
        ...

    def extract(self, passage: str, max_candidates: int) -> list[tuple[str, int, float]]:
        """(text, char_start, score) candidates; may exceed max_candidates."""
        ...
