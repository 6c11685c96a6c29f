"""Deterministic mock backends for desk-scale runs.

Each mock is a pure function of its inputs plus a seed: identical requests
always produce identical responses, with no shared RNG state.  The QA mock
can be told the gold answer for a (passage, question) pair so simulations
can dial how often the model answers correctly.
"""

from __future__ import annotations

import re

from .backends import AnswerCandidate, AnswerSpan, GeneratedQuestion, QAPrediction
from .corpus import Passage
from .rand import unit_float
from .text import f1_overlap

_WORD_RE = re.compile(r"\w+")

CANDIDATE_CAP = 20


def _word_tokens(text: str) -> list[tuple[str, int, int]]:
    return [(m.group(), m.start(), m.end()) for m in _WORD_RE.finditer(text)]


def heuristic_candidates(text: str) -> list[AnswerCandidate]:
    """Maximal capitalized runs plus standalone numeric tokens.

    Runs score their token count, numbers score 1; ties order by position.
    """
    tokens = _word_tokens(text)
    spans: dict[tuple[int, str], float] = {}
    run: list[tuple[str, int, int]] = []

    def flush() -> None:
        if run:
            start, end = run[0][1], run[-1][2]
            spans[(start, text[start:end])] = float(len(run))
            run.clear()

    for tok, start, end in tokens:
        if tok[0].isupper():
            run.append((tok, start, end))
        else:
            flush()
    flush()
    for tok, start, end in tokens:
        if tok.isdigit():
            spans.setdefault((start, tok), 1.0)
    cands = [
        AnswerCandidate(AnswerSpan(t, s), score) for (s, t), score in spans.items()
    ]
    cands.sort(key=lambda c: (-c.score, c.span.char_start))
    return cands[:CANDIDATE_CAP]


def _answer_type_word(answer_text: str) -> str:
    stripped = answer_text.strip()
    if stripped.isdigit():
        return "year" if len(stripped) == 4 else "number"
    if stripped[:1].isupper():
        return "name"
    return "thing"


class MockGenerator:
    """Template question generator keyed on the answer's left context."""

    def __init__(self, seed: int = 0, source: str = "squad"):
        self.seed = seed
        self.source = source
        self.generator_id = f"mock-generator:{source}"
        self.requests: list[dict] = []

    def generate(
        self, passage: Passage, answer: AnswerSpan, n: int, top_p: float
    ) -> list[GeneratedQuestion]:
        self.requests.append(
            {
                "passage_id": passage.id,
                "answer": {"text": answer.text, "char_start": answer.char_start},
                "n": n,
                "top_p": top_p,
            }
        )
        left = [tok for tok, start, _ in _word_tokens(passage.text) if start < answer.char_start]
        type_word = _answer_type_word(answer.text)
        out = []
        for i in range(n):
            context = left[-(i + 1) :] if i < len(left) else left
            if context:
                question = f"What is {' '.join(context)} {type_word}?"
            else:
                question = f"What is the {type_word} in the passage?"
            u = unit_float(
                self.seed, "gen", self.source, passage.id, answer.char_start, answer.text, question
            )
            log_likelihood = -(0.001 + 4.998 * u)
            out.append(GeneratedQuestion(question, log_likelihood, self.generator_id))
        return out


class MockQA:
    """Extractive QA stand-in with a dial for how often it is right.

    When a gold span is registered for (passage, question), the mock returns
    it with probability skill * (1 - difficulty); otherwise it returns a
    decoy candidate span, preferring one with no token overlap with the gold.
    """

    def __init__(self, skill: float = 0.9, seed: int = 0):
        self.skill = skill
        self.seed = seed
        self._gold: dict[tuple[str, str], tuple[AnswerSpan, float]] = {}
        self.requests: list[dict] = []

    def register_gold(
        self, passage_id: str, question: str, span: AnswerSpan, difficulty: float = 0.0
    ) -> None:
        self._gold[(passage_id, question)] = (span, difficulty)

    def predict(self, passage: Passage, question: str) -> QAPrediction:
        self.requests.append({"passage_id": passage.id, "question": question})
        registered = self._gold.get((passage.id, question))
        if registered is not None:
            gold, difficulty = registered
            p_correct = self.skill * (1.0 - difficulty)
            if unit_float(self.seed, "qa-hit", passage.id, question) < p_correct:
                confidence = 0.7 + 0.3 * unit_float(self.seed, "qa-conf", passage.id, question)
                return QAPrediction(gold, confidence)
        decoy = self._decoy_span(passage, question, avoid=registered[0] if registered else None)
        confidence = 0.5 * (1.0 - unit_float(self.seed, "qa-conf", passage.id, question))
        return QAPrediction(decoy, max(confidence, 1e-9))

    def _decoy_span(
        self, passage: Passage, question: str, avoid: AnswerSpan | None
    ) -> AnswerSpan:
        pool = [c.span for c in heuristic_candidates(passage.text)]
        if avoid is not None:
            no_overlap = [
                s
                for s in pool
                if s != avoid and f1_overlap(s.text, avoid.text).value == 0.0
            ]
            pool = no_overlap or [s for s in pool if s != avoid]
        if not pool:
            pool = self._window_spans(passage.text)
        if not pool:
            return AnswerSpan(passage.text, 0)
        idx = int(unit_float(self.seed, "qa-decoy", passage.id, question) * len(pool))
        return pool[min(idx, len(pool) - 1)]

    @staticmethod
    def _window_spans(text: str, width: int = 3) -> list[AnswerSpan]:
        tokens = _word_tokens(text)
        spans = []
        for i in range(0, max(0, len(tokens) - width + 1), width):
            start, end = tokens[i][1], tokens[min(i + width, len(tokens)) - 1][2]
            spans.append(AnswerSpan(text[start:end], start))
        return spans


class MockCandidateExtractor:
    """Serves the capitalization/number heuristic over the wire contract."""

    def __init__(self, seed: int = 0):
        self.seed = seed
        self.requests: list[dict] = []

    def extract(self, passage: Passage, max_candidates: int) -> list[AnswerCandidate]:
        self.requests.append({"passage_id": passage.id, "max": max_candidates})
        return heuristic_candidates(passage.text)[:max_candidates]


def mock_backend_set(seed: int = 0, skill: float = 0.9, source: str = "squad"):
    """One generator/QA/extractor triple sharing a seed."""
    return MockGenerator(seed=seed, source=source), MockQA(skill=skill, seed=seed), MockCandidateExtractor(seed=seed)
