"""Question-prompt generation, scoring, caching and strategy-ordered serving.

Prompts are pre-generated per (passage, answer candidate) and scored once
against the QA model.  Serving pops the strategy-best prompt, falls back to
live generation when a key is missing or exhausted, and never serves the
same prompt twice.
"""

from __future__ import annotations

import enum
import hashlib
import json
import threading
from dataclasses import dataclass, field, replace
from typing import IO, Iterable

from .backends import (
    AnswerSpan,
    CandidateBackend,
    GeneratorBackend,
    QABackend,
    extract_answer_candidates,
    generate_questions,
    predict_answer,
)
from .corpus import Passage
from .errors import (
    PlatformError,
    PreconditionError,
    PromptUnavailableError,
    ProtocolViolationError,
    TransportError,
)
from .text import f1_overlap

CandidateKey = tuple[str, tuple[int, str]]  # (passage_id, answer key)


class Strategy(str, enum.Enum):
    LIKELIHOOD = "likelihood"
    ADVERSARIAL = "adversarial"
    UNCERTAINTY = "uncertainty"


class ServeMode(str, enum.Enum):
    QUESTION_ONLY = "question_only"
    ANSWER_AND_QUESTION = "answer_and_question"


def prompt_id(passage_id: str, answer: AnswerSpan, question: str) -> str:
    raw = "\x1f".join([passage_id, str(answer.char_start), answer.text, question])
    return hashlib.sha256(raw.encode("utf-8")).hexdigest()[:16]


@dataclass(frozen=True)
class ScoredPrompt:
    id: str
    passage_id: str
    question: str
    answer: AnswerSpan
    log_likelihood: float
    adversary_f1: float | None
    qa_confidence: float | None
    origin: str = "cached"

    @property
    def scored(self) -> bool:
        """False when QA scoring failed; such prompts sort only by likelihood."""
        return self.adversary_f1 is not None and self.qa_confidence is not None

    def key(self) -> CandidateKey:
        return (self.passage_id, self.answer.key())

    def cache_record(self) -> dict:
        return {
            "passage_id": self.passage_id,
            "answer": {"text": self.answer.text, "char_start": self.answer.char_start},
            "question": self.question,
            "log_likelihood": self.log_likelihood,
            "adversary_f1": self.adversary_f1,
            "qa_confidence": self.qa_confidence,
        }

    def to_payload(self) -> dict:
        payload = self.cache_record()
        payload["id"] = self.id
        payload["origin"] = self.origin
        return payload


def prompt_from_record(obj: dict, origin: str = "cached") -> ScoredPrompt:
    answer = AnswerSpan(obj["answer"]["text"], obj["answer"]["char_start"])
    return ScoredPrompt(
        id=obj.get("id") or prompt_id(obj["passage_id"], answer, obj["question"]),
        passage_id=obj["passage_id"],
        question=obj["question"],
        answer=answer,
        log_likelihood=obj["log_likelihood"],
        adversary_f1=obj.get("adversary_f1"),
        qa_confidence=obj.get("qa_confidence"),
        origin=obj.get("origin", origin),
    )


def _tiebreak(p: ScoredPrompt) -> tuple:
    return (p.question, p.answer.char_start, p.answer.text, p.id)


def order_candidates(prompts: Iterable[ScoredPrompt], strategy: Strategy) -> list[ScoredPrompt]:
    """Strategy-sorted copy of `prompts`; a total order for any fixed input set.

    Prompts whose QA scoring failed are eligible under LIKELIHOOD only.
    """
    strategy = Strategy(strategy)
    if strategy is Strategy.LIKELIHOOD:
        pool = list(prompts)
        return sorted(pool, key=lambda p: (-p.log_likelihood, *_tiebreak(p)))
    pool = [p for p in prompts if p.scored]
    if strategy is Strategy.ADVERSARIAL:
        return sorted(pool, key=lambda p: (p.adversary_f1, *_tiebreak(p)))
    return sorted(pool, key=lambda p: (p.qa_confidence, *_tiebreak(p)))


class PromptCache:
    """Per-(passage, answer) queues with a global served-once guarantee."""

    def __init__(self):
        self._queues: dict[CandidateKey, list[ScoredPrompt]] = {}
        self._served: set[str] = set()
        self._lock = threading.RLock()

    @property
    def lock(self) -> threading.RLock:
        return self._lock

    def add(self, prompt: ScoredPrompt) -> bool:
        """Queue a prompt unless its id was already queued or served."""
        with self._lock:
            if prompt.id in self._served:
                return False
            queue = self._queues.setdefault(prompt.key(), [])
            if any(p.id == prompt.id for p in queue):
                return False
            queue.append(prompt)
            return True

    def pending(self, passage_id: str, answer: AnswerSpan | None = None) -> list[ScoredPrompt]:
        with self._lock:
            if answer is not None:
                return list(self._queues.get((passage_id, answer.key()), ()))
            out: list[ScoredPrompt] = []
            for (pid, _), queue in self._queues.items():
                if pid == passage_id:
                    out.extend(queue)
            return out

    def take(self, prompt_id_: str) -> ScoredPrompt | None:
        """Remove a queued prompt and mark it served."""
        with self._lock:
            if prompt_id_ in self._served:
                return None
            for key, queue in self._queues.items():
                for i, prompt in enumerate(queue):
                    if prompt.id == prompt_id_:
                        del queue[i]
                        self._served.add(prompt_id_)
                        return prompt
            return None

    def mark_served(self, prompt_id_: str) -> None:
        with self._lock:
            self._served.add(prompt_id_)
            for queue in self._queues.values():
                for i, prompt in enumerate(queue):
                    if prompt.id == prompt_id_:
                        del queue[i]
                        break

    def served_ids(self) -> set[str]:
        with self._lock:
            return set(self._served)

    def size(self) -> int:
        with self._lock:
            return sum(len(q) for q in self._queues.values())

    def snapshot(self) -> dict:
        with self._lock:
            return {
                "served": sorted(self._served),
                "queued": sorted(p.id for q in self._queues.values() for p in q),
            }

    def dump(self, fp: IO[str]) -> None:
        with self._lock:
            for queue in self._queues.values():
                for prompt in queue:
                    fp.write(json.dumps(prompt.cache_record(), ensure_ascii=False) + "\n")

    @classmethod
    def load(cls, fp: IO[str]) -> "PromptCache":
        cache = cls()
        for line in fp:
            line = line.strip()
            if line:
                cache.add(prompt_from_record(json.loads(line)))
        return cache


@dataclass
class PrewarmReport:
    cached: int = 0
    scoring_failures: int = 0
    failures: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "cached": self.cached,
            "scoring_failures": self.scoring_failures,
            "failures": self.failures,
        }


@dataclass(frozen=True)
class ServedPrompt:
    """A serve outcome: the prompt plus any prompts the live path added."""

    prompt: ScoredPrompt
    live_added: tuple[ScoredPrompt, ...] = ()


class PromptEngine:
    """Binds one generator (plus QA and candidate backends) to a cache."""

    def __init__(
        self,
        generator: GeneratorBackend,
        qa: QABackend,
        extractor: CandidateBackend,
        cache: PromptCache | None = None,
        depth: int = 10,
        top_p: float = 0.75,
        candidate_cap: int = 20,
    ):
        if depth < 1:
            raise PreconditionError(f"depth must be >= 1, got {depth}")
        self.generator = generator
        self.qa = qa
        self.extractor = extractor
        self.cache = cache if cache is not None else PromptCache()
        self.depth = depth
        self.top_p = top_p
        self.candidate_cap = candidate_cap

    def _score(self, passage: Passage, answer: AnswerSpan, question: str, ll: float, report: PrewarmReport | None = None) -> ScoredPrompt:
        adversary_f1 = qa_confidence = None
        try:
            pred = predict_answer(self.qa, passage, question)
            adversary_f1 = f1_overlap(pred.span.text, answer.text).value
            qa_confidence = pred.confidence
        except (TransportError, ProtocolViolationError) as exc:
            if report is not None:
                report.scoring_failures += 1
                report.failures.append(
                    {"stage": "score", "passage_id": passage.id, "question": question, "error": str(exc)}
                )
        return ScoredPrompt(
            id=prompt_id(passage.id, answer, question),
            passage_id=passage.id,
            question=question,
            answer=answer,
            log_likelihood=ll,
            adversary_f1=adversary_f1,
            qa_confidence=qa_confidence,
        )

    def prewarm(self, passage: Passage, depth: int | None = None) -> PrewarmReport:
        """Generate and score up to depth questions per answer candidate.

        Backend failures skip the affected key; a partial prewarm is valid.
        Re-running over the same passage and backends adds nothing new.
        """
        depth = depth or self.depth
        report = PrewarmReport()
        try:
            candidates = extract_answer_candidates(self.extractor, passage, self.candidate_cap)
        except (TransportError, ProtocolViolationError) as exc:
            report.failures.append({"stage": "candidates", "passage_id": passage.id, "error": str(exc)})
            return report
        for cand in candidates:
            try:
                questions = generate_questions(self.generator, passage, cand.span, depth, self.top_p)
            except (TransportError, ProtocolViolationError) as exc:
                report.failures.append(
                    {
                        "stage": "generate",
                        "passage_id": passage.id,
                        "answer": cand.span.text,
                        "error": str(exc),
                    }
                )
                continue
            for gq in questions:
                prompt = self._score(passage, cand.span, gq.question, gq.log_likelihood, report)
                if self.cache.add(prompt):
                    report.cached += 1
        return report

    def _generate_live(self, passage: Passage, answer: AnswerSpan) -> list[ScoredPrompt]:
        questions = generate_questions(self.generator, passage, answer, self.depth, self.top_p)
        added = []
        for gq in questions:
            prompt = self._score(passage, answer, gq.question, gq.log_likelihood)
            if self.cache.add(prompt):
                added.append(prompt)
        return added

    def next_prompt(
        self,
        passage: Passage,
        answer: AnswerSpan | None,
        strategy: Strategy,
        mode: ServeMode = ServeMode.QUESTION_ONLY,
    ) -> ServedPrompt:
        """Pop the strategy-best unserved prompt, generating live on a miss.

        QUESTION_ONLY pops within the (passage, answer) key; the answer is
        required.  ANSWER_AND_QUESTION picks the best prompt across every key
        of the passage, choosing the answer in the process.
        """
        strategy = Strategy(strategy)
        mode = ServeMode(mode)
        if mode is ServeMode.QUESTION_ONLY and answer is None:
            raise PreconditionError("question-only serving requires an answer span")
        with self.cache.lock:
            if mode is ServeMode.QUESTION_ONLY:
                pool = self.cache.pending(passage.id, answer)
            else:
                pool = self.cache.pending(passage.id)
            ordered = order_candidates(pool, strategy)
            if ordered:
                prompt = self.cache.take(ordered[0].id)
                if prompt is not None:
                    return ServedPrompt(prompt=replace(prompt, origin="cached"))
            return self._fallback(passage, answer, strategy, mode)

    def _fallback(
        self, passage: Passage, answer: AnswerSpan | None, strategy: Strategy, mode: ServeMode
    ) -> ServedPrompt:
        if mode is ServeMode.QUESTION_ONLY:
            answer_options = [answer]
        else:
            try:
                cands = extract_answer_candidates(self.extractor, passage, self.candidate_cap)
            except (TransportError, ProtocolViolationError) as exc:
                raise PromptUnavailableError(f"candidate extraction failed: {exc}") from exc
            answer_options = [c.span for c in cands]
        last_error: PlatformError | None = None
        for option in answer_options:
            try:
                added = self._generate_live(passage, option)
            except (TransportError, ProtocolViolationError, PreconditionError) as exc:
                last_error = exc if isinstance(exc, PlatformError) else None
                continue
            ordered = order_candidates(added, strategy)
            if not ordered:
                continue
            prompt = self.cache.take(ordered[0].id)
            if prompt is None:
                continue
            live_added = tuple(p for p in added if p.id != prompt.id)
            return ServedPrompt(prompt=replace(prompt, origin="live"), live_added=live_added)
        detail = f": {last_error}" if last_error else ""
        raise PromptUnavailableError(
            f"no prompt available for passage {passage.id} under {strategy.value}{detail}"
        )
