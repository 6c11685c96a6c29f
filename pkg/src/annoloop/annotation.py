"""Annotator session lifecycle: settings, the five-example loop, fooling
determination, timing capture and bonus accrual.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional

from .backends import AnswerSpan, QAPrediction
from .corpus import Passage
from .errors import InvalidSettingError, PreconditionError, SessionError
from .prompts import ScoredPrompt, Strategy
from .text import max_f1_over_golds

FOOLING_THRESHOLD = 0.4
BONUS_AMOUNT = 0.50
EXAMPLES_PER_SESSION = 5


class CollectionMode(str, enum.Enum):
    STANDARD = "standard"
    ADVERSARIAL = "adversarial"


class GeneratorSource(str, enum.Enum):
    NONE = "none"
    SQUAD = "squad"
    ADVERSARIALQA = "adversarialqa"
    COMBINED = "combined"


class Provenance(str, enum.Enum):
    UNASSISTED = "unassisted"
    ACCEPTED = "accepted"
    EDITED = "edited"


class Validity(str, enum.Enum):
    PENDING = "pending"
    VALID = "valid"
    INVALID = "invalid"


@dataclass(frozen=True)
class ExperimentSetting:
    """One cell of the collection-mode x generator x sampler x answer-prompt grid."""

    collection_mode: CollectionMode
    generator: GeneratorSource
    sampler: Optional[Strategy]
    answer_prompting: bool

    def __post_init__(self):
        mode = CollectionMode(self.collection_mode)
        gen = GeneratorSource(self.generator)
        object.__setattr__(self, "collection_mode", mode)
        object.__setattr__(self, "generator", gen)
        if self.sampler is not None:
            object.__setattr__(self, "sampler", Strategy(self.sampler))
        if (self.sampler is not None) != (gen is not GeneratorSource.NONE):
            raise InvalidSettingError(
                f"sampler must be present exactly when a generator is configured: {self}"
            )
        if self.answer_prompting:
            if mode is not CollectionMode.ADVERSARIAL or gen not in (
                GeneratorSource.ADVERSARIALQA,
                GeneratorSource.COMBINED,
            ):
                raise InvalidSettingError(
                    f"answer prompting requires adversarial mode and an adversarially-trained generator: {self}"
                )
        if mode is CollectionMode.STANDARD and gen in (
            GeneratorSource.ADVERSARIALQA,
            GeneratorSource.COMBINED,
        ):
            raise InvalidSettingError(
                f"standard collection only pairs with the squad-trained generator: {self}"
            )

    @property
    def assisted(self) -> bool:
        return self.generator is not GeneratorSource.NONE

    @property
    def adversarial(self) -> bool:
        return self.collection_mode is CollectionMode.ADVERSARIAL

    @property
    def key(self) -> str:
        sampler = self.sampler.value if self.sampler else "none"
        ap = "ap" if self.answer_prompting else "np"
        return f"{self.collection_mode.value}:{self.generator.value}:{sampler}:{ap}"

    @classmethod
    def from_key(cls, key: str) -> "ExperimentSetting":
        try:
            mode, gen, sampler, ap = key.split(":")
        except ValueError:
            raise InvalidSettingError(f"malformed setting key: {key!r}") from None
        if ap not in ("ap", "np"):
            raise InvalidSettingError(f"malformed setting key: {key!r}")
        return cls(
            collection_mode=CollectionMode(mode),
            generator=GeneratorSource(gen),
            sampler=None if sampler == "none" else Strategy(sampler),
            answer_prompting=ap == "ap",
        )


def setting_matrix() -> list[ExperimentSetting]:
    """All 20 valid settings: 2 baselines, 3 standard-assisted, 9 adversarial
    question-only, 6 adversarial answer-prompting."""
    samplers = [Strategy.LIKELIHOOD, Strategy.ADVERSARIAL, Strategy.UNCERTAINTY]
    out = [
        ExperimentSetting(CollectionMode.STANDARD, GeneratorSource.NONE, None, False),
        ExperimentSetting(CollectionMode.ADVERSARIAL, GeneratorSource.NONE, None, False),
    ]
    for sampler in samplers:
        out.append(ExperimentSetting(CollectionMode.STANDARD, GeneratorSource.SQUAD, sampler, False))
    for gen in (GeneratorSource.SQUAD, GeneratorSource.ADVERSARIALQA, GeneratorSource.COMBINED):
        for sampler in samplers:
            out.append(ExperimentSetting(CollectionMode.ADVERSARIAL, gen, sampler, False))
    for gen in (GeneratorSource.ADVERSARIALQA, GeneratorSource.COMBINED):
        for sampler in samplers:
            out.append(ExperimentSetting(CollectionMode.ADVERSARIAL, gen, sampler, True))
    return out


def compute_fooled(
    prediction: QAPrediction, gold: AnswerSpan, threshold: float = FOOLING_THRESHOLD
) -> bool:
    """The model is fooled when its best overlap with the gold answer stays
    strictly below the threshold."""
    best = max_f1_over_golds(prediction.span.text, [gold.text])
    return best.value < threshold


def classify_provenance(
    question: str,
    answer: AnswerSpan,
    last_prompt: Optional[ScoredPrompt],
    answer_prompting: bool,
) -> tuple[Provenance, Optional[str]]:
    """Exact match against the last served prompt counts as accepted; any
    difference counts as edited.  Answer-prompted serves also compare the span."""
    if last_prompt is None:
        return Provenance.UNASSISTED, None
    same = question == last_prompt.question
    if answer_prompting:
        same = same and answer == last_prompt.answer
    return (Provenance.ACCEPTED if same else Provenance.EDITED), last_prompt.id


@dataclass
class ExampleRecord:
    id: str
    question: str
    answer: AnswerSpan
    duration_ms: int
    generator_queries: int
    prompt_provenance: Provenance
    source_prompt_id: Optional[str]
    model_prediction: Optional[QAPrediction]
    fooled: Optional[bool]
    validity: Validity = Validity.PENDING

    def to_payload(self) -> dict:
        pred = None
        if self.model_prediction is not None:
            pred = {
                "answer": {
                    "text": self.model_prediction.span.text,
                    "char_start": self.model_prediction.span.char_start,
                },
                "confidence": self.model_prediction.confidence,
            }
        return {
            "example_id": self.id,
            "question": self.question,
            "answer": {"text": self.answer.text, "char_start": self.answer.char_start},
            "duration_ms": self.duration_ms,
            "generator_queries": self.generator_queries,
            "prompt_provenance": self.prompt_provenance.value,
            "source_prompt_id": self.source_prompt_id,
            "model_prediction": pred,
            "fooled": self.fooled,
            "validity": self.validity.value,
        }

    @classmethod
    def from_payload(cls, obj: dict) -> "ExampleRecord":
        pred = None
        if obj.get("model_prediction") is not None:
            p = obj["model_prediction"]
            pred = QAPrediction(
                span=AnswerSpan(p["answer"]["text"], p["answer"]["char_start"]),
                confidence=p["confidence"],
            )
        return cls(
            id=obj["example_id"],
            question=obj["question"],
            answer=AnswerSpan(obj["answer"]["text"], obj["answer"]["char_start"]),
            duration_ms=obj["duration_ms"],
            generator_queries=obj["generator_queries"],
            prompt_provenance=Provenance(obj["prompt_provenance"]),
            source_prompt_id=obj.get("source_prompt_id"),
            model_prediction=pred,
            fooled=obj.get("fooled"),
            validity=Validity(obj.get("validity", "pending")),
        )


@dataclass
class AnnotationSession:
    id: str
    worker: str
    setting: ExperimentSetting
    passage: Passage
    started_at: int
    examples: list[ExampleRecord] = field(default_factory=list)
    pending_queries: int = 0
    last_prompt: Optional[ScoredPrompt] = None
    last_activity_ms: int = 0

    def __post_init__(self):
        if self.last_activity_ms == 0:
            self.last_activity_ms = self.started_at

    @property
    def complete(self) -> bool:
        return len(self.examples) >= EXAMPLES_PER_SESSION

    def record_query(self, prompt: ScoredPrompt) -> None:
        """Count a generator serve against the example currently being written."""
        self.pending_queries += 1
        self.last_prompt = prompt

    def build_example(
        self,
        question: str,
        answer: AnswerSpan,
        prediction: Optional[QAPrediction],
        now_ms: int,
        threshold: float = FOOLING_THRESHOLD,
    ) -> ExampleRecord:
        """Validate and assemble a record without touching session state, so
        rejections consume neither the slot nor the pending query count."""
        if self.complete:
            raise SessionError(
                f"session {self.id} already holds {EXAMPLES_PER_SESSION} examples"
            )
        if not question.strip():
            raise PreconditionError("question must be non-empty")
        if not answer.valid_in(self.passage.text):
            raise PreconditionError("answer span does not match passage text")
        adversarial = self.setting.adversarial
        if adversarial and prediction is None:
            raise PreconditionError("adversarial submissions require a model prediction")
        if not adversarial and prediction is not None:
            raise PreconditionError("standard submissions must not carry a prediction")
        # same-millisecond submissions still get a positive duration
        duration = max(1, now_ms - self.last_activity_ms)
        provenance, source_id = classify_provenance(
            question, answer, self.last_prompt, self.setting.answer_prompting
        )
        fooled = compute_fooled(prediction, answer, threshold) if adversarial else None
        return ExampleRecord(
            id=f"{self.id}-e{len(self.examples)}",
            question=question,
            answer=answer,
            duration_ms=duration,
            generator_queries=self.pending_queries,
            prompt_provenance=provenance,
            source_prompt_id=source_id,
            model_prediction=prediction,
            fooled=fooled,
        )

    def integrate(self, record: ExampleRecord, now_ms: int) -> None:
        """Commit a built record: append it and arm the next example's timer."""
        self.examples.append(record)
        self.pending_queries = 0
        self.last_prompt = None
        self.last_activity_ms = max(now_ms, self.last_activity_ms + 1)

    def add_example(
        self,
        question: str,
        answer: AnswerSpan,
        prediction: Optional[QAPrediction],
        now_ms: int,
        threshold: float = FOOLING_THRESHOLD,
    ) -> ExampleRecord:
        record = self.build_example(question, answer, prediction, now_ms, threshold)
        self.integrate(record, now_ms)
        return record


@dataclass(frozen=True)
class BonusOutcome:
    accrued: bool
    amount: float
    reason: Optional[str] = None


class BonusLedger:
    """One 0.50 entry per model-fooling, validated example; at most once each."""

    def __init__(self, amount: float = BONUS_AMOUNT):
        self.amount = amount
        self._entries: dict[str, float] = {}

    def accrue(self, example: ExampleRecord) -> BonusOutcome:
        if example.fooled is not True:
            return BonusOutcome(False, 0.0, "example did not fool the model")
        if example.validity is not Validity.VALID:
            return BonusOutcome(False, 0.0, f"example validity is {example.validity.value}")
        if example.id in self._entries:
            return BonusOutcome(False, 0.0, "bonus already accrued")
        self._entries[example.id] = self.amount
        return BonusOutcome(True, self.amount)

    def has_entry(self, example_id: str) -> bool:
        return example_id in self._entries

    @property
    def total(self) -> float:
        return sum(self._entries.values())

    @property
    def entry_count(self) -> int:
        return len(self._entries)
