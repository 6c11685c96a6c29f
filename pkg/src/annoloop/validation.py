"""Three-vote validation of submitted examples and author quality tracking."""

from __future__ import annotations

import enum
import threading
from dataclasses import dataclass, field
from typing import Iterable, Optional

from .annotation import Validity
from .errors import StarvationError, ValidationError
from .rand import unit_float

VOTES_REQUIRED = 3
QUALITY_THRESHOLD = 0.95


class Verdict(str, enum.Enum):
    VALID = "valid"
    INVALID = "invalid"


class FlagMode(str, enum.Enum):
    """How the acceptability threshold is read.

    INCORRECTNESS_ABOVE flags authors whose invalid share exceeds the
    threshold (literal reading).  VALID_BELOW flags authors whose valid share
    falls under it (strict reading).
    """

    INCORRECTNESS_ABOVE = "incorrectness_above"
    VALID_BELOW = "valid_below"


@dataclass
class ValidationTask:
    example_id: str
    author: str
    session_id: str
    setting_key: str
    votes: list[tuple[str, Verdict]] = field(default_factory=list)
    assigned: list[str] = field(default_factory=list)
    resolution: Validity = Validity.PENDING

    @property
    def resolved(self) -> bool:
        return self.resolution is not Validity.PENDING

    @property
    def voters(self) -> set[str]:
        return {v for v, _ in self.votes}

    def eligible(self, validator: str) -> bool:
        return (
            not self.resolved
            and validator != self.author
            and validator not in self.assigned
            and len(self.assigned) < VOTES_REQUIRED
        )


def resolve_majority(verdicts: Iterable[Verdict]) -> Validity:
    """Majority of three; order never matters."""
    tally = [Verdict(v) for v in verdicts]
    if len(tally) != VOTES_REQUIRED:
        raise ValidationError(f"resolution requires {VOTES_REQUIRED} votes, got {len(tally)}")
    valid = sum(1 for v in tally if v is Verdict.VALID)
    return Validity.VALID if valid * 2 > VOTES_REQUIRED else Validity.INVALID


def assign_validation(task: ValidationTask, pool: Iterable[str], seed: int = 0) -> str:
    """Pick an eligible validator; never the author, never a repeat."""
    eligible = sorted(v for v in set(pool) if task.eligible(v))
    if not eligible:
        raise StarvationError(f"no eligible validator for example {task.example_id}")
    idx = int(unit_float(seed, "assign-validator", task.example_id, len(task.assigned)) * len(eligible))
    choice = eligible[min(idx, len(eligible) - 1)]
    task.assigned.append(choice)
    return choice


def cast_vote(task: ValidationTask, validator: str, verdict: Verdict) -> ValidationTask:
    """Record one vote; the third vote resolves the task by majority."""
    verdict = Verdict(verdict)
    if task.resolved:
        raise ValidationError(f"task {task.example_id} is already resolved")
    if validator not in task.assigned:
        raise ValidationError(f"validator {validator} was not assigned to {task.example_id}")
    if validator in task.voters:
        raise ValidationError(f"validator {validator} already voted on {task.example_id}")
    task.votes.append((validator, verdict))
    if len(task.votes) == VOTES_REQUIRED:
        task.resolution = resolve_majority(v for _, v in task.votes)
    return task


def incorrectness_rate(resolutions: Iterable[Validity]) -> Optional[float]:
    """Share of an author's resolved examples that came back invalid.

    None when nothing is resolved yet: an undefined rate, not a clean slate.
    """
    resolved = [Validity(r) for r in resolutions if Validity(r) is not Validity.PENDING]
    if not resolved:
        return None
    invalid = sum(1 for r in resolved if r is Validity.INVALID)
    return invalid / len(resolved)


def is_flagged(
    rate: Optional[float],
    threshold: float = QUALITY_THRESHOLD,
    mode: FlagMode = FlagMode.INCORRECTNESS_ABOVE,
) -> bool:
    if rate is None:
        return False
    if FlagMode(mode) is FlagMode.INCORRECTNESS_ABOVE:
        return rate > threshold
    return (1.0 - rate) < threshold


class ValidationQueue:
    """FIFO queue of tasks; hands each validator work they are eligible for."""

    def __init__(self, seed: int = 0):
        self.seed = seed
        self._tasks: dict[str, ValidationTask] = {}
        self._order: list[str] = []
        self._lock = threading.RLock()

    def enqueue(self, example_id: str, author: str, session_id: str, setting_key: str) -> ValidationTask:
        with self._lock:
            if example_id in self._tasks:
                raise ValidationError(f"example {example_id} already queued for validation")
            task = ValidationTask(
                example_id=example_id, author=author, session_id=session_id, setting_key=setting_key
            )
            self._tasks[example_id] = task
            self._order.append(example_id)
            return task

    def get(self, example_id: str) -> ValidationTask:
        with self._lock:
            task = self._tasks.get(example_id)
            if task is None:
                raise ValidationError(f"unknown validation task {example_id}")
            return task

    def peek_task_for(self, validator: str) -> Optional[ValidationTask]:
        """Oldest task the validator may vote on, without assigning them."""
        with self._lock:
            for example_id in self._order:
                task = self._tasks[example_id]
                if task.eligible(validator):
                    return task
            return None

    def next_task_for(self, validator: str) -> Optional[ValidationTask]:
        """Oldest task the validator may vote on; assigns them on return."""
        with self._lock:
            task = self.peek_task_for(validator)
            if task is not None:
                task.assigned.append(validator)
            return task

    def restore_assignment(self, example_id: str, validator: str) -> None:
        """Replay path: re-record an assignment chosen in a previous run."""
        with self._lock:
            task = self.get(example_id)
            if validator not in task.assigned:
                task.assigned.append(validator)

    def cast(self, example_id: str, validator: str, verdict: Verdict) -> ValidationTask:
        with self._lock:
            return cast_vote(self.get(example_id), validator, verdict)

    def tasks(self) -> list[ValidationTask]:
        with self._lock:
            return [self._tasks[eid] for eid in self._order]

    def author_rate(self, author: str) -> Optional[float]:
        with self._lock:
            return incorrectness_rate(
                t.resolution for t in self._tasks.values() if t.author == author and t.resolved
            )

    def flagged_authors(
        self,
        threshold: float = QUALITY_THRESHOLD,
        mode: FlagMode = FlagMode.INCORRECTNESS_ABOVE,
    ) -> set[str]:
        with self._lock:
            authors = {t.author for t in self._tasks.values()}
            return {
                a for a in authors if is_flagged(self.author_rate(a), threshold, mode)
            }
