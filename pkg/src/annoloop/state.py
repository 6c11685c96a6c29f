"""Platform facade: runs annotation and validation traffic, appends every
state change to the event log before acknowledging it, and rebuilds all
projections by replaying that log.

Command methods follow one shape: validate and gather impure inputs (clock,
backends, randomness), build the event, append it, then hand it to the same
pure apply step replay uses.  Apply never generates events of its own.
"""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Optional

from .annotation import (
    AnnotationSession,
    BonusLedger,
    ExampleRecord,
    ExperimentSetting,
    FOOLING_THRESHOLD,
    GeneratorSource,
    Validity,
)
from .backends import AnswerSpan, QABackend, predict_answer
from .corpus import PassageStore
from .errors import ConfigError, PreconditionError, SessionError, ValidationError
from .events import (
    BONUS_ACCRUED,
    EXAMPLE_SUBMITTED,
    EventLog,
    EventRecord,
    PROMPT_SERVED,
    SESSION_STARTED,
    VALIDATION_ASSIGNED,
    VALIDATION_RESOLVED,
    VALIDATION_VOTE,
    load_events,
)
from .metrics import MetricsReport, build_report, export_dataset
from .prompts import PromptEngine, ScoredPrompt, ServeMode, prompt_from_record
from .validation import FlagMode, QUALITY_THRESHOLD, ValidationQueue, Verdict

ROLE_WRITER = "writer"
ROLE_VALIDATOR = "validator"


def wall_clock_ms() -> int:
    return int(time.time() * 1000)


@dataclass
class Row:
    """Flat projection of one submitted example for metrics and export."""

    setting_key: str
    worker: str
    session_id: str
    passage_id: str
    record: ExampleRecord


class Platform:
    def __init__(
        self,
        store: PassageStore,
        engines: dict[GeneratorSource, PromptEngine],
        qa: QABackend,
        log: Optional[EventLog] = None,
        clock: Optional[Callable[[], int]] = None,
        seed: int = 0,
        fooling_threshold: float = FOOLING_THRESHOLD,
        flag_threshold: float = QUALITY_THRESHOLD,
        flag_mode: FlagMode = FlagMode.INCORRECTNESS_ABOVE,
        bonus_amount: Optional[float] = None,
    ):
        self.store = store
        self.engines = {GeneratorSource(k): v for k, v in engines.items()}
        self.qa = qa
        self.log = log if log is not None else EventLog()
        self.clock = clock if clock is not None else wall_clock_ms
        self.seed = seed
        self.fooling_threshold = fooling_threshold
        self.flag_threshold = flag_threshold
        self.flag_mode = FlagMode(flag_mode)

        self.sessions: dict[str, AnnotationSession] = {}
        self.queue = ValidationQueue(seed=seed)
        self.ledger = BonusLedger() if bonus_amount is None else BonusLedger(bonus_amount)
        self.roles: dict[str, str] = {}
        self.rows: list[Row] = []
        self._by_example: dict[str, Row] = {}
        self._idempotent: dict[tuple[str, str], dict] = {}
        self._worker_setting: dict[str, str] = {}
        self._session_counter = 0
        self._lock = threading.RLock()

    # ---------------------------------------------------------------- roles

    def _claim_role(self, worker: str, role: str) -> None:
        current = self.roles.get(worker)
        if current is not None and current != role:
            err = SessionError if role == ROLE_WRITER else ValidationError
            raise err(f"worker {worker} is registered as a {current}; pools are disjoint")

    # ------------------------------------------------------------- commands

    def assign_setting(self, worker: str) -> str:
        """Sticky per worker; new workers land on a setting with the fewest
        collected examples (ties broken by a worker-keyed draw)."""
        from .annotation import setting_matrix
        from .rand import unit_float

        with self._lock:
            prior = self._worker_setting.get(worker)
            if prior is not None:
                return prior
            counts = {setting.key: 0 for setting in setting_matrix()}
            for row in self.rows:
                if row.setting_key in counts:
                    counts[row.setting_key] += 1
            least = min(counts.values())
            tied = [key for key in counts if counts[key] == least]
            idx = int(unit_float(self.seed, "assign-setting", worker) * len(tied))
            return tied[min(idx, len(tied) - 1)]

    def start_session(self, worker: str, setting: ExperimentSetting | str) -> dict:
        if isinstance(setting, str):
            setting = ExperimentSetting.from_key(setting)
        with self._lock:
            self._claim_role(worker, ROLE_WRITER)
            for session in self.sessions.values():
                if session.worker == worker and not session.complete:
                    raise SessionError(f"worker {worker} already has an active session {session.id}")
            session_id = f"s{self._session_counter}"
            passage = self.store.assign(worker, salt=session_id)
            event = EventRecord(
                event_type=SESSION_STARTED,
                session_id=session_id,
                worker_id=worker,
                setting=setting.key,
                timestamp_ms=self.clock(),
                payload={"passage_id": passage.id},
            )
            self.log.append(event)
            self._apply(event)
            return self._session_response(self.sessions[session_id])

    def request_prompt(self, session_id: str, answer: Optional[AnswerSpan] = None) -> dict:
        with self._lock:
            session = self._session(session_id)
            setting = session.setting
            if session.complete:
                raise SessionError(f"session {session_id} is already complete")
            if not setting.assisted:
                raise SessionError("prompt requests need a generator-enabled setting")
            engine = self.engines.get(setting.generator)
            if engine is None:
                raise ConfigError(f"no engine configured for generator {setting.generator.value}")
            if setting.answer_prompting:
                if answer is not None:
                    raise PreconditionError("answer-prompting settings choose the answer span")
                mode = ServeMode.ANSWER_AND_QUESTION
            else:
                if answer is None:
                    raise PreconditionError("this setting requires an answer span before prompting")
                mode = ServeMode.QUESTION_ONLY
            served = engine.next_prompt(session.passage, answer, setting.sampler, mode)
            event = EventRecord(
                event_type=PROMPT_SERVED,
                session_id=session_id,
                worker_id=session.worker,
                setting=setting.key,
                timestamp_ms=self.clock(),
                payload={
                    "prompt": served.prompt.to_payload(),
                    "live_added": [p.to_payload() for p in served.live_added],
                    "mode": mode.value,
                },
            )
            self.log.append(event)
            self._apply(event)
            return self._prompt_response(session_id, served.prompt)

    def submit_example(
        self,
        session_id: str,
        question: str,
        answer: AnswerSpan,
        idempotency_key: Optional[str] = None,
    ) -> dict:
        with self._lock:
            if idempotency_key is not None:
                cached = self._idempotent.get(("submit", idempotency_key))
                if cached is not None:
                    return cached
            session = self._session(session_id)
            prediction = None
            if session.setting.adversarial:
                if session.complete:
                    raise SessionError(f"session {session_id} is already complete")
                prediction = predict_answer(self.qa, session.passage, question)
            now = self.clock()
            record = session.build_example(
                question, answer, prediction, now, self.fooling_threshold
            )
            event = EventRecord(
                event_type=EXAMPLE_SUBMITTED,
                session_id=session_id,
                worker_id=session.worker,
                setting=session.setting.key,
                timestamp_ms=now,
                payload={"record": record.to_payload(), "idempotency_key": idempotency_key},
            )
            self.log.append(event)
            self._apply(event)
            return self._idempotent.get(("submit", idempotency_key)) if idempotency_key else self._submit_response(record)

    def next_validation(self, validator: str) -> Optional[dict]:
        with self._lock:
            self._claim_role(validator, ROLE_VALIDATOR)
            task = self.queue.peek_task_for(validator)
            if task is None:
                # no event, no state change: an empty poll must not alter replayable state
                return None
            event = EventRecord(
                event_type=VALIDATION_ASSIGNED,
                session_id=task.session_id,
                worker_id=validator,
                setting=task.setting_key,
                timestamp_ms=self.clock(),
                payload={"task_id": task.example_id},
            )
            self.log.append(event)
            self._apply(event)
            return self._task_response(task)

    def cast_vote(
        self,
        task_id: str,
        validator: str,
        verdict: Verdict | str,
        idempotency_key: Optional[str] = None,
    ) -> dict:
        verdict = Verdict(verdict)
        with self._lock:
            if idempotency_key is not None:
                cached = self._idempotent.get(("vote", idempotency_key))
                if cached is not None:
                    return cached
            self._claim_role(validator, ROLE_VALIDATOR)
            task = self.queue.get(task_id)
            if task.resolved:
                raise ValidationError(f"task {task_id} is already resolved")
            if validator not in task.assigned:
                raise ValidationError(f"validator {validator} was not assigned to {task_id}")
            if validator in task.voters:
                raise ValidationError(f"validator {validator} already voted on {task_id}")
            event = EventRecord(
                event_type=VALIDATION_VOTE,
                session_id=task.session_id,
                worker_id=validator,
                setting=task.setting_key,
                timestamp_ms=self.clock(),
                payload={
                    "task_id": task_id,
                    "verdict": verdict.value,
                    "idempotency_key": idempotency_key,
                },
            )
            self.log.append(event)
            self._apply(event)
            if task.resolved:
                self._emit_resolution(task)
            if idempotency_key is not None:
                return self._idempotent[("vote", idempotency_key)]
            return self._vote_response(task)

    def _emit_resolution(self, task) -> None:
        row = self._by_example[task.example_id]
        resolved = EventRecord(
            event_type=VALIDATION_RESOLVED,
            session_id=task.session_id,
            worker_id=row.worker,
            setting=task.setting_key,
            timestamp_ms=self.clock(),
            payload={
                "task_id": task.example_id,
                "resolution": task.resolution.value,
                "votes": [[v, verdict.value] for v, verdict in task.votes],
            },
        )
        self.log.append(resolved)
        self._apply(resolved)
        record = row.record
        if record.fooled is True and record.validity is Validity.VALID:
            bonus = EventRecord(
                event_type=BONUS_ACCRUED,
                session_id=task.session_id,
                worker_id=row.worker,
                setting=task.setting_key,
                timestamp_ms=self.clock(),
                payload={"example_id": record.id, "amount": self.ledger.amount},
            )
            self.log.append(bonus)
            self._apply(bonus)

    # ---------------------------------------------------------------- apply

    def _apply(self, event: EventRecord) -> None:
        handler = {
            SESSION_STARTED: self._apply_session_started,
            PROMPT_SERVED: self._apply_prompt_served,
            EXAMPLE_SUBMITTED: self._apply_example_submitted,
            VALIDATION_ASSIGNED: self._apply_validation_assigned,
            VALIDATION_VOTE: self._apply_validation_vote,
            VALIDATION_RESOLVED: self._apply_validation_resolved,
            BONUS_ACCRUED: self._apply_bonus_accrued,
        }[event.event_type]
        handler(event)

    def _apply_session_started(self, event: EventRecord) -> None:
        passage_id = event.payload["passage_id"]
        self.roles[event.worker_id] = ROLE_WRITER
        self.store.mark_assigned(event.worker_id, passage_id)
        session = AnnotationSession(
            id=event.session_id,
            worker=event.worker_id,
            setting=ExperimentSetting.from_key(event.setting),
            passage=self.store.get(passage_id),
            started_at=event.timestamp_ms,
        )
        self.sessions[event.session_id] = session
        self._worker_setting.setdefault(event.worker_id, event.setting)
        seq = event.session_id[1:]
        if event.session_id.startswith("s") and seq.isdigit():
            self._session_counter = max(self._session_counter, int(seq) + 1)

    def _apply_prompt_served(self, event: EventRecord) -> None:
        session = self.sessions[event.session_id]
        engine = self.engines[session.setting.generator]
        prompt = prompt_from_record(event.payload["prompt"])
        for extra in event.payload.get("live_added", []):
            engine.cache.add(prompt_from_record(extra))
        engine.cache.mark_served(prompt.id)
        session.record_query(prompt)

    def _apply_example_submitted(self, event: EventRecord) -> None:
        session = self.sessions[event.session_id]
        record = ExampleRecord.from_payload(event.payload["record"])
        session.integrate(record, event.timestamp_ms)
        row = Row(
            setting_key=event.setting,
            worker=event.worker_id,
            session_id=event.session_id,
            passage_id=session.passage.id,
            record=record,
        )
        self.rows.append(row)
        self._by_example[record.id] = row
        self.queue.enqueue(record.id, event.worker_id, event.session_id, event.setting)
        key = event.payload.get("idempotency_key")
        if key is not None:
            self._idempotent[("submit", key)] = self._submit_response(record)

    def _apply_validation_assigned(self, event: EventRecord) -> None:
        self.roles[event.worker_id] = ROLE_VALIDATOR
        self.queue.restore_assignment(event.payload["task_id"], event.worker_id)

    def _apply_validation_vote(self, event: EventRecord) -> None:
        self.roles[event.worker_id] = ROLE_VALIDATOR
        task = self.queue.cast(
            event.payload["task_id"], event.worker_id, Verdict(event.payload["verdict"])
        )
        key = event.payload.get("idempotency_key")
        if key is not None:
            self._idempotent[("vote", key)] = self._vote_response(task)

    def _apply_validation_resolved(self, event: EventRecord) -> None:
        row = self._by_example[event.payload["task_id"]]
        row.record.validity = Validity(event.payload["resolution"])

    def _apply_bonus_accrued(self, event: EventRecord) -> None:
        row = self._by_example[event.payload["example_id"]]
        self.ledger.accrue(row.record)

    # ------------------------------------------------------------ responses

    def _session(self, session_id: str) -> AnnotationSession:
        session = self.sessions.get(session_id)
        if session is None:
            raise SessionError(f"unknown session {session_id}")
        return session

    def _session_response(self, session: AnnotationSession) -> dict:
        return {
            "session_id": session.id,
            "worker": session.worker,
            "setting": session.setting.key,
            "passage": {
                "id": session.passage.id,
                "title": session.passage.page_title,
                "text": session.passage.text,
            },
            "started_at_ms": session.started_at,
            "examples_remaining": 5 - len(session.examples),
        }

    def _prompt_response(self, session_id: str, prompt: ScoredPrompt) -> dict:
        return {
            "session_id": session_id,
            "prompt_id": prompt.id,
            "question": prompt.question,
            "answer": {"text": prompt.answer.text, "char_start": prompt.answer.char_start},
            "origin": prompt.origin,
        }

    def _submit_response(self, record: ExampleRecord) -> dict:
        pred = None
        if record.model_prediction is not None:
            pred = {
                "answer": {
                    "text": record.model_prediction.span.text,
                    "char_start": record.model_prediction.span.char_start,
                },
                "confidence": record.model_prediction.confidence,
            }
        return {
            "example_id": record.id,
            "fooled": record.fooled,
            "model_prediction": pred,
            "duration_ms": record.duration_ms,
            "prompt_provenance": record.prompt_provenance.value,
        }

    def _task_response(self, task) -> dict:
        row = self._by_example[task.example_id]
        passage = self.store.get(row.passage_id)
        record = row.record
        return {
            "task_id": task.example_id,
            "question": record.question,
            "answer": {"text": record.answer.text, "char_start": record.answer.char_start},
            "passage": {"id": passage.id, "title": passage.page_title, "text": passage.text},
        }

    def _vote_response(self, task) -> dict:
        return {
            "task_id": task.example_id,
            "votes_cast": len(task.votes),
            "resolution": task.resolution.value,
        }

    # -------------------------------------------------------------- queries

    def flagged_workers(self) -> set[str]:
        with self._lock:
            return self.queue.flagged_authors(self.flag_threshold, self.flag_mode)

    def metrics_reports(self, setting_key: Optional[str] = None) -> list[MetricsReport]:
        from .annotation import setting_matrix

        with self._lock:
            flagged = self.flagged_workers()
            if setting_key is not None:
                targets = [ExperimentSetting.from_key(setting_key)]
            else:
                targets = setting_matrix()
            reports = []
            for setting in targets:
                records = [
                    row.record
                    for row in self.rows
                    if row.setting_key == setting.key
                    and row.worker not in flagged
                    and row.record.validity is not Validity.PENDING
                ]
                reports.append(build_report(setting, records))
            return reports

    def export(self, setting_key: str) -> tuple[dict, dict]:
        setting = ExperimentSetting.from_key(setting_key)
        with self._lock:
            flagged = self.flagged_workers()
            pairs = [
                (self.store.get(row.passage_id), row.record)
                for row in self.rows
                if row.setting_key == setting.key and row.worker not in flagged
            ]
            return export_dataset(pairs, setting)

    def prewarm(self, passages: Optional[Iterable] = None, depth: Optional[int] = None) -> dict:
        targets = list(passages) if passages is not None else self.store.passages()
        summary: dict[str, dict] = {}
        for source, engine in sorted(self.engines.items(), key=lambda kv: kv[0].value):
            cached = 0
            failures: list[dict] = []
            for passage in targets:
                report = engine.prewarm(passage, depth)
                cached += report.cached
                failures.extend(report.failures)
            summary[source.value] = {"cached": cached, "failures": failures}
        return summary

    # ---------------------------------------------------------------- state

    def snapshot(self) -> dict:
        """Deep, JSON-shaped view of every projection, for replay comparison."""
        with self._lock:
            sessions = {}
            for sid, s in sorted(self.sessions.items()):
                sessions[sid] = {
                    "worker": s.worker,
                    "setting": s.setting.key,
                    "passage_id": s.passage.id,
                    "started_at": s.started_at,
                    "last_activity_ms": s.last_activity_ms,
                    "pending_queries": s.pending_queries,
                    "last_prompt_id": s.last_prompt.id if s.last_prompt else None,
                    "examples": [e.to_payload() for e in s.examples],
                    "complete": s.complete,
                }
            tasks = [
                {
                    "example_id": t.example_id,
                    "author": t.author,
                    "session_id": t.session_id,
                    "setting": t.setting_key,
                    "assigned": list(t.assigned),
                    "votes": [[v, verdict.value] for v, verdict in t.votes],
                    "resolution": t.resolution.value,
                }
                for t in self.queue.tasks()
            ]
            caches = {}
            for source, engine in self.engines.items():
                caches[source.value] = engine.cache.snapshot()
            return {
                "session_counter": self._session_counter,
                "worker_settings": dict(sorted(self._worker_setting.items())),
                "roles": dict(sorted(self.roles.items())),
                "sessions": sessions,
                "tasks": tasks,
                "rows": [row.record.id for row in self.rows],
                "bonus": {
                    "total": self.ledger.total,
                    "entries": sorted(
                        row.record.id
                        for row in self.rows
                        if self.ledger.has_entry(row.record.id)
                    ),
                },
                "caches": caches,
                "flagged": sorted(self.flagged_workers()),
                "idempotency_keys": sorted(f"{kind}:{key}" for kind, key in self._idempotent),
                "metrics": {rep.setting.key: rep.to_dict() for rep in self.metrics_reports()},
            }

    @classmethod
    def replay(cls, events: Iterable[EventRecord], **kwargs) -> "Platform":
        platform = cls(**kwargs)
        for event in events:
            platform._apply(event)
        return platform

    @classmethod
    def from_log(cls, path: Path | str, **kwargs) -> "Platform":
        """Rebuild from an existing log file and keep appending to it."""
        events = load_events(path)
        platform = cls.replay(events, log=EventLog(path), **kwargs)
        return platform
