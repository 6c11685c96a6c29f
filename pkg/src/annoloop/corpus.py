"""Passage ingestion, filtering and per-worker assignment.

Passages arrive as newline-delimited JSON records and survive three filter
stages: token-count bounds, task-usage minimum, and n-gram decontamination
against exclusion corpora.  The filtered store hands passages to annotation
sessions without repeating a passage for the same worker.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field
from typing import IO, Iterable, Iterator

from .errors import DuplicateIdError, MalformedRecordError, PreconditionError, StoreExhaustedError
from .rand import derived_rng
from .text import ngrams, normalize


@dataclass(frozen=True)
class Passage:
    id: str
    page_title: str
    text: str
    tasks: tuple[str, ...]
    provenance: dict
    token_count: int

    @property
    def task_usage_count(self) -> int:
        return len(self.tasks)

    def to_record(self) -> dict:
        return {
            "id": self.id,
            "title": self.page_title,
            "text": self.text,
            "tasks": list(self.tasks),
            "provenance": self.provenance,
        }


def passage_from_record(obj: dict) -> Passage:
    if not isinstance(obj, dict):
        raise ValueError("record is not a JSON object")
    try:
        pid = obj["id"]
        text = obj["text"]
    except KeyError as exc:
        raise ValueError(f"missing field {exc.args[0]!r}") from None
    if not isinstance(pid, str) or not pid:
        raise ValueError("field 'id' must be a non-empty string")
    if not isinstance(text, str):
        raise ValueError("field 'text' must be a string")
    tasks = obj.get("tasks", [])
    if not isinstance(tasks, list) or not all(isinstance(t, str) for t in tasks):
        raise ValueError("field 'tasks' must be a list of strings")
    provenance = obj.get("provenance", {})
    if not isinstance(provenance, dict):
        raise ValueError("field 'provenance' must be an object")
    return Passage(
        id=pid,
        page_title=str(obj.get("title", "")),
        text=text,
        tasks=tuple(tasks),
        provenance=provenance,
        token_count=len(normalize(text)),
    )


@dataclass(frozen=True)
class ExclusionIndex:
    """Hash set of n-token tuples harvested from exclusion corpora."""

    n: int
    grams: frozenset[tuple[str, ...]]

    def collides(self, text: str) -> bool:
        return not self.grams.isdisjoint(ngrams(normalize(text), self.n))


def build_exclusion_index(texts: Iterable[str], n: int = 8) -> ExclusionIndex:
    if n < 1:
        raise PreconditionError(f"n must be >= 1, got {n}")
    grams: set[tuple[str, ...]] = set()
    for text in texts:
        grams |= ngrams(normalize(text), n)
    return ExclusionIndex(n=n, grams=frozenset(grams))


@dataclass
class FilterReport:
    """Per-stage rejection counts for one filter_passages run."""

    input_count: int = 0
    rejected_length: int = 0
    rejected_tasks: int = 0
    rejected_overlap: int = 0
    kept: int = 0

    def to_dict(self) -> dict:
        return {
            "input": self.input_count,
            "rejected_length": self.rejected_length,
            "rejected_tasks": self.rejected_tasks,
            "rejected_overlap": self.rejected_overlap,
            "kept": self.kept,
        }


class PassageStore:
    """Ordered passage collection with per-worker no-repeat assignment."""

    def __init__(self, seed: int = 0):
        self.seed = seed
        self._passages: dict[str, Passage] = {}
        self._assigned: dict[str, set[str]] = {}
        self._assign_counts: dict[str, int] = {}
        self._lock = threading.Lock()

    def __len__(self) -> int:
        return len(self._passages)

    def __contains__(self, passage_id: str) -> bool:
        return passage_id in self._passages

    def get(self, passage_id: str) -> Passage:
        return self._passages[passage_id]

    def passages(self) -> list[Passage]:
        return list(self._passages.values())

    def ids(self) -> list[str]:
        return list(self._passages.keys())

    def add(self, passage: Passage) -> None:
        existing = self._passages.get(passage.id)
        if existing is not None:
            if existing == passage:
                return  # idempotent re-ingestion
            raise DuplicateIdError(passage.id)
        self._passages[passage.id] = passage

    def assign(self, worker: str, salt: str = "") -> Passage:
        """Pick an unseen passage for `worker`, uniformly and reproducibly.

        The draw is keyed on (store seed, worker, draw index), so the
        assignment sequence for a worker depends only on the seed and never
        on interleaving with other workers.
        """
        with self._lock:
            if not self._passages:
                raise StoreExhaustedError("store is empty")
            seen = self._assigned.setdefault(worker, set())
            unseen = [pid for pid in self._passages if pid not in seen]
            if not unseen:
                raise StoreExhaustedError(f"no unseen passage left for worker {worker!r}")
            count = self._assign_counts.get(worker, 0)
            rng = derived_rng(self.seed, "assign", salt, worker, count)
            pid = unseen[rng.randrange(len(unseen))]
            seen.add(pid)
            self._assign_counts[worker] = count + 1
            return self._passages[pid]

    def mark_assigned(self, worker: str, passage_id: str) -> None:
        """Record an assignment without drawing; used when replaying a log."""
        with self._lock:
            self._assigned.setdefault(worker, set()).add(passage_id)
            self._assign_counts[worker] = self._assign_counts.get(worker, 0) + 1

    def assigned_to(self, worker: str) -> set[str]:
        return set(self._assigned.get(worker, ()))


def ingest(records: Iterable[dict], seed: int = 0) -> PassageStore:
    """Build a store from parsed records.  Re-ingesting the same record is a no-op."""
    store = PassageStore(seed=seed)
    for line_no, obj in enumerate(records, start=1):
        try:
            passage = passage_from_record(obj)
        except ValueError as exc:
            raise MalformedRecordError(line_no, str(exc)) from None
        store.add(passage)
    return store


def read_ndjson(fp: IO[str]) -> Iterator[dict]:
    for line_no, line in enumerate(fp, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            yield json.loads(line)
        except json.JSONDecodeError as exc:
            raise MalformedRecordError(line_no, f"invalid JSON: {exc.msg}") from None


def load_store(path, seed: int = 0) -> PassageStore:
    with open(path, "r", encoding="utf-8") as fp:
        return ingest(read_ndjson(fp), seed=seed)


def save_store(store: PassageStore, path) -> None:
    with open(path, "w", encoding="utf-8") as fp:
        for passage in store.passages():
            fp.write(json.dumps(passage.to_record(), ensure_ascii=False) + "\n")


def filter_passages(
    store: PassageStore,
    min_tokens: int = 100,
    max_tokens: int = 600,
    min_tasks: int = 5,
    exclusion: ExclusionIndex | None = None,
) -> tuple[PassageStore, FilterReport]:
    """Keep passages passing all three stages; count rejections per stage.

    A passage failing several stages is counted once, at the first failing
    stage (length, then task usage, then overlap).
    """
    report = FilterReport(input_count=len(store))
    kept = PassageStore(seed=store.seed)
    for passage in store.passages():
        if not (min_tokens <= passage.token_count <= max_tokens):
            report.rejected_length += 1
            continue
        if passage.task_usage_count < min_tasks:
            report.rejected_tasks += 1
            continue
        if exclusion is not None and exclusion.collides(passage.text):
            report.rejected_overlap += 1
            continue
        kept.add(passage)
    report.kept = len(kept)
    return kept, report
