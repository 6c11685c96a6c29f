"""Per-setting collection metrics and dataset export.

Everything here is a pure function of already-collected records, so reports
can be recomputed from a replayed event log and compared for equality.
"""

from __future__ import annotations

import statistics
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

from .annotation import ExampleRecord, ExperimentSetting, Validity
from .corpus import Passage
from .errors import PreconditionError

GROUP_KEYS = ("gaa_training", "sampler", "answer_prompting")


def median_and_mad(values: Sequence[float]) -> tuple[float, float]:
    """Median plus median absolute deviation from it."""
    if not values:
        raise PreconditionError("median of an empty list is undefined")
    med = statistics.median(values)
    mad = statistics.median([abs(v - med) for v in values])
    return med, mad


def _qualifying(records: Iterable[ExampleRecord]) -> int:
    return sum(1 for r in records if r.fooled is True and r.validity is Validity.VALID)


def vmer(records: Sequence[ExampleRecord]) -> Optional[float]:
    """Validated model error rate: fooling-and-valid share of all records."""
    if not records:
        return None
    return _qualifying(records) / len(records)


def time_per_vmfe(records: Sequence[ExampleRecord]) -> Optional[float]:
    """Total annotation seconds divided by validated model-fooling examples.

    Undefined (None, never infinity) when nothing qualified.
    """
    count = _qualifying(records)
    if count == 0:
        return None
    total_s = sum(r.duration_ms for r in records) / 1000.0
    return total_s / count


def median_time_per_vmfe(records: Sequence[ExampleRecord]) -> Optional[float]:
    """Alternate reading: median duration among the qualifying examples."""
    durations = [
        r.duration_ms / 1000.0
        for r in records
        if r.fooled is True and r.validity is Validity.VALID
    ]
    if not durations:
        return None
    return statistics.median(durations)


def _group_label(setting: ExperimentSetting, group_by: str) -> str:
    if group_by == "gaa_training":
        return setting.generator.value
    if group_by == "sampler":
        return setting.sampler.value if setting.sampler else "none"
    if group_by == "answer_prompting":
        return "answer_prompt" if setting.answer_prompting else "question_only"
    raise PreconditionError(f"unknown grouping {group_by!r}; expected one of {GROUP_KEYS}")


def generations_per_example(
    records: Sequence[tuple[ExperimentSetting, ExampleRecord]], group_by: str
) -> dict[str, float]:
    """Mean generator queries per example, grouped over assisted settings.

    Groups without records are omitted rather than reported as zero.
    """
    if group_by not in GROUP_KEYS:
        raise PreconditionError(f"unknown grouping {group_by!r}; expected one of {GROUP_KEYS}")
    sums: dict[str, int] = {}
    counts: dict[str, int] = {}
    for setting, record in records:
        if not setting.assisted:
            continue
        label = _group_label(setting, group_by)
        sums[label] = sums.get(label, 0) + record.generator_queries
        counts[label] = counts.get(label, 0) + 1
    return {label: sums[label] / counts[label] for label in sums}


def eligible_records(
    records: Sequence[tuple[str, ExampleRecord]], flagged_workers: set[str]
) -> list[ExampleRecord]:
    """Resolved records from non-flagged workers; the metrics denominator."""
    return [
        r
        for worker, r in records
        if worker not in flagged_workers and r.validity is not Validity.PENDING
    ]


@dataclass(frozen=True)
class MetricsReport:
    setting: ExperimentSetting
    n_examples: int
    vmfe_count: int
    median_time_s: Optional[float]
    time_mad_s: Optional[float]
    vmer: Optional[float]
    time_per_vmfe_s: Optional[float]
    median_time_per_vmfe_s: Optional[float]
    avg_generations_per_example: Optional[float]

    def to_dict(self) -> dict:
        return {
            "setting": self.setting.key,
            "n_examples": self.n_examples,
            "vmfe_count": self.vmfe_count,
            "median_time_s": self.median_time_s,
            "time_mad_s": self.time_mad_s,
            "vmer": self.vmer,
            "time_per_vmfe_s": self.time_per_vmfe_s,
            "median_time_per_vmfe_s": self.median_time_per_vmfe_s,
            "avg_generations_per_example": self.avg_generations_per_example,
        }


def build_report(setting: ExperimentSetting, records: Sequence[ExampleRecord]) -> MetricsReport:
    durations_s = [r.duration_ms / 1000.0 for r in records]
    med = mad = None
    if durations_s:
        med, mad = median_and_mad(durations_s)
    rate = vmer(records) if setting.adversarial else None
    avg_gen = None
    if records:
        avg_gen = sum(r.generator_queries for r in records) / len(records)
    return MetricsReport(
        setting=setting,
        n_examples=len(records),
        vmfe_count=_qualifying(records),
        median_time_s=med,
        time_mad_s=mad,
        vmer=rate,
        time_per_vmfe_s=time_per_vmfe(records) if setting.adversarial else None,
        median_time_per_vmfe_s=median_time_per_vmfe(records) if setting.adversarial else None,
        avg_generations_per_example=avg_gen,
    )


def _fmt(value: Optional[float], digits: int = 1) -> str:
    if value is None:
        return "-"
    return f"{value:.{digits}f}"


def format_report_table(reports: Sequence[MetricsReport], median_variant: bool = False) -> str:
    """Aligned plain-text table: t with its MAD, vMER as a percentage, t/vMFE."""
    headers = ["Setting", "n", "t (s)", "vMER (%)", "t/vMFE (s)"]
    if median_variant:
        headers.append("med t/vMFE (s)")
    rows = [headers]
    for rep in reports:
        t_cell = "-"
        if rep.median_time_s is not None:
            t_cell = f"{rep.median_time_s:.1f}±{rep.time_mad_s:.1f}"
        row = [
            rep.setting.key,
            str(rep.n_examples),
            t_cell,
            _fmt(rep.vmer * 100 if rep.vmer is not None else None, 2),
            _fmt(rep.time_per_vmfe_s),
        ]
        if median_variant:
            row.append(_fmt(rep.median_time_per_vmfe_s))
        rows.append(row)
    widths = [max(len(r[i]) for r in rows) for i in range(len(headers))]
    lines = []
    for i, row in enumerate(rows):
        lines.append("  ".join(cell.ljust(widths[j]) for j, cell in enumerate(row)).rstrip())
        if i == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines)


def export_dataset(
    records: Sequence[tuple[Passage, ExampleRecord]], setting: ExperimentSetting
) -> tuple[dict, dict]:
    """SQuAD-v1.1-shaped document of the valid examples, plus a sidecar with
    passage provenance keyed by paragraph order."""
    paragraphs: list[dict] = []
    by_passage: dict[str, dict] = {}
    meta_passages: dict[str, dict] = {}
    example_index: dict[str, str] = {}
    for passage, record in records:
        if record.validity is not Validity.VALID:
            continue
        para = by_passage.get(passage.id)
        if para is None:
            para = {"context": passage.text, "qas": []}
            by_passage[passage.id] = para
            paragraphs.append({"title": passage.page_title, "passage_id": passage.id, "para": para})
            meta_passages[passage.id] = {
                "page_title": passage.page_title,
                "provenance": dict(passage.provenance),
                "tasks": list(passage.tasks),
            }
        para["qas"].append(
            {
                "id": record.id,
                "question": record.question,
                "answers": [{"text": record.answer.text, "answer_start": record.answer.char_start}],
            }
        )
        example_index[record.id] = passage.id
    data = [
        {"title": entry["title"], "paragraphs": [entry["para"]]} for entry in paragraphs
    ]
    document = {"version": "1.1", "data": data}
    metadata = {
        "setting": setting.key,
        "passages": meta_passages,
        "examples": example_index,
    }
    return document, metadata


def load_exported(document: dict) -> list[tuple[str, str, str, int, str]]:
    """Flatten an exported document to (id, question, answer, start, context) rows."""
    rows = []
    for article in document["data"]:
        for para in article["paragraphs"]:
            for qa in para["qas"]:
                ans = qa["answers"][0]
                rows.append(
                    (qa["id"], qa["question"], ans["text"], ans["answer_start"], para["context"])
                )
    return rows
