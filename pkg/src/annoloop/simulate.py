"""Deterministic simulated annotators driving the full platform stack.

The harness never reaches around the public operations: it starts sessions,
requests prompts, submits examples, and votes exactly the way the HTTP layer
does.  All randomness comes from hash-derived generators keyed on the run
seed, so a fixed seed yields byte-identical event logs.
"""

from __future__ import annotations

import json
import math
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from random import Random
from typing import Optional, Sequence, Union

from .annotation import ExperimentSetting, GeneratorSource, setting_matrix
from .backends import AnswerSpan
from .corpus import Passage, PassageStore, save_store
from .errors import PlatformError, PreconditionError, PromptUnavailableError
from .events import EventLog, load_events
from .metrics import MetricsReport, format_report_table
from .mocks import MockCandidateExtractor, MockGenerator, MockQA, heuristic_candidates
from .prompts import PromptEngine
from .rand import derived_rng
from .state import Platform
from .text import f1_overlap
from .validation import Verdict

# propensity for fooling submissions written without generator help
UNASSISTED_FOOL_RATE = 0.2
MAX_QUERIES_PER_EXAMPLE = 8
SIM_EPOCH_MS = 1_600_000_000_000
SIM_ENGINE_DEPTH = 5
VALIDATOR_POOL = tuple(f"sim-validator-{i}" for i in range(5))

_QUERY_TIME_MS = 1_000
_VOTE_TIME_MS = 500

_FILLERS = ("exactly", "precisely", "actually", "instead", "notably")

_GIVEN = ("Alice", "Viktor", "Marta", "Henrik", "Ines", "Tomas", "Greta", "Pavel")
_FAMILY = ("Brown", "Stone", "Lindqvist", "Moreau", "Okafor", "Tanaka", "Silva", "Novak")
_PLACES = ("Karlsruhe", "Tromso", "Valparaiso", "Kyoto", "Galway", "Windhoek")
_FIELDS = ("glaciology", "acoustics", "numismatics", "seismology", "cartography")


@dataclass(frozen=True)
class AnnotatorProfile:
    """Behavioural dials for one simulated annotator population.

    p_query gates the first prompt request.  Re-queries continue with
    probability p_query scaled by the served prompt's model overlap, so
    easy-looking prompts get re-rolled and hard ones get kept.  The default
    puts mean generations per example around 0.72.
    """

    p_query: float = 0.68
    p_accept: float = 0.5
    edit_strength: float = 0.3
    base_time_ms: int = 70_000
    time_saving_factor: float = 0.5
    skill_lift: float = 0.85

    def __post_init__(self):
        for name in ("p_query", "p_accept", "edit_strength", "time_saving_factor", "skill_lift"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise PreconditionError(f"{name} must be in [0, 1], got {value}")
        if self.base_time_ms <= 0:
            raise PreconditionError("base_time_ms must be positive")


DEFAULT_PROFILE = AnnotatorProfile()

ProfileSpec = Union[None, AnnotatorProfile, dict]


class SimClock:
    """Monotone virtual clock the platform reads instead of wall time."""

    def __init__(self, start_ms: int = SIM_EPOCH_MS):
        self.ms = start_ms
        self._lock = threading.Lock()

    def now(self) -> int:
        return self.ms

    def advance(self, delta_ms: float) -> None:
        with self._lock:
            self.ms += max(1, int(delta_ms))


def sim_corpus(n: int, seed: int = 0) -> list[Passage]:
    """Synthetic entity-rich passages; every sentence starts lowercase so the
    candidate heuristic sees clean entity runs."""
    passages = []
    for i in range(n):
        rng = derived_rng(seed, "sim-corpus", i)
        names = [
            f"{rng.choice(_GIVEN)} {rng.choice(_FAMILY)}" for _ in range(3)
        ]
        place = rng.choice(_PLACES)
        topic = rng.choice(_FIELDS)
        year = 1880 + rng.randrange(120)
        count = 12 + rng.randrange(880)
        text = (
            f"the {topic} station near {place} was founded by {names[0]} "
            f"in {year}. over the following decade {names[1]} logged "
            f"{count} observations there, and the collected series was "
            f"eventually published by {names[2]} to wide attention."
        )
        passages.append(
            Passage(
                id=f"sim{i:04d}",
                page_title=f"Station record {i}",
                text=text,
                tasks=("qa",),
                provenance={"source": "simulation"},
                token_count=len(text.split()),
            )
        )
    return passages


@dataclass
class SimSession:
    platform: Platform
    clock: SimClock
    session_id: str
    worker: str
    setting: ExperimentSetting
    passage: Passage
    examples_done: int = 0


def perturb_question(question: str, strength: float, rng: Random) -> str:
    tokens = question.split()
    edits = max(1, round(strength * len(tokens)))
    for _ in range(edits):
        tokens[rng.randrange(len(tokens))] = rng.choice(_FILLERS)
    edited = " ".join(tokens)
    if edited == question:
        edited += " indeed"
    return edited


def _fresh_question(passage: Passage, rng: Random) -> str:
    spans = [c.span for c in heuristic_candidates(passage.text)]
    pick = rng.choice(spans) if spans else AnswerSpan(passage.text.split()[0], 0)
    return f"what is detail {rng.randrange(1000)} regarding {pick.text}?"


def _prompt_f1(platform: Platform, passage: Passage, prompt: dict) -> float:
    """Recompute the served prompt's adversary overlap the same way scoring
    did; the QA mock is content-keyed, so this matches the cached value."""
    prediction = platform.qa.predict(passage, prompt["question"])
    return f1_overlap(prediction.span.text, prompt["answer"]["text"]).value


def simulate_example(session: SimSession, profile: AnnotatorProfile, rng: Random) -> dict:
    """One full example: optional prompt queries, accept/edit/write, submit.

    Returns the platform's submission response.  Fooling intent is realised
    by registering the gold span on the QA mock with difficulty equal to the
    fooling propensity, so the platform's own prediction path decides.
    """
    platform = session.platform
    passage = session.passage
    spans = [c.span for c in heuristic_candidates(passage.text)]
    intended = rng.choice(spans) if spans else AnswerSpan(passage.text, 0)

    prompt = None
    prompt_f1 = 1.0
    queries = 0
    if session.setting.assisted and rng.random() < profile.p_query:
        while queries < MAX_QUERIES_PER_EXAMPLE:
            try:
                if session.setting.answer_prompting:
                    prompt = platform.request_prompt(session.session_id)
                else:
                    prompt = platform.request_prompt(session.session_id, answer=intended)
            except PromptUnavailableError:
                # key exhausted; the annotator falls back to writing by hand
                break
            queries += 1
            session.clock.advance(_QUERY_TIME_MS)
            prompt_f1 = _prompt_f1(platform, passage, prompt)
            # re-roll prompts the model visibly handles; keep hard ones
            if rng.random() >= profile.p_query * prompt_f1:
                break

    style = "written"
    if prompt is not None:
        draw = rng.random()
        if draw < profile.p_accept:
            style = "accepted"
        elif profile.edit_strength > 0 and draw < profile.p_accept + (1 - profile.p_accept) * 0.7:
            style = "edited"

    if style == "accepted":
        question = prompt["question"]
        answer = AnswerSpan(prompt["answer"]["text"], prompt["answer"]["char_start"])
        time_factor = profile.time_saving_factor
    elif style == "edited":
        question = perturb_question(prompt["question"], profile.edit_strength, rng)
        answer = AnswerSpan(prompt["answer"]["text"], prompt["answer"]["char_start"])
        time_factor = (1.0 + profile.time_saving_factor) / 2.0
    else:
        question = _fresh_question(passage, rng)
        answer = intended
        time_factor = 1.0

    if session.setting.adversarial:
        if prompt is not None and style in ("accepted", "edited"):
            p_fool = profile.skill_lift * (1.0 - prompt_f1)
        else:
            p_fool = profile.skill_lift * UNASSISTED_FOOL_RATE
        platform.qa.register_gold(
            passage.id, question, answer, difficulty=min(1.0, max(0.0, p_fool))
        )

    duration = profile.base_time_ms * time_factor * (0.7 + 0.6 * rng.random())
    session.clock.advance(duration)
    response = platform.submit_example(session.session_id, question, answer)
    session.examples_done += 1
    return response


def drain_validation(
    platform: Platform,
    clock: SimClock,
    truth: dict[str, bool],
    rng: Random,
    accuracy: float,
    validators: Sequence[str] = VALIDATOR_POOL,
) -> int:
    """Vote every queued task to resolution with the configured accuracy."""
    votes = 0
    progressed = True
    while progressed:
        progressed = False
        for validator in validators:
            while True:
                task = platform.next_validation(validator)
                if task is None:
                    break
                wellformed = truth.get(task["task_id"], True)
                verdict = Verdict.VALID if wellformed else Verdict.INVALID
                if rng.random() >= accuracy:
                    verdict = Verdict.INVALID if verdict is Verdict.VALID else Verdict.VALID
                clock.advance(_VOTE_TIME_MS)
                platform.cast_vote(task["task_id"], validator, verdict)
                votes += 1
                progressed = True
    return votes


@dataclass
class SimResult:
    reports: list[MetricsReport]
    table: str
    diagnostics: list[str]
    platform: Platform
    events_path: Optional[Path] = None
    truth: dict[str, bool] = field(default_factory=dict)


def _profile_for(profiles: ProfileSpec, key: str) -> AnnotatorProfile:
    if profiles is None:
        return DEFAULT_PROFILE
    if isinstance(profiles, AnnotatorProfile):
        return profiles
    return profiles.get(key, profiles.get("default", DEFAULT_PROFILE))


def _components(matrix, examples_per_setting, seed):
    sessions_total = len(matrix) * math.ceil(examples_per_setting / 5)
    store = PassageStore()
    for passage in sim_corpus(sessions_total + 4, seed):
        store.add(passage)
    qa = MockQA(skill=1.0, seed=seed)
    extractor = MockCandidateExtractor(seed=seed)
    engines = {
        source: PromptEngine(
            MockGenerator(seed=seed, source=source.value),
            qa,
            extractor,
            depth=SIM_ENGINE_DEPTH,
        )
        for source in (GeneratorSource.SQUAD, GeneratorSource.ADVERSARIALQA, GeneratorSource.COMBINED)
    }
    return store, engines, qa


def _build_platform(matrix, examples_per_setting, seed, log) -> tuple[Platform, SimClock]:
    store, engines, qa = _components(matrix, examples_per_setting, seed)
    clock = SimClock()
    platform = Platform(store, engines, qa, log=log, clock=clock.now, seed=seed)
    return platform, clock


def replay_run(
    events_path: Union[str, Path],
    matrix: Optional[Sequence[ExperimentSetting]] = None,
    examples_per_setting: int = 50,
    seed: int = 0,
) -> Platform:
    """Rebuild every projection of a finished run from its event log alone.

    The run parameters must match the original call; they pin down the
    synthetic corpus and backend seeds the events refer to.
    """
    matrix = list(matrix) if matrix is not None else setting_matrix()
    store, engines, qa = _components(matrix, examples_per_setting, seed)
    return Platform.replay(
        load_events(events_path), store=store, engines=engines, qa=qa, seed=seed
    )


def _run_setting(
    platform: Platform,
    clock: SimClock,
    setting: ExperimentSetting,
    index: int,
    examples: int,
    profile: AnnotatorProfile,
    seed: int,
    truth: dict[str, bool],
    truth_lock: threading.Lock,
    p_wellformed: float,
    validator_accuracy: float,
) -> None:
    rng = derived_rng(seed, "setting", setting.key)
    worker = f"sim-writer-{index:02d}"
    remaining = examples
    while remaining > 0:
        started = platform.start_session(worker, setting)
        session = SimSession(
            platform=platform,
            clock=clock,
            session_id=started["session_id"],
            worker=worker,
            setting=setting,
            passage=platform.store.get(started["passage"]["id"]),
        )
        for _ in range(min(5, remaining)):
            response = simulate_example(session, profile, rng)
            with truth_lock:
                truth[response["example_id"]] = rng.random() < p_wellformed
            remaining -= 1
    drain_validation(
        platform, clock, truth, derived_rng(seed, "votes", setting.key), validator_accuracy
    )


def run_experiment(
    matrix: Optional[Sequence[ExperimentSetting]] = None,
    examples_per_setting: int = 50,
    profiles: ProfileSpec = None,
    seed: int = 0,
    validator_accuracy: float = 0.9,
    p_wellformed: float = 0.97,
    out_dir: Optional[Union[str, Path]] = None,
    threads: int = 1,
) -> SimResult:
    """Collect examples_per_setting submissions in every setting, validate
    them all, and report per-setting metrics.

    threads > 1 exercises the platform's locking with one worker thread per
    setting; only the single-threaded schedule guarantees byte-identical
    event logs for a fixed seed.
    """
    if examples_per_setting < 5:
        raise PreconditionError("need at least 5 examples per setting (one session)")
    matrix = list(matrix) if matrix is not None else setting_matrix()

    events_path = None
    log = EventLog()
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        events_path = out / "events.ndjson"
        if events_path.exists():
            events_path.unlink()
        log = EventLog(events_path)

    platform, clock = _build_platform(matrix, examples_per_setting, seed, log)
    truth: dict[str, bool] = {}
    truth_lock = threading.Lock()
    diagnostics: list[str] = []

    def run_one(pair):
        index, setting = pair
        try:
            _run_setting(
                platform,
                clock,
                setting,
                index,
                examples_per_setting,
                _profile_for(profiles, setting.key),
                seed,
                truth,
                truth_lock,
                p_wellformed,
                validator_accuracy,
            )
        except PlatformError as exc:
            diagnostics.append(f"{setting.key}: {exc}")

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(run_one, enumerate(matrix)))
    else:
        for pair in enumerate(matrix):
            run_one(pair)

    # settings can abort mid-session; sweep whatever is still queued
    drain_validation(platform, clock, truth, derived_rng(seed, "votes", "sweep"), validator_accuracy)

    reports = [platform.metrics_reports(setting.key)[0] for setting in matrix]
    table = format_report_table(reports)
    result = SimResult(
        reports=reports,
        table=table,
        diagnostics=sorted(diagnostics),
        platform=platform,
        events_path=events_path,
        truth=truth,
    )
    if out_dir is not None:
        _write_outputs(Path(out_dir), result, matrix, examples_per_setting, profiles, seed)
    return result


def _write_outputs(out, result, matrix, examples_per_setting, profiles, seed) -> None:
    # the corpus makes the event log replayable by offline tooling
    save_store(result.platform.store, out / "corpus.ndjson")
    reports_dir = out / "reports"
    reports_dir.mkdir(exist_ok=True)
    for report in result.reports:
        name = report.setting.key.replace(":", "_") + ".json"
        (reports_dir / name).write_text(
            json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n"
        )
    (out / "table.txt").write_text(result.table + "\n")
    if isinstance(profiles, AnnotatorProfile):
        profile_doc = {"default": asdict(profiles)}
    elif isinstance(profiles, dict):
        profile_doc = {k: asdict(v) for k, v in profiles.items()}
    else:
        profile_doc = {"default": asdict(DEFAULT_PROFILE)}
    (out / "run.json").write_text(
        json.dumps(
            {
                "seed": seed,
                "examples_per_setting": examples_per_setting,
                "settings": [s.key for s in matrix],
                "profiles": profile_doc,
                "diagnostics": result.diagnostics,
            },
            indent=2,
            sort_keys=True,
        )
        + "\n"
    )


def load_profiles(path: Union[str, Path]) -> dict[str, AnnotatorProfile]:
    """Profile file: {"default": {...}, "<setting key>": {...}} with partial
    field overrides allowed."""
    raw = json.loads(Path(path).read_text())
    if not isinstance(raw, dict):
        raise PreconditionError("profile file must be a JSON object")
    out = {}
    for key, fields_ in raw.items():
        if not isinstance(fields_, dict):
            raise PreconditionError(f"profile {key!r} must be an object")
        base = asdict(DEFAULT_PROFILE)
        unknown = set(fields_) - set(base)
        if unknown:
            raise PreconditionError(f"profile {key!r} has unknown fields {sorted(unknown)}")
        base.update(fields_)
        out[key] = AnnotatorProfile(**base)
    return out
