import pytest

from annoloop.annotation import GeneratorSource, Validity
from annoloop.backends import AnswerSpan
from annoloop.corpus import ingest
from annoloop.errors import (
    InvalidSettingError,
    PreconditionError,
    SessionError,
    ValidationError,
)
from annoloop.events import EventLog, load_events
from annoloop.mocks import MockCandidateExtractor, MockGenerator, MockQA, heuristic_candidates
from annoloop.prompts import PromptEngine
from annoloop.state import Platform

ADV_BASE = "adversarial:none:none:np"
STD_BASE = "standard:none:none:np"
ADV_SQUAD = "adversarial:squad:likelihood:np"
ADV_AP = "adversarial:combined:adversarial:ap"


def corpus_records(n=8):
    records = []
    for i in range(n):
        text = (
            f"In the year 19{i:02d} the scientist Alice Brown met Bob Stone near the "
            f"old city of Karlsruhe and they walked beside the river for {i + 2} hours "
            "while discussing the early results of the famous survey."
        )
        records.append(
            {
                "id": f"p{i}",
                "title": f"Survey {i}",
                "text": text,
                "tasks": ["qa", "summarization"],
                "provenance": {"source": "fixture"},
            }
        )
    return records


class TickClock:
    def __init__(self, start=1_000_000, step=250):
        self.now = start
        self.step = step

    def __call__(self):
        self.now += self.step
        return self.now


def build_platform(log=None, clock=None, qa_skill=1.0, seed=11):
    store = ingest(corpus_records(), seed=5)
    qa = MockQA(skill=qa_skill, seed=3)
    extractor = MockCandidateExtractor(seed=3)
    engines = {
        source: PromptEngine(
            MockGenerator(seed=3, source=source.value), qa, extractor, depth=3
        )
        for source in (
            GeneratorSource.SQUAD,
            GeneratorSource.ADVERSARIALQA,
            GeneratorSource.COMBINED,
        )
    }
    return Platform(
        store,
        engines,
        qa,
        log=log,
        clock=clock or TickClock(),
        seed=seed,
    )


def first_answer(platform, session_resp, index=0):
    text = session_resp["passage"]["text"]
    cand = heuristic_candidates(text)[index]
    return cand.span


def force_miss(platform, passage_id, question, gold):
    platform.qa.register_gold(passage_id, question, gold, difficulty=1.0)


def force_hit(platform, passage_id, question, gold):
    platform.qa.register_gold(passage_id, question, gold, difficulty=0.0)


class TestSessions:
    def test_start_session_response_shape(self):
        platform = build_platform()
        resp = platform.start_session("w1", ADV_BASE)
        assert resp["session_id"] == "s0"
        assert resp["setting"] == ADV_BASE
        assert resp["passage"]["id"] in platform.store
        assert resp["examples_remaining"] == 5
        assert platform.roles["w1"] == "writer"

    def test_invalid_setting_rejected(self):
        platform = build_platform()
        with pytest.raises(InvalidSettingError):
            platform.start_session("w1", "standard:combined:likelihood:np")

    def test_one_active_session_per_worker(self):
        platform = build_platform()
        resp = platform.start_session("w1", ADV_BASE)
        with pytest.raises(SessionError):
            platform.start_session("w1", ADV_BASE)
        sid = resp["session_id"]
        answer = first_answer(platform, resp)
        for i in range(5):
            force_miss(platform, resp["passage"]["id"], f"q{i}?", answer)
            platform.submit_example(sid, f"q{i}?", answer)
        next_resp = platform.start_session("w1", ADV_BASE)
        assert next_resp["session_id"] == "s1"

    def test_distinct_workers_get_deterministic_assignments(self):
        a = build_platform()
        b = build_platform()
        ra = [a.start_session(f"w{i}", ADV_BASE)["passage"]["id"] for i in range(4)]
        rb = [b.start_session(f"w{i}", ADV_BASE)["passage"]["id"] for i in range(4)]
        assert ra == rb

    def test_validator_cannot_write(self):
        platform = build_platform()
        resp = platform.start_session("w1", ADV_BASE)
        answer = first_answer(platform, resp)
        force_miss(platform, resp["passage"]["id"], "q0?", answer)
        platform.submit_example(resp["session_id"], "q0?", answer)
        platform.next_validation("v1")
        with pytest.raises(SessionError):
            platform.start_session("v1", ADV_BASE)


class TestPrompting:
    def test_baseline_setting_rejects_prompts(self):
        platform = build_platform()
        resp = platform.start_session("w1", ADV_BASE)
        with pytest.raises(SessionError):
            platform.request_prompt(resp["session_id"], first_answer(platform, resp))

    def test_question_only_requires_answer(self):
        platform = build_platform()
        resp = platform.start_session("w1", ADV_SQUAD)
        with pytest.raises(PreconditionError):
            platform.request_prompt(resp["session_id"], None)

    def test_answer_prompting_rejects_supplied_answer(self):
        platform = build_platform()
        resp = platform.start_session("w1", ADV_AP)
        with pytest.raises(PreconditionError):
            platform.request_prompt(resp["session_id"], first_answer(platform, resp))
        served = platform.request_prompt(resp["session_id"], None)
        assert served["question"]
        assert served["answer"]["text"] in resp["passage"]["text"]

    def test_queries_attach_to_next_submission(self):
        platform = build_platform()
        resp = platform.start_session("w1", ADV_SQUAD)
        sid = resp["session_id"]
        answer = first_answer(platform, resp)
        for _ in range(3):
            platform.request_prompt(sid, answer)
        force_miss(platform, resp["passage"]["id"], "my own question?", answer)
        outcome = platform.submit_example(sid, "my own question?", answer)
        row = platform.rows[-1]
        assert row.record.generator_queries == 3
        assert outcome["prompt_provenance"] == "edited"

    def test_accepted_prompt_provenance(self):
        platform = build_platform()
        resp = platform.start_session("w1", ADV_SQUAD)
        sid = resp["session_id"]
        answer = first_answer(platform, resp)
        served = platform.request_prompt(sid, answer)
        platform.submit_example(sid, served["question"], answer)
        assert platform.rows[-1].record.prompt_provenance.value == "accepted"
        assert platform.rows[-1].record.source_prompt_id == served["prompt_id"]

    def test_prompt_response_reveals_no_strategy(self):
        platform = build_platform()
        resp = platform.start_session("w1", ADV_SQUAD)
        served = platform.request_prompt(resp["session_id"], first_answer(platform, resp))
        assert set(served) == {"session_id", "prompt_id", "question", "answer", "origin"}


class TestSubmission:
    def test_standard_submission_has_no_prediction(self):
        platform = build_platform()
        resp = platform.start_session("w1", STD_BASE)
        outcome = platform.submit_example(resp["session_id"], "q?", first_answer(platform, resp))
        assert outcome["fooled"] is None and outcome["model_prediction"] is None

    def test_adversarial_submission_reports_fooled(self):
        platform = build_platform()
        resp = platform.start_session("w1", ADV_BASE)
        sid, pid = resp["session_id"], resp["passage"]["id"]
        answer = first_answer(platform, resp)
        force_hit(platform, pid, "caught?", answer)
        caught = platform.submit_example(sid, "caught?", answer)
        assert caught["fooled"] is False
        assert caught["model_prediction"]["answer"]["text"] == answer.text
        force_miss(platform, pid, "missed?", answer)
        missed = platform.submit_example(sid, "missed?", answer)
        assert missed["fooled"] is True

    def test_submission_enqueues_validation_task(self):
        platform = build_platform()
        resp = platform.start_session("w1", ADV_BASE)
        answer = first_answer(platform, resp)
        force_miss(platform, resp["passage"]["id"], "q?", answer)
        outcome = platform.submit_example(resp["session_id"], "q?", answer)
        task = platform.queue.get(outcome["example_id"])
        assert task.author == "w1"

    def test_submit_idempotency_key_replays_response(self):
        platform = build_platform()
        resp = platform.start_session("w1", ADV_BASE)
        answer = first_answer(platform, resp)
        force_miss(platform, resp["passage"]["id"], "q?", answer)
        first = platform.submit_example(resp["session_id"], "q?", answer, idempotency_key="k1")
        events_before = len(platform.log)
        again = platform.submit_example(resp["session_id"], "other?", answer, idempotency_key="k1")
        assert again == first
        assert len(platform.log) == events_before
        assert len(platform.rows) == 1

    def test_sixth_submission_rejected(self):
        platform = build_platform()
        resp = platform.start_session("w1", STD_BASE)
        answer = first_answer(platform, resp)
        for i in range(5):
            platform.submit_example(resp["session_id"], f"q{i}?", answer)
        with pytest.raises(SessionError):
            platform.submit_example(resp["session_id"], "q5?", answer)


def run_full_validation(platform, example_id, verdicts=("valid", "valid", "invalid")):
    votes = []
    for validator, verdict in zip(("v1", "v2", "v3"), verdicts):
        task = platform.next_validation(validator)
        assert task is not None and task["task_id"] == example_id
        votes.append(platform.cast_vote(example_id, validator, verdict))
    return votes


class TestValidationFlow:
    def _submit_one(self, platform, fooled=True, worker="w1"):
        resp = platform.start_session(worker, ADV_BASE)
        answer = first_answer(platform, resp)
        if fooled:
            force_miss(platform, resp["passage"]["id"], "q?", answer)
        else:
            force_hit(platform, resp["passage"]["id"], "q?", answer)
        return platform.submit_example(resp["session_id"], "q?", answer)

    def test_majority_resolves_and_sets_validity(self):
        platform = build_platform()
        outcome = self._submit_one(platform)
        votes = run_full_validation(platform, outcome["example_id"])
        assert votes[-1]["resolution"] == "valid"
        assert platform.rows[-1].record.validity is Validity.VALID

    def test_bonus_accrues_only_for_fooling_valid(self):
        platform = build_platform()
        fooling = self._submit_one(platform, fooled=True, worker="w1")
        run_full_validation(platform, fooling["example_id"])
        assert platform.ledger.total == 0.50
        caught = self._submit_one(platform, fooled=False, worker="w2")
        run_full_validation(platform, caught["example_id"])
        assert platform.ledger.total == 0.50

    def test_invalid_resolution_blocks_bonus(self):
        platform = build_platform()
        outcome = self._submit_one(platform)
        run_full_validation(platform, outcome["example_id"], ("invalid", "invalid", "valid"))
        assert platform.ledger.total == 0.0
        assert platform.rows[-1].record.validity is Validity.INVALID

    def test_resolution_event_precedes_bonus(self):
        platform = build_platform()
        outcome = self._submit_one(platform)
        run_full_validation(platform, outcome["example_id"])
        types = [e.event_type for e in platform.log.events()]
        assert types.index("validation_resolved") < types.index("bonus_accrued")

    def test_writer_cannot_validate(self):
        platform = build_platform()
        self._submit_one(platform)
        with pytest.raises(ValidationError):
            platform.next_validation("w1")

    def test_unassigned_vote_rejected(self):
        platform = build_platform()
        outcome = self._submit_one(platform)
        with pytest.raises(ValidationError):
            platform.cast_vote(outcome["example_id"], "v9", "valid")

    def test_vote_idempotency(self):
        platform = build_platform()
        outcome = self._submit_one(platform)
        platform.next_validation("v1")
        first = platform.cast_vote(outcome["example_id"], "v1", "valid", idempotency_key="vk")
        events_before = len(platform.log)
        again = platform.cast_vote(outcome["example_id"], "v1", "invalid", idempotency_key="vk")
        assert again == first
        assert len(platform.log) == events_before

    def test_empty_queue_returns_none_without_events(self):
        platform = build_platform()
        before = len(platform.log)
        assert platform.next_validation("v1") is None
        assert len(platform.log) == before


class TestMetricsAndExport:
    def _collect(self, platform, worker, fooled, verdicts):
        resp = platform.start_session(worker, ADV_BASE)
        answer = first_answer(platform, resp)
        question = f"{worker} q?"
        if fooled:
            force_miss(platform, resp["passage"]["id"], question, answer)
        else:
            force_hit(platform, resp["passage"]["id"], question, answer)
        outcome = platform.submit_example(resp["session_id"], question, answer)
        run_full_validation(platform, outcome["example_id"], verdicts)
        return outcome

    def test_reports_and_flagged_exclusion(self):
        platform = build_platform()
        self._collect(platform, "good", True, ("valid", "valid", "valid"))
        self._collect(platform, "spam", True, ("invalid", "invalid", "invalid"))
        assert platform.flagged_workers() == {"spam"}
        report = platform.metrics_reports(ADV_BASE)[0]
        assert report.n_examples == 1
        assert report.vmfe_count == 1
        assert report.vmer == 1.0

    def test_export_contains_only_valid_examples(self):
        platform = build_platform()
        kept = self._collect(platform, "good", True, ("valid", "valid", "valid"))
        self._collect(platform, "other", True, ("invalid", "invalid", "valid"))
        doc, meta = platform.export(ADV_BASE)
        ids = [qa["id"] for art in doc["data"] for para in art["paragraphs"] for qa in para["qas"]]
        assert ids == [kept["example_id"]]
        assert meta["setting"] == ADV_BASE

    def test_all_twenty_reports_by_default(self):
        platform = build_platform()
        reports = platform.metrics_reports()
        assert len(reports) == 20


def scripted_traffic(platform):
    # two writers, prompts, five submissions each, full validation on the first three
    r1 = platform.start_session("w1", ADV_SQUAD)
    r2 = platform.start_session("w2", ADV_AP)
    a1 = first_answer(platform, r1)
    for i in range(3):
        platform.request_prompt(r1["session_id"], a1)
    example_ids = []
    for i in range(5):
        q = f"w1 question {i}?"
        if i % 2 == 0:
            force_miss(platform, r1["passage"]["id"], q, a1)
        else:
            force_hit(platform, r1["passage"]["id"], q, a1)
        example_ids.append(platform.submit_example(r1["session_id"], q, a1)["example_id"])
    served = platform.request_prompt(r2["session_id"], None)
    ans2 = AnswerSpan(served["answer"]["text"], served["answer"]["char_start"])
    example_ids.append(
        platform.submit_example(r2["session_id"], served["question"], ans2, idempotency_key="dup")[
            "example_id"
        ]
    )
    platform.submit_example(r2["session_id"], "ignored?", ans2, idempotency_key="dup")
    for eid in example_ids[:3]:
        for v, verdict in zip(("v1", "v2", "v3"), ("valid", "valid", "invalid")):
            task = platform.next_validation(v)
            platform.cast_vote(task["task_id"], v, verdict)
    return example_ids


class TestReplay:
    def test_replay_reconstructs_snapshot(self, tmp_path):
        path = tmp_path / "events.ndjson"
        platform = build_platform(log=EventLog(path))
        scripted_traffic(platform)
        expected = platform.snapshot()
        platform.log.close()

        events = load_events(path)
        fresh = build_platform()
        replayed = Platform.replay(
            events,
            store=fresh.store,
            engines=fresh.engines,
            qa=fresh.qa,
            seed=11,
        )
        assert replayed.snapshot() == expected

    def test_from_log_continues_session_numbering(self, tmp_path):
        path = tmp_path / "events.ndjson"
        platform = build_platform(log=EventLog(path))
        platform.start_session("w1", STD_BASE)
        platform.log.close()

        fresh = build_platform()
        resumed = Platform.from_log(
            path, store=fresh.store, engines=fresh.engines, qa=fresh.qa, clock=TickClock(2_000_000)
        )
        resp = resumed.start_session("w9", STD_BASE)
        assert resp["session_id"] == "s1"
        resumed.log.close()
        assert [e.session_id for e in load_events(path)] == ["s0", "s1"]

    def test_every_command_appends_before_ack(self):
        platform = build_platform()
        assert len(platform.log) == 0
        resp = platform.start_session("w1", ADV_BASE)
        assert len(platform.log) == 1
        answer = first_answer(platform, resp)
        force_miss(platform, resp["passage"]["id"], "q?", answer)
        platform.submit_example(resp["session_id"], "q?", answer)
        assert len(platform.log) == 2
