"""Runs the platform's shared wire-protocol fixture suite against this adapter.

The fixture file is owned by the platform repo (tests/fixtures/protocol); this
suite must stay in lockstep with the checks run against the mock backends.
"""

import json
import math
from pathlib import Path

from fastapi.testclient import TestClient

from annoloop_adapter import StubModels, create_app

CASES_PATH = Path(__file__).resolve().parents[2] / "tests" / "fixtures" / "protocol" / "cases.json"


def canonical(obj) -> bytes:
    return json.dumps(
        obj, ensure_ascii=False, allow_nan=False, indent=None, separators=(",", ":")
    ).encode("utf-8")


def check_generate(payload, expect, name):
    assert set(payload) == {"questions"}, name
    questions = payload["questions"]
    assert expect.get("min_questions", 1) <= len(questions) <= expect["max_questions"], name
    texts = set()
    for q in questions:
        assert set(q) == {"question", "log_likelihood"}, name
        assert isinstance(q["question"], str) and q["question"], name
        ll = q["log_likelihood"]
        assert isinstance(ll, (int, float)) and math.isfinite(ll) and ll <= 0, name
        texts.add(q["question"])
    assert len(texts) == len(questions), f"{name}: duplicate questions"


def check_qa(payload, passage, name):
    assert set(payload) == {"answer", "confidence"}, name
    answer = payload["answer"]
    assert set(answer) == {"text", "char_start"}, name
    text, start = answer["text"], answer["char_start"]
    assert isinstance(text, str) and text, name
    assert passage[start : start + len(text)] == text, name
    assert 0.0 < payload["confidence"] <= 1.0, name


def check_candidates(payload, passage, expect, name):
    assert set(payload) == {"candidates"}, name
    cands = payload["candidates"]
    assert expect.get("min_candidates", 0) <= len(cands) <= expect["max_candidates"], name
    seen = set()
    scores = []
    for c in cands:
        assert set(c) == {"text", "char_start", "score"}, name
        text, start = c["text"], c["char_start"]
        assert passage[start : start + len(text)] == text, name
        assert (start, text) not in seen, f"{name}: duplicate candidate"
        seen.add((start, text))
        scores.append(c["score"])
    assert scores == sorted(scores, reverse=True), f"{name}: not sorted by descending score"


def run_protocol_cases(post) -> int:
    doc = json.loads(CASES_PATH.read_text())
    passage = doc["passage"]
    responses: dict[str, bytes] = {}
    for case in doc["cases"]:
        name = case["name"]
        raw = case.get("raw_body")
        body = raw.encode("utf-8") if raw is not None else canonical(case["body"])
        status, content = post(case["endpoint"], body)
        expect = case["expect"]
        assert status == expect["status"], (name, status, content)
        if "exact_json" in expect:
            assert content == canonical(expect["exact_json"]), (name, content)
        kind = expect.get("kind")
        if kind == "generate_ok":
            check_generate(json.loads(content), expect, name)
        elif kind == "qa_ok":
            check_qa(json.loads(content), passage, name)
        elif kind == "candidates_ok":
            check_candidates(json.loads(content), passage, expect, name)
        if "bytes_equal_to" in expect:
            assert content == responses[expect["bytes_equal_to"]], name
        if "prefix_of" in expect:
            longer = json.loads(responses[expect["prefix_of"]])["candidates"]
            shorter = json.loads(content)["candidates"]
            assert shorter == longer[: len(shorter)], name
        responses[name] = content
    return len(doc["cases"])


def test_stub_adapter_passes_fixture_suite():
    client = TestClient(create_app(StubModels(seed=0)), raise_server_exceptions=False)

    def post(endpoint, body):
        resp = client.post(endpoint, content=body, headers={"content-type": "application/json"})
        return resp.status_code, resp.content

    count = run_protocol_cases(post)
    print(f"ACCEPTANCE: protocol-conformance(adapter-stub) PASS ({count} cases)")
