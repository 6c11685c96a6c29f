import json

import pytest

from annoloop.errors import MalformedRecordError
from annoloop.events import (
    EVENT_TYPES,
    EventLog,
    EventRecord,
    event_from_dict,
    load_events,
    read_events,
)


def make_event(event_type="session_started", ts=1000, payload=None):
    return EventRecord(
        event_type=event_type,
        session_id="s0",
        worker_id="w1",
        setting="adversarial:none:none:np",
        timestamp_ms=ts,
        payload=payload if payload is not None else {"passage_id": "p1"},
    )


class TestCanonicalJson:
    def test_keys_sorted_and_compact(self):
        line = make_event(payload={"z": 1, "a": 2}).to_json()
        assert line.index('"event_type"') < line.index('"payload"') < line.index('"timestamp_ms"')
        assert ", " not in line and ": " not in line
        assert json.loads(line)["payload"] == {"z": 1, "a": 2}

    def test_same_event_same_bytes(self):
        assert make_event().to_json() == make_event().to_json()

    def test_round_trip(self):
        event = make_event(payload={"nested": {"x": [1, 2]}})
        back = list(read_events([event.to_json()]))
        assert back == [event]


class TestValidation:
    def test_missing_field_rejected_with_line_no(self):
        obj = make_event().to_dict()
        del obj["worker_id"]
        with pytest.raises(MalformedRecordError) as exc:
            event_from_dict(obj, line_no=7)
        assert exc.value.line_no == 7

    def test_unknown_event_type_rejected(self):
        obj = make_event().to_dict()
        obj["event_type"] = "mystery"
        with pytest.raises(MalformedRecordError):
            event_from_dict(obj)

    def test_bad_timestamp_and_payload_rejected(self):
        obj = make_event().to_dict()
        obj["timestamp_ms"] = "soon"
        with pytest.raises(MalformedRecordError):
            event_from_dict(obj)
        obj = make_event().to_dict()
        obj["payload"] = [1]
        with pytest.raises(MalformedRecordError):
            event_from_dict(obj)

    def test_invalid_json_line_numbered(self):
        lines = [make_event().to_json(), "{not json"]
        with pytest.raises(MalformedRecordError) as exc:
            list(read_events(lines))
        assert exc.value.line_no == 2

    def test_all_event_types_accepted(self):
        for event_type in EVENT_TYPES:
            event_from_dict(make_event(event_type=event_type).to_dict())


class TestEventLogFile:
    def test_append_mirrors_to_file(self, tmp_path):
        path = tmp_path / "events.ndjson"
        log = EventLog(path)
        first = make_event(ts=1)
        second = make_event(event_type="example_submitted", ts=2, payload={"record": {}})
        log.append(first)
        log.append(second)
        log.close()
        assert load_events(path) == [first, second]

    def test_reopen_appends_not_truncates(self, tmp_path):
        path = tmp_path / "events.ndjson"
        log = EventLog(path)
        log.append(make_event(ts=1))
        log.close()
        log2 = EventLog(path)
        log2.append(make_event(ts=2))
        log2.close()
        assert [e.timestamp_ms for e in load_events(path)] == [1, 2]

    def test_blank_lines_skipped(self, tmp_path):
        path = tmp_path / "events.ndjson"
        path.write_text(make_event().to_json() + "\n\n" + make_event(ts=5).to_json() + "\n")
        assert len(load_events(path)) == 2

    def test_memory_only_log(self):
        log = EventLog()
        log.append(make_event())
        assert len(log) == 1 and log.events()[0].session_id == "s0"
