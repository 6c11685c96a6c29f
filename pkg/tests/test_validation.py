import itertools

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from annoloop.annotation import Validity
from annoloop.errors import StarvationError, ValidationError
from annoloop.validation import (
    FlagMode,
    ValidationQueue,
    ValidationTask,
    Verdict,
    assign_validation,
    cast_vote,
    incorrectness_rate,
    is_flagged,
    resolve_majority,
)

V, I = Verdict.VALID, Verdict.INVALID


def make_task(example_id="e1", author="writer"):
    return ValidationTask(
        example_id=example_id, author=author, session_id="s1", setting_key="adversarial:none:none:np"
    )


class TestMajority:
    def test_two_valid_one_invalid_resolves_valid(self):
        assert resolve_majority([V, V, I]) is Validity.VALID

    def test_two_invalid_one_valid_resolves_invalid(self):
        assert resolve_majority([I, I, V]) is Validity.INVALID

    def test_all_eight_orderings_group_by_multiset(self):
        for combo in itertools.product([V, I], repeat=3):
            expected = Validity.VALID if combo.count(V) >= 2 else Validity.INVALID
            assert resolve_majority(combo) is expected

    def test_wrong_vote_count_rejected(self):
        with pytest.raises(ValidationError):
            resolve_majority([V, V])
        with pytest.raises(ValidationError):
            resolve_majority([V, V, I, I])

    @given(votes=st.lists(st.sampled_from([V, I]), min_size=3, max_size=3), seed=st.integers(0, 99))
    @settings(max_examples=60, deadline=None)
    def test_order_independent(self, votes, seed):
        import random

        shuffled = list(votes)
        random.Random(seed).shuffle(shuffled)
        assert resolve_majority(votes) is resolve_majority(shuffled)


class TestAssignment:
    def test_three_calls_cover_the_pool(self):
        task = make_task()
        pool = ["v1", "v2", "v3"]
        got = {assign_validation(task, pool) for _ in range(3)}
        assert got == {"v1", "v2", "v3"}

    def test_author_only_pool_starves(self):
        task = make_task(author="a")
        with pytest.raises(StarvationError):
            assign_validation(task, ["a"])

    def test_no_duplicate_assignment(self):
        task = make_task()
        first = assign_validation(task, ["v1", "v2"])
        second = assign_validation(task, ["v1", "v2"])
        assert first != second
        with pytest.raises(StarvationError):
            assign_validation(task, ["v1", "v2"])

    def test_fourth_slot_never_opens(self):
        task = make_task()
        for _ in range(3):
            assign_validation(task, ["v1", "v2", "v3", "v4", "v5"])
        with pytest.raises(StarvationError):
            assign_validation(task, ["v1", "v2", "v3", "v4", "v5"])

    def test_assignment_is_seed_deterministic(self):
        a = make_task()
        b = make_task()
        pool = [f"v{i}" for i in range(10)]
        picks_a = [assign_validation(a, pool, seed=42) for _ in range(3)]
        picks_b = [assign_validation(b, pool, seed=42) for _ in range(3)]
        assert picks_a == picks_b


class TestCastVote:
    def _assigned_task(self, validators=("v1", "v2", "v3")):
        task = make_task()
        task.assigned.extend(validators)
        return task

    def test_third_vote_resolves(self):
        task = self._assigned_task()
        cast_vote(task, "v1", V)
        assert task.resolution is Validity.PENDING
        cast_vote(task, "v2", V)
        assert task.resolution is Validity.PENDING
        cast_vote(task, "v3", I)
        assert task.resolution is Validity.VALID
        assert task.resolved

    def test_unassigned_validator_rejected(self):
        task = self._assigned_task(("v1",))
        with pytest.raises(ValidationError):
            cast_vote(task, "intruder", V)

    def test_double_vote_rejected(self):
        task = self._assigned_task()
        cast_vote(task, "v1", V)
        with pytest.raises(ValidationError):
            cast_vote(task, "v1", I)
        assert len(task.votes) == 1

    def test_votes_after_resolution_rejected(self):
        task = self._assigned_task()
        for v, verdict in [("v1", I), ("v2", I), ("v3", V)]:
            cast_vote(task, v, verdict)
        assert task.resolution is Validity.INVALID
        task.assigned.append("v4")
        with pytest.raises(ValidationError):
            cast_vote(task, "v4", V)

    def test_resolution_pending_iff_under_three_votes(self):
        task = self._assigned_task()
        assert task.resolution is Validity.PENDING
        cast_vote(task, "v1", V)
        cast_vote(task, "v2", I)
        assert task.resolution is Validity.PENDING
        cast_vote(task, "v3", I)
        assert task.resolution is not Validity.PENDING


class TestWorkerQuality:
    def test_nineteen_of_twenty_is_boundary_not_flagged(self):
        rate = incorrectness_rate([Validity.INVALID] * 19 + [Validity.VALID])
        assert rate == pytest.approx(0.95)
        assert not is_flagged(rate)

    def test_twenty_of_twenty_flagged(self):
        rate = incorrectness_rate([Validity.INVALID] * 20)
        assert rate == 1.0
        assert is_flagged(rate)

    def test_just_above_threshold_flagged(self):
        rate = incorrectness_rate([Validity.INVALID] * 951 + [Validity.VALID] * 49)
        assert rate == pytest.approx(0.951)
        assert is_flagged(rate)

    def test_no_resolutions_is_undefined_not_zero(self):
        assert incorrectness_rate([]) is None
        assert incorrectness_rate([Validity.PENDING, Validity.PENDING]) is None
        assert not is_flagged(None)

    def test_valid_below_mode_flags_mediocre_authors(self):
        # 10% invalid: fine under the literal reading, flagged under the strict one
        rate = incorrectness_rate([Validity.INVALID] * 2 + [Validity.VALID] * 18)
        assert not is_flagged(rate, mode=FlagMode.INCORRECTNESS_ABOVE)
        assert is_flagged(rate, mode=FlagMode.VALID_BELOW)
        high = incorrectness_rate([Validity.VALID] * 100)
        assert not is_flagged(high, mode=FlagMode.VALID_BELOW)

    def test_pending_excluded_from_rate(self):
        rate = incorrectness_rate([Validity.INVALID, Validity.PENDING, Validity.VALID])
        assert rate == pytest.approx(0.5)


class TestQueue:
    def test_duplicate_enqueue_rejected(self):
        queue = ValidationQueue()
        queue.enqueue("e1", "w1", "s1", "k")
        with pytest.raises(ValidationError):
            queue.enqueue("e1", "w1", "s1", "k")

    def test_fifo_and_author_exclusion(self):
        queue = ValidationQueue()
        queue.enqueue("e1", "val1", "s1", "k")
        queue.enqueue("e2", "w1", "s1", "k")
        got = queue.next_task_for("val1")
        assert got is not None and got.example_id == "e2"

    def test_next_task_assigns_and_does_not_repeat(self):
        queue = ValidationQueue()
        queue.enqueue("e1", "w1", "s1", "k")
        queue.enqueue("e2", "w1", "s1", "k")
        first = queue.next_task_for("v1")
        second = queue.next_task_for("v1")
        assert first.example_id == "e1" and second.example_id == "e2"
        assert queue.next_task_for("v1") is None

    def test_full_task_ignored_for_new_validators(self):
        queue = ValidationQueue()
        queue.enqueue("e1", "w1", "s1", "k")
        for v in ("v1", "v2", "v3"):
            assert queue.next_task_for(v).example_id == "e1"
        assert queue.next_task_for("v4") is None

    def test_votes_resolve_through_queue(self):
        queue = ValidationQueue()
        queue.enqueue("e1", "w1", "s1", "k")
        for v in ("v1", "v2", "v3"):
            queue.next_task_for(v)
        queue.cast("e1", "v1", V)
        queue.cast("e1", "v2", I)
        task = queue.cast("e1", "v3", I)
        assert task.resolution is Validity.INVALID
        assert len(task.votes) == 3
        assert task.voters.isdisjoint({task.author})

    def test_cast_on_unknown_task_rejected(self):
        queue = ValidationQueue()
        with pytest.raises(ValidationError):
            queue.cast("missing", "v1", V)

    def test_restore_assignment_is_idempotent(self):
        queue = ValidationQueue()
        queue.enqueue("e1", "w1", "s1", "k")
        queue.restore_assignment("e1", "v1")
        queue.restore_assignment("e1", "v1")
        assert queue.get("e1").assigned == ["v1"]
        queue.cast("e1", "v1", V)

    def test_author_rate_and_flagging(self):
        queue = ValidationQueue()
        for i in range(3):
            queue.enqueue(f"bad{i}", "sloppy", "s1", "k")
            queue.enqueue(f"good{i}", "careful", "s2", "k")
        for eid, verdict in [(f"bad{i}", I) for i in range(3)] + [(f"good{i}", V) for i in range(3)]:
            for v in ("v1", "v2", "v3"):
                queue.restore_assignment(eid, v)
                queue.cast(eid, v, verdict)
        assert queue.author_rate("sloppy") == 1.0
        assert queue.author_rate("careful") == 0.0
        assert queue.author_rate("unknown") is None
        assert queue.flagged_authors() == {"sloppy"}

    @given(
        verdicts=st.lists(st.sampled_from([V, I]), min_size=3, max_size=3),
        order=st.permutations([0, 1, 2]),
    )
    @settings(max_examples=40, deadline=None)
    def test_resolution_ignores_arrival_order(self, verdicts, order):
        def run(sequence):
            task = make_task()
            task.assigned.extend(["v0", "v1", "v2"])
            for i in sequence:
                cast_vote(task, f"v{i}", verdicts[i])
            return task.resolution

        assert run([0, 1, 2]) is run(list(order))
