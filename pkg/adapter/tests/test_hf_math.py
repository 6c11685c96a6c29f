"""The span/likelihood math behind the checkpoint-backed bundle, model-free."""

import pytest

from annoloop_adapter.hf import best_span, sum_log_probs, top_spans


def test_sum_log_probs_skips_padding_markers():
    assert sum_log_probs([-0.5, -1.0, float("-inf"), float("nan")]) == -1.5
    assert sum_log_probs([]) == 0.0
    # tiny positive float noise is clamped at the contract boundary
    assert sum_log_probs([1e-12]) == 0.0


def test_best_span_prefers_joint_probability():
    # token 0 is the question, tokens 1..3 map into the passage
    offsets = [None, (0, 4), (5, 9), (10, 14)]
    start = [0.0, 0.1, 0.7, 0.2]
    end = [0.0, 0.05, 0.15, 0.8]
    char_s, char_e, p_s, p_e = best_span(start, end, offsets)
    assert (char_s, char_e) == (5, 14)
    assert p_s == 0.7 and p_e == 0.8


def test_best_span_never_reverses():
    offsets = [(0, 4), (5, 9)]
    start = [0.1, 0.9]
    end = [0.9, 0.1]
    # argmax pair would be start=1, end=0; the constraint forces a forward span
    char_s, char_e, _, _ = best_span(start, end, offsets)
    assert char_s <= char_e
    assert (char_s, char_e) in ((0, 4), (0, 9), (5, 9))


def test_best_span_honours_length_cap():
    offsets = [(i * 2, i * 2 + 1) for i in range(10)]
    start = [1.0] + [0.0] * 9
    end = [0.0] * 9 + [1.0]
    char_s, char_e, _, _ = best_span(start, end, offsets, max_span_tokens=3)
    assert char_e - char_s <= 3 * 2


def test_best_span_with_no_passage_tokens():
    with pytest.raises(ValueError):
        best_span([1.0], [1.0], [None])


def test_top_spans_ranked_and_distinct():
    offsets = [None, (0, 3), (4, 8), (9, 12)]
    start = [0.0, 0.5, 0.3, 0.2]
    end = [0.0, 0.1, 0.5, 0.4]
    spans = top_spans(start, end, offsets, limit=3)
    assert len(spans) == 3
    scores = [s for _, _, s in spans]
    assert scores == sorted(scores, reverse=True)
    assert len({(cs, ce) for cs, ce, _ in spans}) == 3
