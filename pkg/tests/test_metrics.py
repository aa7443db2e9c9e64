import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from simultrans.metrics import (
    BleuReport,
    SweepRow,
    average_lagging,
    average_proportion,
    consecutive_wait,
    corpus_bleu,
    corpus_latency,
    sweep_from_csv,
    sweep_to_csv,
)


def waitk_g(k, n, m):
    """Read counts of an ideal wait-k schedule emitting m words over n."""
    return [min(k + j - 1, n) for j in range(1, m + 1)]


class TestAverageLagging:
    def test_wait3_is_exactly_three(self):
        g = waitk_g(3, 6, 6)
        assert g == [3, 4, 5, 6, 6, 6]
        assert average_lagging(g, 6) == 3.0

    def test_waitk_identity_across_lengths(self):
        for k in (1, 2, 3, 5):
            for n in range(k + 1, 21):
                assert average_lagging(waitk_g(k, n, n), n) == pytest.approx(k)

    def test_full_sentence_equals_source_length(self):
        assert average_lagging([7] * 5, 7) == 7.0

    def test_single_word_source(self):
        assert average_lagging([1], 1) == 1.0

    def test_unreached_source_falls_back_to_last_word(self):
        # Truncated trace: reads stop at 3 of 5; tau = len(g).
        g = [2, 3, 3]
        expect = ((2 - 0) + (3 - 1 / (3 / 5)) + (3 - 2 / (3 / 5))) / 3
        assert average_lagging(g, 5) == pytest.approx(expect)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            average_lagging([], 4)


class TestAverageProportion:
    def test_full_sentence_is_one(self):
        assert average_proportion([6] * 4, 6) == 1.0

    def test_wait1_two_by_two(self):
        assert average_proportion([1, 2], 2) == 0.75


class TestConsecutiveWait:
    def test_wait1_alternation(self):
        assert consecutive_wait([1, 2, 3, 4]) == 1.0

    def test_full_sentence_single_gap(self):
        assert consecutive_wait([5, 5, 5]) == 5.0

    def test_wait5_long_input(self):
        g = waitk_g(5, 12, 12)
        # Gaps: 5, then 1s while reading, then write-only tail.
        assert consecutive_wait(g) == pytest.approx((5 + 7) / 8)

    def test_zero_read_trace_reports_zero(self):
        assert consecutive_wait([0, 0]) == 0.0


@given(
    st.integers(1, 20).flatmap(
        lambda n: st.tuples(
            st.just(n),
            st.lists(st.integers(1, n), min_size=1, max_size=25).map(sorted),
        )
    )
)
@settings(max_examples=200, deadline=None)
def test_metric_ranges(case):
    n, g = case
    assert average_lagging(g, n) <= n + 1e-12
    ap = average_proportion(g, n)
    assert 0.0 < ap <= 1.0
    cw = consecutive_wait(g)
    assert cw == 0.0 or cw >= 1.0


class TestCorpusBleu:
    def test_identical_corpora_score_100(self):
        corpus = [["a", "b", "c"], ["d", "e", "f", "g"], ["h"]]
        rep = corpus_bleu(corpus, corpus)
        assert rep.bleu == 100.0
        assert rep.brevity_penalty == 1.0

    def test_no_overlap_scores_zero(self):
        rep = corpus_bleu([["a", "b"]], [["c", "d"]])
        assert rep.bleu == 0.0

    def test_hand_computed_example(self):
        rep = corpus_bleu([["a", "b", "c", "d"]], [["a", "b", "c", "e"]])
        assert rep.precisions[0] == pytest.approx(3 / 4)
        assert rep.precisions[1] == pytest.approx(2 / 3)
        assert rep.precisions[2] == pytest.approx(1 / 2)
        assert rep.precisions[3] == 0.0
        # Hand-composed: p1 raw, orders 2..4 add-one smoothed, BP = 1.
        expect = 100.0 * math.exp(
            (
                math.log(3 / 4)
                + math.log((2 + 1) / (3 + 1))
                + math.log((1 + 1) / (2 + 1))
                + math.log((0 + 1) / (1 + 1))
            )
            / 4
        )
        assert rep.bleu == pytest.approx(expect)

    def test_brevity_penalty_applies_to_short_hypotheses(self):
        rep = corpus_bleu([["a", "b"]], [["a", "b", "c", "d"]])
        assert rep.brevity_penalty == pytest.approx(math.exp(1 - 4 / 2))

    def test_empty_corpus_rejected(self):
        with pytest.raises(ValueError):
            corpus_bleu([], [])

    def test_size_mismatch_rejected(self):
        with pytest.raises(ValueError):
            corpus_bleu([["a"]], [["a"], ["b"]])

    def test_works_on_token_ids(self):
        rep = corpus_bleu([[1, 2, 3]], [[1, 2, 3]])
        assert rep.bleu == 100.0


class TestCorpusLatency:
    def test_aggregates_means(self):
        gs = [[3, 4, 5, 6, 6, 6], [2] * 3]
        rep = corpus_latency(gs, [6, 2])
        assert rep.al == pytest.approx((3.0 + 2.0) / 2)
        assert rep.n_sentences == 2

    def test_flags_unreached(self):
        rep = corpus_latency([[1, 2]], [5])
        assert rep.n_unreached == 1


class TestSweepCsv:
    def test_round_trip(self):
        rows = [
            SweepRow(t=-2.0, al=1.25, ap=0.5, cw=1.0, bleu=93.1234),
            SweepRow(t=0.0, al=3.0, ap=0.75, cw=2.5, bleu=99.0),
        ]
        text = sweep_to_csv(rows)
        assert text.splitlines()[0] == "t,AL,AP,CW,BLEU"
        parsed = sweep_from_csv(text)
        assert sweep_to_csv(parsed) == text

    def test_bad_header_rejected(self):
        with pytest.raises(ValueError):
            sweep_from_csv("a,b\n1,2\n")
