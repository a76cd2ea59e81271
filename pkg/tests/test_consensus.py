import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from agenthive.consensus import (
    RoundBallot,
    agreement_level,
    majority_answer,
    plurality,
    plurality_vote,
    should_debate,
    stable_termination,
    weighted_vote,
)
from agenthive.errors import AllInvalid, NoMajority
from agenthive.memory_pool import INVALID


def ballot(*answers, conf=0.7):
    return RoundBallot.of((a, conf) for a in answers)


def brute_force_vote(pairs):
    """Independent oracle: plain per-candidate sums, then the smallest label among near-maxima."""
    candidates = sorted({a for a, _ in pairs if a != INVALID})
    table = {}
    for cand in candidates:
        total = 0.0
        for a, c in pairs:
            if a == cand:
                total += c
        table[cand] = total
    if not table:
        return None, table
    top = max(table.values())
    for cand in candidates:
        if abs(table[cand] - top) <= 1e-9 * abs(top):
            return cand, table
    raise AssertionError("unreachable")


class TestAgreement:
    def test_unanimity(self):
        assert agreement_level(ballot(*"CCCCC")) == 1.0

    def test_three_of_five(self):
        assert agreement_level(ballot(*"CCCBA")) == pytest.approx(0.6)

    def test_invalid_counts_in_denominator_only(self):
        assert agreement_level(ballot("C", "C", INVALID, "B", "A")) == pytest.approx(0.4)

    def test_all_invalid_is_zero(self):
        assert agreement_level(ballot(INVALID, INVALID)) == 0.0

    def test_empty_ballot(self):
        assert agreement_level(RoundBallot(1, ())) == 0.0


class TestGating:
    @pytest.mark.parametrize(
        "answers, tau, expected",
        [
            ("CCCBA", 0.8, True),    # 0.6 < 0.8
            ("CCCCB", 0.8, False),   # 0.8 is not below 0.8
            ("CCCCC", 0.8, False),
        ],
    )
    def test_should_debate(self, answers, tau, expected):
        assert should_debate(ballot(*answers), tau) is expected

    @pytest.mark.parametrize(
        "prev, curr, expected",
        [(0.0, 0.9, False), (0.9, 0.85, True), (0.85, 0.6, False), (0.8, 0.8, True)],
    )
    def test_stable_termination(self, prev, curr, expected):
        assert stable_termination(prev, curr, 0.8) is expected


class TestMajority:
    def test_supermajority(self):
        assert majority_answer(ballot(*"CCCCB"), 0.8) == "C"

    def test_unanimous_yes(self):
        assert majority_answer(ballot("yes", "yes", "yes"), 0.8) == "yes"

    def test_no_majority(self):
        with pytest.raises(NoMajority):
            majority_answer(ballot(*"AABBC"), 0.8)


class TestWeightedVote:
    def test_single_voter(self):
        answer, scores = weighted_vote(RoundBallot.of([("A", 0.9)]))
        assert answer == "A" and scores == {"A": 0.9}

    def test_confidence_beats_headcount(self):
        answer, scores = weighted_vote(RoundBallot.of([("A", 0.9), ("B", 0.8), ("B", 0.4)]))
        assert answer == "B"
        assert scores["B"] == pytest.approx(1.2)
        assert scores["A"] == pytest.approx(0.9)

    def test_tie_goes_to_smallest_label(self):
        assert weighted_vote(RoundBallot.of([("B", 0.5), ("A", 0.5)]))[0] == "A"

    def test_invalid_never_wins(self):
        answer, scores = weighted_vote(RoundBallot.of([(INVALID, 1.0), ("B", 0.1)]))
        assert answer == "B" and INVALID not in scores

    def test_all_invalid(self):
        with pytest.raises(AllInvalid):
            weighted_vote(ballot(INVALID, INVALID))
        with pytest.raises(AllInvalid):
            plurality_vote(ballot(INVALID))

    def test_zero_confidence_votes_still_count_as_candidates(self):
        assert weighted_vote(RoundBallot.of([("D", 0.0)]))[0] == "D"


def test_plurality_tie_break():
    assert plurality(ballot(*"BBAAC")) == "A"
    assert plurality(ballot(INVALID)) is None


def test_duplicate_agent_ids_rejected():
    from agenthive.consensus import Vote

    with pytest.raises(ValueError):
        RoundBallot(1, (Vote(0, "A", 0.5), Vote(0, "B", 0.5)))


labels = st.sampled_from(["A", "B", "C", "D", "E", INVALID])
confidences = st.floats(min_value=0.0, max_value=1.0, allow_nan=False)
pairs = st.lists(st.tuples(labels, confidences), min_size=1, max_size=9)
grid_pairs = st.lists(
    st.tuples(labels, st.integers(0, 20).map(lambda i: i / 20)), min_size=1, max_size=9
)


@settings(max_examples=300)
@given(st.one_of(pairs, grid_pairs))
def test_weighted_vote_matches_oracle(ps):
    expected, table = brute_force_vote(ps)
    if expected is None:
        with pytest.raises(AllInvalid):
            weighted_vote(RoundBallot.of(ps))
        return
    answer, scores = weighted_vote(RoundBallot.of(ps))
    assert answer == expected
    assert scores.keys() == table.keys()
    for k in table:
        assert abs(scores[k] - table[k]) <= 1e-12


@settings(max_examples=300)
@given(st.one_of(pairs, grid_pairs), st.sampled_from([0.1, 2.0, 10.0]))
def test_argmax_scale_invariance(ps, lam):
    if all(a == INVALID for a, _ in ps):
        return
    # grid confidences produce many exact and near ties (0.1 + 0.2 vs 0.3)
    scaled = [(a, c * lam) for a, c in ps]
    assert weighted_vote(RoundBallot.of(scaled))[0] == weighted_vote(RoundBallot.of(ps))[0]


@given(st.sampled_from("ABCDE"), st.lists(st.floats(0.01, 1.0), min_size=1, max_size=9))
def test_unanimity_absorption(label, confs):
    b = RoundBallot.of((label, c) for c in confs)
    assert weighted_vote(b)[0] == label
    assert majority_answer(b, 0.8) == label
    assert agreement_level(b) == 1.0


@given(st.lists(st.sampled_from("ABCD"), min_size=1, max_size=9))
def test_equal_confidence_vote_agrees_with_strict_plurality(answers):
    b = ballot(*answers, conf=0.5)
    counts = sorted((answers.count(a) for a in set(answers)), reverse=True)
    if len(counts) == 1 or counts[0] > counts[1]:
        assert weighted_vote(b)[0] == plurality(b)


@given(pairs)
def test_agreement_bounds(ps):
    b = RoundBallot.of(ps)
    level = agreement_level(b)
    assert 0.0 <= level <= 1.0
    answers = [a for a, _ in ps]
    assert (level == 1.0) == (len(set(answers)) == 1 and answers[0] != INVALID)


@given(pairs, st.sampled_from([0.6, 0.8, 1.0]))
def test_decentralized_gating_is_consistent(ps, tau):
    b = RoundBallot.of(ps)
    assert len({should_debate(b, tau) for _ in range(len(ps))}) == 1
