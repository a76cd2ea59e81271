"""Decision arithmetic over a single round's ballot.

Every function here is pure, so any agent evaluating the same snapshot
reaches the same verdict without a coordinator.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, NamedTuple

from .errors import AllInvalid, NoMajority
from .memory_pool import INVALID, MemoryEntry, Phase, agent_id_of


class Vote(NamedTuple):
    agent: int
    answer: str
    confidence: float


@dataclass(frozen=True)
class RoundBallot:
    """One answer per participating agent for round ``k``.

    ``n`` defaults to the number of votes. INVALID answers count towards
    ``n`` but never towards any tally.
    """

    round: int
    votes: tuple[Vote, ...]

    def __post_init__(self) -> None:
        ids = [v.agent for v in self.votes]
        if len(set(ids)) != len(ids):
            raise ValueError(f"duplicate agent ids in ballot: {ids}")

    @property
    def n(self) -> int:
        return len(self.votes)

    @classmethod
    def of(cls, pairs: Iterable[tuple[str, float]], round: int = 1) -> "RoundBallot":
        """Build a ballot from ``(answer, confidence)`` pairs, ids assigned in order."""
        return cls(round, tuple(Vote(i, a, float(c)) for i, (a, c) in enumerate(pairs)))

    @classmethod
    def from_entries(cls, entries: Iterable[MemoryEntry], round: int) -> "RoundBallot":
        votes = tuple(
            Vote(agent_id_of(e.author), e.payload.answer, e.payload.confidence)  # type: ignore[union-attr]
            for e in entries
        )
        return cls(round, votes)


# Every agent in a barrier step reads the same snapshot tuple, so the last ballot
# is kept by identity. Tuples are immutable, and holding the reference keeps the
# id from being reused.
_last_ballot: tuple[tuple[MemoryEntry, ...], int, RoundBallot] | None = None


def ballot_for_round(entries: Iterable[MemoryEntry], round: int) -> RoundBallot:
    """Ballot of round ``round`` from a snapshot (Analysis at k=1, Fusion after)."""
    global _last_ballot
    cached = _last_ballot
    if cached is not None and cached[0] is entries and cached[1] == round:
        return cached[2]
    phase = Phase.ANALYSIS if round == 1 else Phase.FUSION
    ballot = RoundBallot.from_entries(
        (e for e in entries if e.phase is phase and e.round == round), round
    )
    if isinstance(entries, tuple):
        _last_ballot = (entries, round, ballot)
    return ballot


def tally(ballot: RoundBallot) -> Counter[str]:
    return Counter(v.answer for v in ballot.votes if v.answer != INVALID)


def plurality(ballot: RoundBallot) -> str | None:
    """Most frequent valid answer, lexicographically smallest on ties."""
    counts = tally(ballot)
    if not counts:
        return None
    return min(counts, key=lambda a: (-counts[a], a))


def agreement_level(ballot: RoundBallot) -> float:
    if ballot.n == 0:
        return 0.0
    counts = tally(ballot)
    return max(counts.values(), default=0) / ballot.n


def should_debate(ballot: RoundBallot, tau_agree: float) -> bool:
    # strict: agreement exactly at the threshold skips debate
    return agreement_level(ballot) < tau_agree


def stable_termination(prev_agreement: float, curr_agreement: float, tau_agree: float) -> bool:
    return prev_agreement >= tau_agree and curr_agreement >= tau_agree


def majority_answer(ballot: RoundBallot, tau_agree: float) -> str:
    """Supermajority answer of a ballot that already meets the threshold."""
    if agreement_level(ballot) < tau_agree or not tally(ballot):
        raise NoMajority(
            f"agreement {agreement_level(ballot):.3f} is below tau_agree={tau_agree}"
        )
    return plurality(ballot)  # type: ignore[return-value]


# scores this close (relative) are ties; survives rescaling and summation order
TIE_REL_TOL = 1e-9


def weighted_scores(ballot: RoundBallot) -> dict[str, float]:
    grouped: dict[str, list[float]] = {}
    for v in ballot.votes:
        if v.answer != INVALID:
            grouped.setdefault(v.answer, []).append(v.confidence)
    # fsum is correctly rounded, so the score does not depend on agent order
    return {a: math.fsum(cs) for a, cs in grouped.items()}


def weighted_vote(ballot: RoundBallot) -> tuple[str, dict[str, float]]:
    """Confidence-weighted vote.

    Sums each valid answer's confidences and returns the best-scoring answer
    together with the score table. Only answers somebody actually gave are
    candidates. Scores within ``TIE_REL_TOL`` of the top score tie, and ties
    go to the lexicographically smallest label.

    Raises:
        AllInvalid: no agent produced a valid answer.
    """
    scores = weighted_scores(ballot)
    if not scores:
        raise AllInvalid("no valid answers to vote on")
    top = max(scores.values())
    best = min(a for a, s in scores.items() if math.isclose(s, top, rel_tol=TIE_REL_TOL))
    return best, scores


def plurality_vote(ballot: RoundBallot) -> str:
    winner = plurality(ballot)
    if winner is None:
        raise AllInvalid("no valid answers to vote on")
    return winner
