"""Agent capability interface and deterministic scripted agents."""

from __future__ import annotations

import abc
import hashlib
import random
from dataclasses import dataclass, fields
from enum import Enum
from typing import Any, Sequence

from .consensus import RoundBallot, ballot_for_round, plurality
from .datasets import QuestionInstance
from .errors import AgentKilled, ConfigInvalid
from .memory_pool import (
    INVALID,
    AgentOutput,
    DebateArgument,
    DebateKind,
    MemoryEntry,
    Phase,
    RoleFinal,
    RoleProposal,
    agent_name,
)

DEFAULT_ROLE = "Medical Expert"
DEFAULT_CONFIDENCE = 0.7

Snapshot = Sequence[MemoryEntry]


def derive_seed(*parts: Any) -> int:
    """Stable 64-bit seed from arbitrary parts (independent of PYTHONHASHSEED)."""
    digest = hashlib.blake2b(repr(parts).encode(), digest_size=8).digest()
    return int.from_bytes(digest, "big")


class Agent(abc.ABC):
    """One autonomous participant.

    Capabilities receive immutable pool snapshots and return payloads; the
    engine does all appending. ``role`` is ``None`` until the final role is
    posted.
    """

    backend = "abstract"

    def __init__(self, agent_id: int) -> None:
        self.id = agent_id
        self.role: str | None = None

    @property
    def name(self) -> str:
        return agent_name(self.id)

    @abc.abstractmethod
    def propose_role(self, question: QuestionInstance, snapshot: Snapshot) -> RoleProposal: ...

    @abc.abstractmethod
    def refine_role(self, snapshot: Snapshot) -> RoleFinal: ...

    @abc.abstractmethod
    def analyze(self, question: QuestionInstance, role: str, snapshot: Snapshot) -> AgentOutput: ...

    @abc.abstractmethod
    def debate(self, snapshot: Snapshot, cycle: int) -> DebateArgument: ...

    @abc.abstractmethod
    def fuse(self, context: Snapshot, k: int) -> AgentOutput: ...

    def __repr__(self) -> str:
        return f"<{type(self).__name__} {self.name} role={self.role!r}>"


class Behavior(str, Enum):
    FIXED_ANSWER = "FixedAnswer"
    MAJORITY_CONVERGING = "MajorityConverging"
    STUBBORN = "Stubborn"
    ORACLE_BIASED = "OracleBiased"


@dataclass(frozen=True)
class ScriptedBehavior:
    """Parameters of a scripted agent.

    ``answer`` pins the initial answer (required for FixedAnswer). Without
    it, the initial answer is the gold label with probability ``p_correct``
    and otherwise a distractor: ``"shared"`` picks the label after gold in
    the domain, so all wrong agents collude on one answer; ``"uniform"``
    draws among the wrong labels. ``switch_prob`` is the chance a
    MajorityConverging agent adopts the previous round's plurality.
    ``fail_at_round`` makes the agent die on its first fusion call at or
    after that round.
    """

    kind: Behavior
    answer: str | None = None
    switch_prob: float = 1.0
    p_correct: float = 1.0
    confidence: float = DEFAULT_CONFIDENCE
    confidence_schedule: tuple[float, ...] = ()
    distractor: str = "shared"
    fail_at_round: int | None = None

    def __post_init__(self) -> None:
        if self.kind is Behavior.FIXED_ANSWER and self.answer is None:
            raise ConfigInvalid("FixedAnswer behavior requires 'answer'")
        for name in ("switch_prob", "p_correct", "confidence"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ConfigInvalid(f"{name}={value} outside [0, 1]")
        if any(not 0.0 <= c <= 1.0 for c in self.confidence_schedule):
            raise ConfigInvalid("confidence_schedule values must lie in [0, 1]")
        if self.distractor not in ("shared", "uniform"):
            raise ConfigInvalid(f"distractor must be 'shared' or 'uniform', not {self.distractor!r}")

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ScriptedBehavior":
        data = dict(data)
        try:
            kind = Behavior(data.pop("behavior", data.pop("kind", None)))
        except ValueError as exc:
            raise ConfigInvalid(f"unknown scripted behavior: {exc}") from None
        known = {f.name for f in fields(cls)} - {"kind"}
        unknown = set(data) - known
        if unknown:
            raise ConfigInvalid(f"unknown scripted-agent keys: {sorted(unknown)}")
        if "confidence_schedule" in data:
            data["confidence_schedule"] = tuple(float(c) for c in data["confidence_schedule"])
        return cls(kind=kind, **data)

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"behavior": self.kind.value}
        for f in fields(self):
            if f.name == "kind":
                continue
            value = getattr(self, f.name)
            if value != f.default:
                out[f.name] = list(value) if isinstance(value, tuple) else value
        return out


class ScriptedAgent(Agent):
    """Agent driven by a :class:`ScriptedBehavior` and a private RNG stream."""

    backend = "scripted"

    def __init__(self, agent_id: int, behavior: ScriptedBehavior, seed: int = 0) -> None:
        super().__init__(agent_id)
        self.behavior = behavior
        self.rng = random.Random(derive_seed(seed, agent_id))
        self._question: QuestionInstance | None = None

    def _confidence(self, k: int) -> float:
        schedule = self.behavior.confidence_schedule
        if schedule:
            return schedule[min(k - 1, len(schedule) - 1)]
        return self.behavior.confidence

    def _output(self, answer: str, k: int, question: QuestionInstance | None = None) -> AgentOutput:
        if question is not None and answer not in question.domain:
            return AgentOutput.invalid(f"{self.name} produced out-of-domain answer {answer!r}")
        if answer == INVALID:
            return AgentOutput.invalid(f"{self.name} has no valid answer")
        return AgentOutput(
            reasoning=f"Scripted {self.behavior.kind.value} agent {self.name} answers {answer}.",
            answer=answer,
            confidence=self._confidence(k),
        )

    def _initial_answer(self, question: QuestionInstance) -> str:
        b = self.behavior
        draw = self.rng.random()
        if b.answer is not None:
            return b.answer
        if question.gold is None:
            return self.rng.choice(question.domain)
        if draw < b.p_correct:
            return question.gold
        if b.distractor == "shared":
            i = question.domain.index(question.gold)
            return question.domain[(i + 1) % len(question.domain)]
        return self.rng.choice([lab for lab in question.domain if lab != question.gold])

    def _own_vote(self, ballot: RoundBallot) -> str:
        for v in ballot.votes:
            if v.agent == self.id:
                return v.answer
        return INVALID

    def propose_role(self, question: QuestionInstance, snapshot: Snapshot) -> RoleProposal:
        return RoleProposal(f"Generalist-{self.id}", "Scripted agent with no specialty preference.")

    def refine_role(self, snapshot: Snapshot) -> RoleFinal:
        for e in snapshot:
            if e.phase is Phase.ROLE_PROPOSAL and e.author == self.name:
                return RoleFinal(e.payload.role, "Identity refinement; scripted roles do not evolve.")
        return RoleFinal(f"Generalist-{self.id}", "Identity refinement; no proposal found.")

    def analyze(self, question: QuestionInstance, role: str, snapshot: Snapshot) -> AgentOutput:
        self._question = question
        return self._output(self._initial_answer(question), 1, question)

    def debate(self, snapshot: Snapshot, cycle: int) -> DebateArgument:
        ballot = ballot_for_round(snapshot, 1)
        mine = self._own_vote(ballot)
        dissenters = sorted(v.agent for v in ballot.votes if v.agent != self.id and v.answer != mine)
        kind = self.behavior.kind
        if kind is Behavior.STUBBORN or (not dissenters and kind is not Behavior.MAJORITY_CONVERGING):
            return DebateArgument(DebateKind.DEFENSE, f"{self.name} maintains answer {mine}.")
        if kind is Behavior.MAJORITY_CONVERGING:
            leader = plurality(ballot)
            if leader is not None and leader != mine:
                return DebateArgument(
                    DebateKind.PROPOSAL, f"{self.name} proposes converging on {leader}."
                )
            if not dissenters:
                return DebateArgument(DebateKind.DEFENSE, f"{self.name} maintains answer {mine}.")
        target = dissenters[0]
        return DebateArgument(
            DebateKind.REBUTTAL,
            f"Addressing {agent_name(target)}: the evidence supports {mine}.",
            target=target,
        )

    def fuse(self, context: Snapshot, k: int) -> AgentOutput:
        b = self.behavior
        if b.fail_at_round is not None and k >= b.fail_at_round:
            raise AgentKilled(f"{self.name} scripted to fail at round {k}")
        ballot = ballot_for_round(context, k - 1)
        prior = self._own_vote(ballot)
        if b.kind is Behavior.FIXED_ANSWER:
            answer = b.answer
        elif b.kind is Behavior.MAJORITY_CONVERGING:
            draw = self.rng.random()
            leader = plurality(ballot)
            answer = leader if (leader is not None and draw < b.switch_prob) else prior
        else:
            answer = prior
        return self._output(answer, k, self._question)


def build_scripted_agents(
    behaviors: Sequence[ScriptedBehavior], n: int, seed: int
) -> list[ScriptedAgent]:
    """Instantiate ``n`` scripted agents; a single behavior is broadcast to all."""
    if len(behaviors) == 1:
        behaviors = list(behaviors) * n
    if len(behaviors) != n:
        raise ConfigInvalid(f"scripted population has {len(behaviors)} entries but n={n}")
    return [ScriptedAgent(i, b, seed) for i, b in enumerate(behaviors)]
