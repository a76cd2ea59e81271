"""Shared, append-only memory pool.

The pool is a passive log: it orders, timestamps and stores entries, and
hands out immutable snapshots. It makes no protocol decisions.
"""

from __future__ import annotations

import functools
import json
import threading
from dataclasses import dataclass
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
from typing import Any, Iterable, Union

from .datasets import QuestionInstance
from .errors import AppendAfterReport, CorruptTrace, PhasePayloadMismatch

INVALID = "INVALID"
SYSTEM = "system"
REPORTER = "reporter"


class Phase(str, Enum):
    QUERY_INIT = "QueryInit"
    ROLE_PROPOSAL = "RoleProposal"
    ROLE_FINAL = "RoleFinal"
    ANALYSIS = "Analysis"
    DEBATE = "Debate"
    FUSION = "Fusion"
    REPORT = "Report"


PHASE_ORDER: tuple[Phase, ...] = tuple(Phase)


class DebateKind(str, Enum):
    REBUTTAL = "Rebuttal"
    DEFENSE = "Defense"
    PROPOSAL = "Proposal"


class ResolutionMode(str, Enum):
    CONFIRMATORY = "Confirmatory"
    WEIGHTED_VOTE = "WeightedVote"
    # used only when confidence weighting is ablated
    PLURALITY = "Plurality"


def agent_name(agent_id: int) -> str:
    return f"A{agent_id}"


# authors repeat constantly and parsing them dominated simulation profiles
@functools.lru_cache(maxsize=4096)
def agent_id_of(author: str) -> int | None:
    if author.startswith("A") and author[1:].isdigit():
        return int(author[1:])
    return None


@dataclass(frozen=True)
class RoleProposal:
    role: str
    reasoning: str


@dataclass(frozen=True)
class RoleFinal:
    role: str
    rationale: str


@dataclass(frozen=True)
class AgentOutput:
    """Reasoning trace, answer label and self-assessed confidence."""

    reasoning: str
    answer: str
    confidence: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence {self.confidence!r} outside [0, 1]")

    @classmethod
    def invalid(cls, reasoning: str = "") -> "AgentOutput":
        return cls(reasoning=reasoning, answer=INVALID, confidence=0.0)


@dataclass(frozen=True)
class DebateArgument:
    kind: DebateKind
    argument: str
    target: int | None = None

    def __post_init__(self) -> None:
        if (self.kind is DebateKind.REBUTTAL) != (self.target is not None):
            raise ValueError("a Rebuttal needs a target; other kinds must not have one")


@dataclass(frozen=True)
class Report:
    answer: str
    mode: ResolutionMode
    trace: str


Payload = Union[QuestionInstance, RoleProposal, RoleFinal, AgentOutput, DebateArgument, Report]

_PAYLOAD_TYPES: dict[Phase, type] = {
    Phase.QUERY_INIT: QuestionInstance,
    Phase.ROLE_PROPOSAL: RoleProposal,
    Phase.ROLE_FINAL: RoleFinal,
    Phase.ANALYSIS: AgentOutput,
    Phase.DEBATE: DebateArgument,
    Phase.FUSION: AgentOutput,
    Phase.REPORT: Report,
}


@dataclass(frozen=True)
class MemoryEntry:
    seq: int
    timestamp: datetime
    author: str
    phase: Phase
    round: int
    payload: Payload

    def to_record(self) -> dict[str, Any]:
        return {
            "seq": self.seq,
            "timestamp": self.timestamp.isoformat(),
            "author": self.author,
            "phase": self.phase.value,
            "round": self.round,
            "payload": payload_to_record(self.payload),
        }

    @classmethod
    def from_record(cls, rec: dict[str, Any]) -> "MemoryEntry":
        phase = Phase(rec["phase"])
        return cls(
            seq=int(rec["seq"]),
            timestamp=datetime.fromisoformat(rec["timestamp"]),
            author=str(rec["author"]),
            phase=phase,
            round=int(rec["round"]),
            payload=payload_from_record(phase, rec["payload"]),
        )

    def same_content(self, other: "MemoryEntry") -> bool:
        """Equality ignoring the timestamp."""
        return (self.seq, self.author, self.phase, self.round, self.payload) == (
            other.seq, other.author, other.phase, other.round, other.payload,
        )


def payload_to_record(payload: Payload) -> dict[str, Any]:
    if isinstance(payload, QuestionInstance):
        return payload.to_record()
    if isinstance(payload, DebateArgument):
        return {"kind": payload.kind.value, "target": payload.target, "argument": payload.argument}
    if isinstance(payload, Report):
        return {"answer": payload.answer, "mode": payload.mode.value, "trace": payload.trace}
    return dict(payload.__dict__)


def payload_from_record(phase: Phase, rec: dict[str, Any]) -> Payload:
    kind = _PAYLOAD_TYPES[phase]
    if kind is QuestionInstance:
        return QuestionInstance.from_record(rec)
    if kind is DebateArgument:
        return DebateArgument(DebateKind(rec["kind"]), rec["argument"], rec.get("target"))
    if kind is Report:
        return Report(rec["answer"], ResolutionMode(rec["mode"]), rec["trace"])
    if kind is AgentOutput:
        return AgentOutput(rec["reasoning"], rec["answer"], float(rec["confidence"]))
    return kind(**rec)


class MemoryPool:
    """Append-only, totally ordered log of typed entries.

    ``seq`` is assigned under a lock and is the authoritative order;
    timestamps are informational. Appending a ``Report`` seals the pool.
    """

    def __init__(self) -> None:
        self._entries: list[MemoryEntry] = []
        self._lock = threading.Lock()
        self._sealed = False

    def __len__(self) -> int:
        return len(self._entries)

    @property
    def sealed(self) -> bool:
        return self._sealed

    def append(self, payload: Payload, author: str, phase: Phase, round: int = 0) -> int:
        expected = _PAYLOAD_TYPES[phase]
        if not isinstance(payload, expected):
            raise PhasePayloadMismatch(
                f"{phase.value} expects {expected.__name__}, got {type(payload).__name__}"
            )
        with self._lock:
            if self._sealed:
                raise AppendAfterReport("pool already holds a Report entry")
            if not self._entries and phase is not Phase.QUERY_INIT:
                raise PhasePayloadMismatch("entry 0 must be the QueryInit entry")
            seq = len(self._entries)
            self._entries.append(
                MemoryEntry(seq, datetime.now(timezone.utc), author, phase, round, payload)
            )
            if phase is Phase.REPORT:
                self._sealed = True
        return seq

    def read_all(self) -> tuple[MemoryEntry, ...]:
        # list->tuple copy is atomic under the GIL; no lock needed for readers
        return tuple(self._entries)

    def read_phase_round(self, phase: Phase, round: int) -> tuple[MemoryEntry, ...]:
        return tuple(e for e in self.read_all() if e.phase is phase and e.round == round)

    @property
    def question(self) -> QuestionInstance:
        return self._entries[0].payload  # type: ignore[return-value]

    # -- trace file ---------------------------------------------------------

    def dumps(self) -> str:
        return "".join(json.dumps(e.to_record(), ensure_ascii=False) + "\n" for e in self.read_all())

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.dumps(), encoding="utf-8")

    @classmethod
    def from_entries(cls, entries: Iterable[MemoryEntry]) -> "MemoryPool":
        pool = cls()
        for expected_seq, entry in enumerate(entries):
            if entry.seq != expected_seq:
                raise CorruptTrace(
                    f"expected seq {expected_seq}, found {entry.seq}",
                    expected_seq - 1 if expected_seq else None,
                )
            if pool._sealed:
                raise CorruptTrace("entry after Report", entry.seq - 1)
            pool._entries.append(entry)
            pool._sealed = entry.phase is Phase.REPORT
        return pool

    @classmethod
    def loads(cls, text: str) -> "MemoryPool":
        entries: list[MemoryEntry] = []
        # split on "\n" only: payload text may hold other Unicode line breaks
        for lineno, line in enumerate(text.split("\n"), start=1):
            if not line.strip():
                continue
            try:
                entries.append(MemoryEntry.from_record(json.loads(line)))
            except (ValueError, KeyError, TypeError) as exc:
                last = entries[-1].seq if entries else None
                raise CorruptTrace(
                    f"line {lineno} unreadable ({exc}); last valid seq: {last}", last
                ) from None
        return cls.from_entries(entries)

    @classmethod
    def load(cls, path: str | Path) -> "MemoryPool":
        return cls.loads(Path(path).read_text(encoding="utf-8"))
