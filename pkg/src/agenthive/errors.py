"""Exception hierarchy shared across the package."""

from __future__ import annotations


class HiveError(Exception):
    """Base class for every error raised by agenthive."""


# memory pool
class PoolError(HiveError):
    pass


class AppendAfterReport(PoolError):
    """The pool already holds a Report entry and is sealed."""


class PhasePayloadMismatch(PoolError):
    pass


class CorruptTrace(PoolError):
    """A trace file could not be parsed.

    ``last_valid_seq`` is the seq of the last entry that loaded cleanly, or
    ``None`` when not even the first line parsed.
    """

    def __init__(self, message: str, last_valid_seq: int | None = None) -> None:
        super().__init__(message)
        self.last_valid_seq = last_valid_seq


# consensus
class ConsensusError(HiveError):
    pass


class NoMajority(ConsensusError):
    pass


class AllInvalid(ConsensusError):
    pass


# protocol
class ProtocolError(HiveError):
    pass


class ConfigInvalid(ProtocolError):
    pass


class InconsistentDetection(ProtocolError):
    pass


class RoundIncomplete(ProtocolError):
    pass


class BackendFatal(ProtocolError):
    """Too many agents failed permanently for the run to continue."""


# agent backends
class BackendFailure(HiveError):
    """An agent backend failed permanently; the agent drops out of the run."""


class AgentKilled(BackendFailure):
    """Injected failure used by scripted agents to exercise fault handling."""


class Timeout(BackendFailure):
    pass


class TransportError(BackendFailure):
    pass


class HttpStatusError(BackendFailure):
    def __init__(self, status_code: int, body: str = "") -> None:
        super().__init__(f"HTTP {status_code}: {body[:200]}")
        self.status_code = status_code
        self.body = body


class RetriesExhausted(BackendFailure):
    def __init__(self, attempts: int, last_error: Exception | None) -> None:
        super().__init__(f"gave up after {attempts} attempt(s): {last_error!r}")
        self.attempts = attempts
        self.last_error = last_error


# output parsing
class ParseError(HiveError):
    pass


class ParseIncomplete(ParseError):
    pass


class AnswerOutOfDomain(ParseError):
    def __init__(self, label: str, domain: tuple[str, ...]) -> None:
        super().__init__(f"answer {label!r} not in {list(domain)}")
        self.label = label
        self.domain = domain


class UnknownKind(ParseError):
    pass


class UnknownTarget(ParseError):
    pass


# datasets and scoring
class DatasetError(HiveError):
    pass


class MalformedRecord(DatasetError):
    def __init__(self, line: int, reason: str) -> None:
        super().__init__(f"line {line}: {reason}")
        self.line = line
        self.reason = reason


class UnknownLabel(DatasetError):
    def __init__(self, label: str, line: int | None = None) -> None:
        where = f"line {line}: " if line is not None else ""
        super().__init__(f"{where}unknown label {label!r}")
        self.label = label
        self.line = line


class EmptyInput(DatasetError):
    pass
