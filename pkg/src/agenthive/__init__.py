"""Coordinator-free multi-agent consensus over a shared append-only memory pool."""

from .agents import Agent, Behavior, ScriptedAgent, ScriptedBehavior
from .consensus import (
    RoundBallot,
    Vote,
    agreement_level,
    majority_answer,
    should_debate,
    stable_termination,
    weighted_vote,
)
from .datasets import QuestionInstance, load_medqa, load_pubmedqa
from .engine import (
    HiveEngine,
    LLMBackendConfig,
    ProtocolConfig,
    RunResult,
    ScriptedBackendConfig,
    run,
)
from .memory_pool import INVALID, MemoryEntry, MemoryPool, Phase, ResolutionMode
from .metrics import BenchReport, score

__version__ = "0.1.0"

__all__ = [
    "INVALID",
    "Agent",
    "Behavior",
    "BenchReport",
    "HiveEngine",
    "LLMBackendConfig",
    "MemoryEntry",
    "MemoryPool",
    "Phase",
    "ProtocolConfig",
    "QuestionInstance",
    "ResolutionMode",
    "RoundBallot",
    "RunResult",
    "ScriptedAgent",
    "ScriptedBackendConfig",
    "ScriptedBehavior",
    "Vote",
    "agreement_level",
    "load_medqa",
    "load_pubmedqa",
    "majority_answer",
    "run",
    "score",
    "should_debate",
    "stable_termination",
    "weighted_vote",
]
