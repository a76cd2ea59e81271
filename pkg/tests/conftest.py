from __future__ import annotations

from typing import Sequence

import pytest

from agenthive.agents import Behavior, ScriptedBehavior
from agenthive.datasets import PUBMEDQA_LABELS, QuestionInstance
from agenthive.engine import ProtocolConfig, ScriptedBackendConfig

# criterion name -> (status, detail), status one of PASS / FAIL / SKIP;
# filled by test_acceptance.py
ACCEPTANCE_RESULTS: dict[str, tuple[str, str]] = {}


def record_criterion(name: str, passed: bool | None, detail: str) -> None:
    """Store one acceptance outcome; ``None`` marks a check that could not run here."""
    status = "SKIP" if passed is None else ("PASS" if passed else "FAIL")
    ACCEPTANCE_RESULTS[name] = (status, detail)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, (status, detail) in ACCEPTANCE_RESULTS.items():
        terminalreporter.write_line(f"[{status}] {name}: {detail}")


@pytest.fixture
def mcq() -> QuestionInstance:
    return QuestionInstance(
        id="q-llq",
        question=(
            "An 83-year-old woman has two days of left lower quadrant pain with guarding "
            "and leukocytosis. What is the most likely diagnosis?"
        ),
        domain=("A", "B", "C", "D"),
        options={
            "A": "Appendicitis",
            "B": "Colorectal cancer",
            "C": "Colonic diverticulitis",
            "D": "Pseudomembranous colitis",
        },
        gold="C",
    )


@pytest.fixture
def yes_no() -> QuestionInstance:
    return QuestionInstance(
        id="q-ynm",
        question="Do statins reduce postoperative atrial fibrillation?",
        domain=PUBMEDQA_LABELS,
        contexts=("Patients on statins had fewer episodes of atrial fibrillation.",),
        gold="yes",
    )


def fixed(answers: Sequence[str], confidence: float = 0.7, **kw) -> tuple[ScriptedBehavior, ...]:
    return tuple(
        ScriptedBehavior(Behavior.FIXED_ANSWER, answer=a, confidence=confidence, **kw) for a in answers
    )


def scripted_config(behaviors: Sequence[ScriptedBehavior], **kw) -> ProtocolConfig:
    kw.setdefault("n", len(behaviors))
    return ProtocolConfig(backend=ScriptedBackendConfig(tuple(behaviors)), **kw)
