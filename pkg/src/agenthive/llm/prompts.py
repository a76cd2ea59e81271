"""Prompt templates, one editable text file per capability.

A template file holds a ``[system]`` and a ``[user]`` section. Placeholders
use ``str.format`` syntax; literal braces are written ``{{``/``}}``.
"""

from __future__ import annotations

import string
from dataclasses import dataclass
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Iterable

from ..datasets import QuestionInstance
from ..memory_pool import AgentOutput, DebateArgument, MemoryEntry, Phase, RoleFinal, RoleProposal


class Capability(str, Enum):
    PROPOSE_ROLE = "propose_role"
    REFINE_ROLE = "refine_role"
    ANALYZE = "analyze"
    DEBATE = "debate"
    FUSE = "fuse"
    REPORTER_TRACE = "reporter_trace"


COT_STYLE = "Think step by step: write out your clinical reasoning in full before giving your answer."
DIRECT_STYLE = "Do not write out step-by-step reasoning; state your answer directly with at most one sentence of justification."


@dataclass(frozen=True)
class PromptTemplate:
    capability: Capability
    system: str
    user: str

    @property
    def fields(self) -> set[str]:
        names = set()
        for part in (self.system, self.user):
            names.update(f for _, f, _, _ in string.Formatter().parse(part) if f)
        return names

    def render(self, **values: object) -> list[dict[str, str]]:
        """Bind every placeholder and return chat messages.

        Raises:
            KeyError: a placeholder has no value.
        """
        missing = self.fields - set(values)
        if missing:
            raise KeyError(f"unbound placeholders for {self.capability.value}: {sorted(missing)}")
        return [
            {"role": "system", "content": self.system.format(**values).strip()},
            {"role": "user", "content": self.user.format(**values).strip()},
        ]

    @classmethod
    def parse(cls, capability: Capability, text: str) -> "PromptTemplate":
        sections: dict[str, list[str]] = {}
        current = None
        for line in text.splitlines():
            header = line.strip().lower()
            if header in ("[system]", "[user]"):
                current = header[1:-1]
                sections[current] = []
            elif current is not None:
                sections[current].append(line)
        if "user" not in sections:
            raise ValueError(f"template {capability.value} has no [user] section")
        return cls(capability, "\n".join(sections.get("system", [])), "\n".join(sections["user"]))


def load_templates(directory: str | Path | None = None) -> dict[Capability, PromptTemplate]:
    """Load all capability templates, from ``directory`` or the bundled defaults.

    Files missing from ``directory`` fall back to the bundled version.
    """
    bundled = resources.files("agenthive.llm") / "templates"
    out = {}
    for cap in Capability:
        name = f"{cap.value}.txt"
        override = Path(directory) / name if directory is not None else None
        if override is not None and override.is_file():
            text = override.read_text(encoding="utf-8")
        else:
            text = (bundled / name).read_text(encoding="utf-8")
        out[cap] = PromptTemplate.parse(cap, text)
    return out


def format_options(question: QuestionInstance) -> str:
    if question.options:
        return "Options:\n" + "\n".join(f"({lab}) {question.options[lab]}" for lab in question.domain)
    return "Possible answers: " + " / ".join(question.domain)


def format_context(question: QuestionInstance, include: bool = True) -> str:
    if not include or not question.contexts:
        return ""
    return "\nContext:\n" + "\n\n".join(question.contexts) + "\n"


def format_entry(entry: MemoryEntry) -> str:
    """Render one pool entry for a prompt; labels and text are quoted verbatim."""
    p = entry.payload
    head = f"[{entry.author} | {entry.phase.value}"
    if isinstance(p, AgentOutput):
        body = f"{head} k={entry.round}] ANSWER: {p.answer} | CONFIDENCE: {p.confidence:g}\n{p.reasoning}"
    elif isinstance(p, DebateArgument):
        target = f" -> A{p.target}" if p.target is not None else ""
        body = f"{head} cycle {entry.round} | {p.kind.value}{target}] {p.argument}"
    elif isinstance(p, RoleProposal):
        body = f"{head}] Role: {p.role}\nReasoning: {p.reasoning}"
    elif isinstance(p, RoleFinal):
        body = f"{head}] Role: {p.role}\nRationale: {p.rationale}"
    else:
        return ""
    return body.rstrip()


def format_entries(entries: Iterable[MemoryEntry]) -> str:
    rendered = [s for s in (format_entry(e) for e in entries) if s]
    return "\n\n".join(rendered) if rendered else "(none)"


def style_text(cot: bool) -> str:
    return COT_STYLE if cot else DIRECT_STYLE


def entries_of(entries: Iterable[MemoryEntry], *phases: Phase) -> list[MemoryEntry]:
    return [e for e in entries if e.phase in phases]
