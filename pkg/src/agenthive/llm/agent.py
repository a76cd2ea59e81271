"""Agent and reporter backed by a chat-completion endpoint."""

from __future__ import annotations

import logging
from typing import Callable, Protocol, TypeVar

from ..agents import DEFAULT_ROLE, Agent, Snapshot
from ..datasets import QuestionInstance
from ..errors import ParseError
from ..memory_pool import (
    AgentOutput,
    DebateArgument,
    DebateKind,
    MemoryEntry,
    Phase,
    ResolutionMode,
    RoleFinal,
    RoleProposal,
    agent_id_of,
    agent_name,
)
from .parsing import parse_agent_output, parse_debate_output, parse_role
from .prompts import (
    Capability,
    PromptTemplate,
    entries_of,
    format_context,
    format_entries,
    format_options,
    style_text,
)

logger = logging.getLogger(__name__)

T = TypeVar("T")

REMINDERS = {
    Capability.PROPOSE_ROLE: "Reply again using exactly two lines: 'ROLE: <specialty>' then 'REASONING: <text>'.",
    Capability.REFINE_ROLE: "Reply again using exactly two lines: 'ROLE: <specialty>' then 'RATIONALE: <text>'.",
    Capability.ANALYZE: (
        "Your reply could not be read ({error}). End your reply with the two lines "
        "'ANSWER: <one of {domain}>' and 'CONFIDENCE: <number between 0 and 1>'."
    ),
    Capability.DEBATE: (
        "Your reply could not be read ({error}). Start with 'KIND: Rebuttal', 'KIND: Defense' "
        "or 'KIND: Proposal'; a Rebuttal needs a 'TARGET: <peer id>' line naming one of {peers}."
    ),
}
REMINDERS[Capability.FUSE] = REMINDERS[Capability.ANALYZE]


class Completer(Protocol):
    def complete(self, messages: list[dict[str, str]]) -> str: ...


class LLMAgent(Agent):
    """Agent whose capabilities are prompts to a chat model.

    A reply that cannot be parsed gets one re-prompt with a stricter format
    reminder. If that also fails, answers become INVALID (confidence 0) and
    other capabilities fall back to a neutral payload. Transport failures
    propagate as :class:`~agenthive.errors.BackendFailure`.
    """

    backend = "llm"

    def __init__(
        self,
        agent_id: int,
        client: Completer,
        templates: dict[Capability, PromptTemplate],
        *,
        cot: bool = True,
        include_context: bool = True,
    ) -> None:
        super().__init__(agent_id)
        self.client = client
        self.templates = templates
        self.cot = cot
        self.include_context = include_context
        self._question: QuestionInstance | None = None

    def _base(self, question: QuestionInstance) -> dict[str, object]:
        return {
            "self_name": self.name,
            "question": question.question,
            "options": format_options(question),
            "context": format_context(question, self.include_context),
            "answer_domain": ", ".join(question.domain),
            "style": style_text(self.cot),
            "role": self.role or DEFAULT_ROLE,
        }

    def _ask(
        self,
        capability: Capability,
        values: dict[str, object],
        parser: Callable[[str], T],
        **hints: object,
    ) -> T:
        messages = self.templates[capability].render(**values)
        raw = self.client.complete(messages)
        try:
            return parser(raw)
        except ParseError as exc:
            logger.info("%s: unparseable %s reply (%s); re-prompting", self.name, capability.value, exc)
            reminder = REMINDERS[capability].format(error=exc, **hints)
            retry = messages + [
                {"role": "assistant", "content": raw},
                {"role": "user", "content": reminder},
            ]
            return parser(self.client.complete(retry))

    def propose_role(self, question: QuestionInstance, snapshot: Snapshot) -> RoleProposal:
        self._question = question
        try:
            role, why = self._ask(Capability.PROPOSE_ROLE, self._base(question), parse_role)
        except ParseError as exc:
            return RoleProposal(DEFAULT_ROLE, f"unparseable role proposal: {exc}")
        return RoleProposal(role, why)

    def refine_role(self, snapshot: Snapshot) -> RoleFinal:
        question = self._question_from(snapshot)
        proposals = entries_of(snapshot, Phase.ROLE_PROPOSAL)
        own = next((e.payload.role for e in proposals if e.author == self.name), DEFAULT_ROLE)
        values = {**self._base(question), "role": own, "peer_entries": format_entries(proposals)}
        try:
            role, why = self._ask(Capability.REFINE_ROLE, values, parse_role)
        except ParseError as exc:
            return RoleFinal(own, f"kept proposed role; refinement unparseable: {exc}")
        return RoleFinal(role, why)

    def analyze(self, question: QuestionInstance, role: str, snapshot: Snapshot) -> AgentOutput:
        self._question = question
        # peers appear only as attributed entries; the persona is this agent's own role
        peers = [e for e in entries_of(snapshot, Phase.ROLE_FINAL) if e.author != self.name]
        values = {**self._base(question), "role": role, "peer_entries": format_entries(peers)}
        return self._answer(Capability.ANALYZE, values, question)

    def debate(self, snapshot: Snapshot, cycle: int) -> DebateArgument:
        question = self._question_from(snapshot)
        record = entries_of(snapshot, Phase.ANALYSIS, Phase.DEBATE)
        peer_ids = sorted({
            i for i in (agent_id_of(e.author) for e in record if e.phase is Phase.ANALYSIS)
            if i is not None and i != self.id
        })
        peers = ", ".join(agent_name(i) for i in peer_ids) or "(none)"
        values = {
            **self._base(question),
            "round": cycle,
            "peer_entries": format_entries(record),
            "peer_ids": peers,
        }
        try:
            return self._ask(
                Capability.DEBATE, values, lambda raw: parse_debate_output(raw, peer_ids), peers=peers
            )
        except ParseError as exc:
            return DebateArgument(DebateKind.DEFENSE, f"{self.name} restates its analysis ({exc}).")

    def fuse(self, context: Snapshot, k: int) -> AgentOutput:
        question = self._question_from(context)
        values = {**self._base(question), "round": k, "peer_entries": format_entries(context)}
        return self._answer(Capability.FUSE, values, question)

    def _answer(
        self, capability: Capability, values: dict[str, object], question: QuestionInstance
    ) -> AgentOutput:
        domain = question.domain
        try:
            return self._ask(
                capability,
                values,
                lambda raw: parse_agent_output(raw, domain),
                domain=", ".join(domain),
            )
        except ParseError as exc:
            logger.warning("%s: %s reply unparseable after re-prompt: %s", self.name, capability.value, exc)
            return AgentOutput.invalid(f"unparseable output: {exc}")

    def _question_from(self, snapshot: Snapshot) -> QuestionInstance:
        for e in snapshot:
            if e.phase is Phase.QUERY_INIT:
                self._question = e.payload  # type: ignore[assignment]
                break
        if self._question is None:
            raise RuntimeError(f"{self.name} has not seen the question yet")
        return self._question


class LLMReporter:
    """Summarizes a finished pool into a reasoning trace with one model call."""

    def __init__(self, client: Completer, templates: dict[Capability, PromptTemplate]) -> None:
        self.client = client
        self.template = templates[Capability.REPORTER_TRACE]

    def __call__(self, snapshot: list[MemoryEntry] | tuple[MemoryEntry, ...], answer: str, mode: ResolutionMode) -> str:
        question: QuestionInstance = snapshot[0].payload  # type: ignore[assignment]
        last_k = max((e.round for e in snapshot if e.phase is Phase.FUSION), default=1)
        record = [
            e for e in snapshot
            if e.phase in (Phase.ROLE_FINAL, Phase.DEBATE)
            or (e.phase is Phase.FUSION and e.round == last_k)
        ]
        messages = self.template.render(
            question=question.question,
            options=format_options(question),
            answer=answer,
            mode=mode.value,
            peer_entries=format_entries(record),
        )
        return self.client.complete(messages).strip()
