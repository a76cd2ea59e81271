"""Round-barrier execution of the decentralized consensus protocol.

Phases run in a fixed order: query init, two-step role assignment,
independent analysis (k=1), conditional debate, iterative fusion
(k=2..K), and the post-hoc reporter. Every agent in a step sees the same
barrier-time snapshot; outputs are appended in agent-id order once the
step has joined, so both schedulers produce identical pools.
"""

from __future__ import annotations

import dataclasses
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence, TypeVar

from .agents import DEFAULT_ROLE, Agent, ScriptedBehavior, build_scripted_agents
from .consensus import (
    agreement_level,
    ballot_for_round,
    majority_answer,
    plurality_vote,
    should_debate,
    stable_termination,
    weighted_scores,
    weighted_vote,
)
from .datasets import QuestionInstance
from .errors import BackendFailure, BackendFatal, ConfigInvalid, InconsistentDetection, RoundIncomplete
from .llm.client import EndpointConfig
from .memory_pool import (
    REPORTER,
    SYSTEM,
    AgentOutput,
    MemoryEntry,
    MemoryPool,
    Phase,
    Report,
    ResolutionMode,
    RoleFinal,
)

logger = logging.getLogger(__name__)

T = TypeVar("T")

ABLATION_LABELS = {
    "cot": "w/o CoT",
    "role_assignment": "w/o Self-Evolving Role Assignment",
    "weighted_voting": "w/o Confidence-Weighted Voting",
}

TraceSynthesizer = Callable[[Sequence[MemoryEntry], str, ResolutionMode], str]


@dataclass(frozen=True)
class ScriptedBackendConfig:
    agents: tuple[ScriptedBehavior, ...]


@dataclass(frozen=True)
class LLMBackendConfig:
    endpoint: EndpointConfig
    prompt_dir: str | None = None
    include_context: bool = True
    reporter_llm: bool = True


@dataclass(frozen=True)
class ProtocolConfig:
    n: int = 5
    k_max: int = 5
    t_debate: int = 2
    tau_agree: float = 0.8
    seed: int = 0
    cot: bool = True
    role_assignment: bool = True
    weighted_voting: bool = True
    scheduler: str = "sequential"
    backend: ScriptedBackendConfig | LLMBackendConfig | None = None

    def __post_init__(self) -> None:
        self.validate()

    def validate(self) -> None:
        if self.n < 1:
            raise ConfigInvalid(f"n must be >= 1, got {self.n}")
        if self.k_max < 2:
            raise ConfigInvalid(f"k_max must be >= 2, got {self.k_max}")
        if self.t_debate < 0:
            raise ConfigInvalid(f"t_debate must be >= 0, got {self.t_debate}")
        # a supermajority is unique only above one half
        if not 0.5 < self.tau_agree <= 1.0:
            raise ConfigInvalid(f"tau_agree must lie in (0.5, 1], got {self.tau_agree}")
        if self.scheduler not in ("sequential", "concurrent"):
            raise ConfigInvalid(f"scheduler must be 'sequential' or 'concurrent', not {self.scheduler!r}")
        if isinstance(self.backend, ScriptedBackendConfig) and len(self.backend.agents) not in (1, self.n):
            raise ConfigInvalid(
                f"scripted population has {len(self.backend.agents)} entries but n={self.n}"
            )

    def replace(self, **changes: Any) -> "ProtocolConfig":
        return dataclasses.replace(self, **changes)

    @property
    def ablations(self) -> list[str]:
        return [flag for flag in ABLATION_LABELS if not getattr(self, flag)]

    @property
    def label(self) -> str:
        ablated = self.ablations
        if not ablated:
            return "full protocol"
        return ", ".join(ABLATION_LABELS[a] for a in ablated)


@dataclass
class RunResult:
    answer: str
    mode: ResolutionMode
    agreements: list[float]
    debate_triggered: bool
    rounds: int
    trace: str
    pool: MemoryPool = field(repr=False)
    scores: dict[str, float] = field(default_factory=dict)
    n_active: int = 0
    failed_agents: list[int] = field(default_factory=list)

    def to_dict(self) -> dict[str, Any]:
        return {
            "question_id": self.pool.question.id,
            "answer": self.answer,
            "mode": self.mode.value,
            "rounds": self.rounds,
            "agreements": self.agreements,
            "debate_triggered": self.debate_triggered,
            "scores": self.scores,
            "n_active": self.n_active,
            "failed_agents": self.failed_agents,
            "trace": self.trace,
        }

    def same_outcome(self, other: "RunResult") -> bool:
        """Equal results and pools, ignoring timestamps."""
        mine, theirs = self.pool.read_all(), other.pool.read_all()
        return (
            self.to_dict() == other.to_dict()
            and len(mine) == len(theirs)
            and all(a.same_content(b) for a, b in zip(mine, theirs))
        )


# -- schedulers ---------------------------------------------------------------

class SequentialScheduler:
    """Calls agents one after another in id order."""

    def map(self, agents: Sequence[Agent], fn: Callable[[Agent], T]) -> list[T | BackendFailure]:
        out: list[T | BackendFailure] = []
        for agent in agents:
            try:
                out.append(fn(agent))
            except BackendFailure as exc:
                out.append(exc)
        return out

    def close(self) -> None:
        pass


class ConcurrentScheduler:
    """Runs one barrier step's agent calls on a thread pool and joins."""

    def __init__(self, max_workers: int | None = None) -> None:
        self._pool = ThreadPoolExecutor(max_workers=max_workers, thread_name_prefix="hive-agent")

    def map(self, agents: Sequence[Agent], fn: Callable[[Agent], T]) -> list[T | BackendFailure]:
        futures = [self._pool.submit(fn, a) for a in agents]
        out: list[T | BackendFailure] = []
        for fut in futures:
            try:
                out.append(fut.result())
            except BackendFailure as exc:
                out.append(exc)
        return out

    def close(self) -> None:
        self._pool.shutdown(wait=True)


def make_scheduler(name: str, n: int) -> SequentialScheduler | ConcurrentScheduler:
    return ConcurrentScheduler(max_workers=n) if name == "concurrent" else SequentialScheduler()


# -- barrier checks and reporter ------------------------------------------------

def detect_disagreement_barrier(
    snapshot: Sequence[MemoryEntry], tau_agree: float, agent_ids: Sequence[int]
) -> bool:
    """Each agent independently decides whether to debate; all must agree."""
    verdicts = []
    for _ in agent_ids:
        ballot = ballot_for_round(snapshot, 1)
        if ballot.n != len(agent_ids):
            raise RoundIncomplete(f"{ballot.n} analyses posted, expected {len(agent_ids)}")
        verdicts.append(should_debate(ballot, tau_agree))
    if len(set(verdicts)) > 1:
        raise InconsistentDetection(f"agents disagree on debate gating: {verdicts}")
    return verdicts[0] if verdicts else False


def fusion_context(pool: MemoryPool, k: int, expected: int | None = None) -> tuple[MemoryEntry, ...]:
    """Input for fusion round ``k``: full history at k=2, else round k-1's outputs."""
    if k < 2:
        raise ValueError(f"fusion rounds start at k=2, got {k}")
    if k == 2:
        ctx = pool.read_all()
        prior = [e for e in ctx if e.phase is Phase.ANALYSIS and e.round == 1]
    else:
        ctx = prior = pool.read_phase_round(Phase.FUSION, k - 1)
    if not prior or (expected is not None and len(prior) != expected):
        raise RoundIncomplete(f"round {k - 1} has {len(prior)} outputs, expected {expected}")
    return ctx


def _clip(text: str, limit: int = 240) -> str:
    text = " ".join(text.split())
    return text if len(text) <= limit else text[: limit - 3] + "..."


def template_trace(snapshot: Sequence[MemoryEntry], answer: str, mode: ResolutionMode) -> str:
    """Offline reasoning trace stitched from pool excerpts (no model call)."""
    question: QuestionInstance = snapshot[0].payload  # type: ignore[assignment]
    rounds = sorted({e.round for e in snapshot if e.phase is Phase.FUSION})
    k_star = rounds[-1] if rounds else 1
    lines = [f"Question: {_clip(question.question)}", f"Final answer: {answer} ({mode.value}, k*={k_star})"]

    roles = [e for e in snapshot if e.phase is Phase.ROLE_FINAL]
    if roles:
        lines.append("Roles:")
        lines += [f"  {e.author}: {e.payload.role} - {_clip(e.payload.rationale, 120)}" for e in roles]

    debate = [e for e in snapshot if e.phase is Phase.DEBATE]
    if debate:
        lines.append("Debate:")
        for e in debate:
            arg = e.payload
            target = f" -> A{arg.target}" if arg.target is not None else ""
            lines.append(f"  cycle {e.round} {e.author} {arg.kind.value}{target}: {_clip(arg.argument, 160)}")

    lines.append("Agreement by round:")
    lines.append("  " + ", ".join(
        f"k={k}: {agreement_level(ballot_for_round(snapshot, k)):.2f}" for k in [1, *rounds]
    ))

    final_phase = Phase.FUSION if rounds else Phase.ANALYSIS
    supporting = [
        e for e in snapshot
        if e.phase is final_phase and e.round == k_star and e.payload.answer == answer
    ]
    supporting.sort(key=lambda e: -e.payload.confidence)
    if supporting:
        lines.append("Representative reasoning:")
        for e in supporting[:3]:
            out: AgentOutput = e.payload  # type: ignore[assignment]
            lines.append(f"  {e.author} ({out.answer}, {out.confidence:.2f}): {_clip(out.reasoning)}")
    return "\n".join(lines)


def report(
    snapshot: Sequence[MemoryEntry],
    config: ProtocolConfig,
    synthesizer: TraceSynthesizer = template_trace,
) -> tuple[Report, dict[str, float]]:
    """Decide the final answer from the last executed round.

    Raises:
        AllInvalid: the vote path found no valid answer.
    """
    rounds = [e.round for e in snapshot if e.phase is Phase.FUSION]
    k_star = max(rounds) if rounds else 1
    ballot = ballot_for_round(snapshot, k_star)
    if agreement_level(ballot) >= config.tau_agree:
        answer = majority_answer(ballot, config.tau_agree)
        mode, scores = ResolutionMode.CONFIRMATORY, weighted_scores(ballot)
    elif config.weighted_voting:
        answer, scores = weighted_vote(ballot)
        mode = ResolutionMode.WEIGHTED_VOTE
    else:
        answer, scores = plurality_vote(ballot), weighted_scores(ballot)
        mode = ResolutionMode.PLURALITY
    try:
        trace = synthesizer(snapshot, answer, mode)
    except BackendFailure as exc:
        logger.warning("trace synthesis failed (%s); using template trace", exc)
        trace = template_trace(snapshot, answer, mode)
    return Report(answer, mode, trace), scores


# -- engine -------------------------------------------------------------------

class HiveEngine:
    """Runs the protocol for one question at a time.

    Agents that raise :class:`BackendFailure` drop out from that step on and
    every later denominator counts only survivors. The run aborts with
    :class:`BackendFatal` once survivors no longer form a strict majority of
    the initial population.
    """

    def __init__(
        self,
        config: ProtocolConfig,
        agents: Sequence[Agent],
        *,
        synthesizer: TraceSynthesizer = template_trace,
    ) -> None:
        if len(agents) != config.n:
            raise ConfigInvalid(f"{len(agents)} agents supplied but n={config.n}")
        if len({a.id for a in agents}) != len(agents):
            raise ConfigInvalid("agent ids must be unique")
        self.config = config
        self.agents = sorted(agents, key=lambda a: a.id)
        self.synthesizer = synthesizer

    def run(self, question: QuestionInstance) -> RunResult:
        scheduler = make_scheduler(self.config.scheduler, self.config.n)
        try:
            return _Execution(self, scheduler).run(question)
        finally:
            scheduler.close()


class _Execution:
    def __init__(self, engine: HiveEngine, scheduler: SequentialScheduler | ConcurrentScheduler) -> None:
        self.config = engine.config
        self.synthesizer = engine.synthesizer
        self.scheduler = scheduler
        self.alive: list[Agent] = list(engine.agents)
        self.failed: list[int] = []
        self.pool = MemoryPool()

    def step(self, fn: Callable[[Agent], Any], phase: Phase, round: int) -> list[tuple[Agent, Any]]:
        results = self.scheduler.map(self.alive, fn)
        posted = []
        for agent, res in zip(list(self.alive), results):
            if isinstance(res, BackendFailure):
                self.drop(agent, res, phase, round)
            else:
                posted.append((agent, res))
        for agent, payload in posted:
            self.pool.append(payload, agent.name, phase, round)
        return posted

    def drop(self, agent: Agent, exc: BackendFailure, phase: Phase, round: int) -> None:
        logger.warning("%s failed during %s round %d: %s", agent.name, phase.value, round, exc)
        self.alive.remove(agent)
        self.failed.append(agent.id)
        if 2 * len(self.alive) <= self.config.n:
            raise BackendFatal(
                f"{len(self.failed)} of {self.config.n} agents failed; "
                f"{len(self.alive)} survivors are not a majority"
            ) from exc

    def run(self, question: QuestionInstance) -> RunResult:
        cfg, pool = self.config, self.pool
        pool.append(question, SYSTEM, Phase.QUERY_INIT, 0)

        if cfg.role_assignment:
            snap = pool.read_all()
            self.step(lambda a: a.propose_role(question, snap), Phase.ROLE_PROPOSAL, 0)
            snap = pool.read_all()
            proposals = sum(1 for e in snap if e.phase is Phase.ROLE_PROPOSAL)
            if proposals != len(self.alive):
                raise RoundIncomplete(f"{proposals} role proposals for {len(self.alive)} agents")
            finals = self.step(lambda a: a.refine_role(snap), Phase.ROLE_FINAL, 0)
            for agent, final in finals:
                agent.role = final.role
        else:
            for agent in self.alive:
                agent.role = DEFAULT_ROLE

        snap = pool.read_all()
        self.step(lambda a: a.analyze(question, a.role, snap), Phase.ANALYSIS, 1)
        agreements = [agreement_level(ballot_for_round(pool.read_all(), 1))]

        debate = detect_disagreement_barrier(
            pool.read_all(), cfg.tau_agree, [a.id for a in self.alive]
        )
        if debate:
            for t in range(1, cfg.t_debate + 1):
                snap = pool.read_all()
                self.step(lambda a: a.debate(snap, t), Phase.DEBATE, t)

        prev = 0.0
        expected = len(self.alive)
        k = 1
        for k in range(2, cfg.k_max + 1):
            ctx = fusion_context(pool, k, expected)
            self.step(lambda a: a.fuse(ctx, k), Phase.FUSION, k)
            expected = len(self.alive)
            curr = agreement_level(ballot_for_round(pool.read_phase_round(Phase.FUSION, k), k))
            agreements.append(curr)
            if stable_termination(prev, curr, cfg.tau_agree):
                break
            prev = curr

        final, scores = report(pool.read_all(), cfg, self.synthesizer)
        pool.append(final, REPORTER, Phase.REPORT, k)
        return RunResult(
            answer=final.answer,
            mode=final.mode,
            agreements=agreements,
            debate_triggered=debate,
            rounds=k,
            trace=final.trace,
            pool=pool,
            scores=scores,
            n_active=len(self.alive),
            failed_agents=list(self.failed),
        )


# -- construction from config ---------------------------------------------------

def build_agents(config: ProtocolConfig, client: Any = None) -> tuple[list[Agent], TraceSynthesizer]:
    """Instantiate the configured population and its trace synthesizer.

    ``client`` overrides the chat client for LLM backends (tests pass fakes).
    """
    backend = config.backend
    if isinstance(backend, ScriptedBackendConfig):
        return list(build_scripted_agents(backend.agents, config.n, config.seed)), template_trace
    if isinstance(backend, LLMBackendConfig):
        from .llm import ChatClient, LLMAgent, LLMReporter, load_templates

        templates = load_templates(backend.prompt_dir)
        client = client if client is not None else ChatClient(backend.endpoint)
        agents: list[Agent] = [
            LLMAgent(i, client, templates, cot=config.cot, include_context=backend.include_context)
            for i in range(config.n)
        ]
        synth = LLMReporter(client, templates) if backend.reporter_llm else template_trace
        return agents, synth
    raise ConfigInvalid("no backend configured")


def run(
    question: QuestionInstance,
    config: ProtocolConfig,
    agents: Sequence[Agent] | None = None,
    *,
    client: Any = None,
    synthesizer: TraceSynthesizer | None = None,
) -> RunResult:
    """Run the protocol on one question with agents built from ``config`` unless given."""
    if agents is None:
        agents, default_synth = build_agents(config, client)
    else:
        default_synth = template_trace
    engine = HiveEngine(config, agents, synthesizer=synthesizer or default_synth)
    return engine.run(question)
