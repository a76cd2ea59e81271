"""Benchmark harness: run the protocol over a question set and score it."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Sequence

from .agents import derive_seed
from .config import config_to_dict
from .datasets import QuestionInstance
from .engine import ProtocolConfig, RunResult, run
from .errors import AllInvalid, BackendFatal
from .memory_pool import INVALID
from .metrics import BenchReport, QuestionRecord, score

logger = logging.getLogger(__name__)


def question_config(config: ProtocolConfig, question: QuestionInstance) -> ProtocolConfig:
    """Per-question config whose seed depends on the run seed and question id."""
    return config.replace(seed=derive_seed(config.seed, question.id))


def run_question(
    question: QuestionInstance,
    config: ProtocolConfig,
    *,
    client: Any = None,
    trace_dir: Path | None = None,
) -> tuple[QuestionRecord, RunResult | None]:
    """Run one question; unrecoverable per-question failures become INVALID records."""
    try:
        result = run(question, question_config(config, question), client=client)
    except (AllInvalid, BackendFatal) as exc:
        logger.warning("question %s failed: %s", question.id, exc)
        return QuestionRecord(question.id, INVALID, question.gold, mode=type(exc).__name__), None
    if trace_dir is not None:
        result.pool.save(trace_dir / f"{_safe(question.id)}.trace")
    record = QuestionRecord(
        id=question.id,
        predicted=result.answer,
        gold=question.gold,
        mode=result.mode.value,
        rounds=result.rounds,
        debate_triggered=result.debate_triggered,
        final_agreement=result.agreements[-1],
        agreements=tuple(result.agreements),
    )
    return record, result


def _safe(name: str) -> str:
    return "".join(c if c.isalnum() or c in "-_." else "_" for c in name)


def run_bench(
    questions: Sequence[QuestionInstance],
    config: ProtocolConfig,
    *,
    jobs: int = 1,
    client: Any = None,
    trace_dir: str | Path | None = None,
    dataset: str = "",
    on_record: Callable[[QuestionRecord], None] | None = None,
) -> tuple[BenchReport, bool]:
    """Run and score every question.

    Returns the report and whether the run completed; on Ctrl-C the report
    covers the questions finished so far.
    """
    trace_path = Path(trace_dir) if trace_dir is not None else None
    if trace_path is not None:
        trace_path.mkdir(parents=True, exist_ok=True)
    records: list[QuestionRecord] = []
    complete = True

    def one(q: QuestionInstance) -> QuestionRecord:
        return run_question(q, config, client=client, trace_dir=trace_path)[0]

    try:
        if jobs <= 1:
            for q in questions:
                records.append(one(q))
                if on_record:
                    on_record(records[-1])
        else:
            executor = ThreadPoolExecutor(max_workers=jobs)
            try:
                futures = [executor.submit(one, q) for q in questions]
                # collect in submission order so reports do not depend on thread timing
                for fut in futures:
                    records.append(fut.result())
                    if on_record:
                        on_record(records[-1])
            finally:
                executor.shutdown(wait=True, cancel_futures=True)
    except KeyboardInterrupt:
        logger.warning("interrupted after %d of %d questions", len(records), len(questions))
        if not records:
            raise
        complete = False
    report = score(records, config=config_to_dict(config), label=config.label, dataset=dataset)
    return report, complete


@dataclass(frozen=True)
class SweepRow:
    n: int
    accuracy: float
    macro_f1: float
    report: BenchReport


def sweep(
    questions: Sequence[QuestionInstance],
    config: ProtocolConfig,
    n_values: Sequence[int],
    **bench_kwargs: Any,
) -> list[SweepRow]:
    """One benchmark per agent count, everything else held fixed."""
    if not n_values:
        raise ValueError("n_values must not be empty")
    rows = []
    for n in n_values:
        report, _ = run_bench(questions, config.replace(n=n), **bench_kwargs)
        rows.append(SweepRow(n, report.accuracy, report.macro_f1, report))
    return rows


def format_sweep(rows: Sequence[SweepRow]) -> str:
    lines = ["   N  accuracy  macro_f1", "----  --------  --------"]
    lines += [f"{r.n:4d}  {r.accuracy:8.4f}  {r.macro_f1:8.4f}" for r in rows]
    return "\n".join(lines)
