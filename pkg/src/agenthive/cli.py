"""Command-line entry point: ``hive run|bench|simulate|sweep|trace``.

Exit codes: 0 success, 1 invalid configuration or input, 2 too many agent
backends failed, 3 no valid answer to aggregate.
"""

from __future__ import annotations

import argparse
import json
import logging
import re
import sys
from pathlib import Path
from typing import Sequence

from .bench import format_sweep, run_bench, sweep
from .config import load_config
from .datasets import (
    PUBMEDQA_LABELS,
    QuestionInstance,
    load_dataset,
    subsample,
    synthetic_questions,
)
from .engine import ABLATION_LABELS, ProtocolConfig, ScriptedBackendConfig, run
from .errors import AllInvalid, BackendFatal, CorruptTrace, DatasetError, HiveError, ProtocolError
from .memory_pool import MemoryPool, Phase, agent_name

EXIT_OK, EXIT_CONFIG, EXIT_BACKEND, EXIT_ALL_INVALID = 0, 1, 2, 3

_OPTION_LINE = re.compile(r"^\s*\(?([A-Ea-e])[).:]\s+(.+)$")


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # usage errors share the config exit code
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _n_list(text: str) -> list[int]:
    try:
        values = [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated integer list: {text!r}") from None
    if not values or any(v < 1 for v in values):
        raise argparse.ArgumentTypeError("expected a non-empty list of positive integers")
    return values


def _labels(text: str) -> tuple[str, ...]:
    if text.lower() == "pubmedqa":
        return PUBMEDQA_LABELS
    return tuple(text.upper())


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hive", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", required=True, help="run configuration file (TOML)")
        p.add_argument("--out", default="hive-out", help="output directory (default: ./hive-out)")
        p.add_argument("--ablate", action="append", default=[], choices=sorted(ABLATION_LABELS),
                       help="disable a protocol component (repeatable)")
        p.add_argument("--seed", type=int, help="override [protocol] seed")
        p.add_argument("--scheduler", choices=["sequential", "concurrent"])

    def dataset_args(p: argparse.ArgumentParser, required: bool) -> None:
        p.add_argument("--dataset", required=required, help="dataset file")
        p.add_argument("--kind", choices=["medqa", "pubmedqa", "native"], default="medqa")
        p.add_argument("--limit", type=int, help="use only this many questions")
        p.add_argument("--sample-seed", type=int,
                       help="draw --limit questions at random with this seed (default: first N)")
        p.add_argument("--jobs", type=int, default=1, help="questions run concurrently")
        p.add_argument("--traces", action="store_true", help="write one trace file per question")

    p = sub.add_parser("run", help="answer a single question")
    common(p)
    p.add_argument("--question", required=True,
                   help="question file (.txt with option lines, or .json record) or literal text")

    p = sub.add_parser("bench", help="run and score a dataset")
    common(p)
    dataset_args(p, required=True)

    p = sub.add_parser("simulate", help="scripted-agent simulation for protocol validation")
    common(p)
    dataset_args(p, required=False)
    p.add_argument("--questions", type=int, default=1000, help="synthetic question count without --dataset")
    p.add_argument("--labels", type=_labels, default=("A", "B", "C", "D"),
                   help="synthetic answer labels, e.g. ABCD or 'pubmedqa'")
    p.add_argument("--question-seed", type=int, default=0)
    p.add_argument("--n", type=int, help="override [protocol] n")
    p.add_argument("--trajectories", action="store_true",
                   help="dump per-round agreement trajectories (JSONL)")

    p = sub.add_parser("sweep", help="benchmark across agent counts")
    common(p)
    dataset_args(p, required=False)
    p.add_argument("--n", type=_n_list, required=True, help="comma-separated agent counts, e.g. 3,5,7")
    p.add_argument("--questions", type=int, default=1000)
    p.add_argument("--labels", type=_labels, default=("A", "B", "C", "D"))
    p.add_argument("--question-seed", type=int, default=0)

    p = sub.add_parser("trace", help="inspect a trace file")
    p.add_argument("path")
    p.add_argument("--agent", type=int, help="only entries authored by this agent id")
    p.add_argument("--phase", choices=[ph.value for ph in Phase])
    p.add_argument("--round", type=int)
    return parser


# -- helpers -------------------------------------------------------------------

def _load_config(args: argparse.Namespace) -> ProtocolConfig:
    config = load_config(args.config)
    changes: dict[str, object] = {flag: False for flag in args.ablate}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.scheduler:
        changes["scheduler"] = args.scheduler
    if getattr(args, "n", None) is not None and isinstance(args.n, int):
        changes["n"] = args.n
    return config.replace(**changes) if changes else config


def read_question(source: str) -> QuestionInstance:
    """A question from a JSON record, a text file with option lines, or literal text."""
    path = Path(source)
    text = path.read_text(encoding="utf-8") if path.is_file() else source
    qid = path.stem if path.is_file() else "question"
    if path.suffix in (".json", ".jsonl") and path.is_file():
        rec = json.loads(text.strip().splitlines()[0] if path.suffix == ".jsonl" else text)
        if "domain" in rec:
            return QuestionInstance.from_record(rec)
        if "options" in rec:
            opts = {str(k).upper(): str(v) for k, v in rec["options"].items()}
            gold = rec.get("answer_idx")
            return QuestionInstance(str(rec.get("id", qid)), rec["question"], tuple(sorted(opts)),
                                    opts, gold=str(gold).upper() if gold else None)
        gold = rec.get("final_decision")
        return QuestionInstance(str(rec.get("id", qid)), rec["question"], PUBMEDQA_LABELS,
                                contexts=tuple(rec.get("contexts", ())),
                                gold=str(gold).lower() if gold else None)
    options, stem = {}, []
    for line in text.splitlines():
        m = _OPTION_LINE.match(line)
        if m:
            options[m.group(1).upper()] = m.group(2).strip()
        else:
            stem.append(line)
    question = "\n".join(stem).strip()
    if len(options) >= 3:
        return QuestionInstance(qid, question, tuple(sorted(options)), options)
    return QuestionInstance(qid, text.strip(), PUBMEDQA_LABELS)


def _questions(args: argparse.Namespace) -> tuple[list[QuestionInstance], str]:
    if args.dataset:
        qs = load_dataset(args.dataset, args.kind)
        name = str(args.dataset)
    else:
        qs = synthetic_questions(args.questions, args.labels, args.question_seed)
        name = f"synthetic:{args.questions}x{''.join(args.labels) if len(args.labels[0]) == 1 else 'yes/no/maybe'}"
    return subsample(qs, args.limit, args.sample_seed), name


def _slug(config: ProtocolConfig) -> str:
    return "full" if not config.ablations else "wo-" + "-".join(config.ablations)


# -- subcommands -----------------------------------------------------------------

def cmd_run(args: argparse.Namespace) -> int:
    config = _load_config(args)
    question = read_question(args.question)
    result = run(question, config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    trace_path = out / f"{question.id}.trace"
    result.pool.save(trace_path)
    (out / f"{question.id}.result.json").write_text(json.dumps(result.to_dict(), indent=2) + "\n")
    print(f"ANSWER: {result.answer} ({result.mode.value}, k*={result.rounds})")
    print("agreement: " + ", ".join(f"k={k}: {a:.2f}" for k, a in enumerate(result.agreements, 1)))
    if result.failed_agents:
        print("failed agents: " + ", ".join(agent_name(i) for i in result.failed_agents))
    print(f"trace: {trace_path}")
    return EXIT_OK


def _bench(args: argparse.Namespace, config: ProtocolConfig) -> int:
    questions, name = _questions(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    stem = f"bench-{args.kind if args.dataset else 'sim'}-{_slug(config)}"
    report, complete = run_bench(
        questions, config, jobs=args.jobs, dataset=name,
        trace_dir=out / f"{stem}-traces" if args.traces else None,
    )
    (out / f"{stem}.json").write_text(report.to_json())
    (out / f"{stem}.csv").write_text(report.to_csv())
    if getattr(args, "trajectories", False):
        with open(out / f"{stem}-trajectories.jsonl", "w") as fh:
            for r in report.records:
                fh.write(json.dumps({"id": r.id, "agreements": list(r.agreements), "mode": r.mode}) + "\n")
    print(f"{report.label}: accuracy {report.accuracy:.4f}, macro-F1 {report.macro_f1:.4f} "
          f"over {report.n_scored} scored questions")
    print(f"report: {out / (stem + '.json')}")
    if not complete:
        print("interrupted: partial results written", file=sys.stderr)
        return 130
    return EXIT_OK


def cmd_bench(args: argparse.Namespace) -> int:
    return _bench(args, _load_config(args))


def cmd_simulate(args: argparse.Namespace) -> int:
    config = _load_config(args)
    if not isinstance(config.backend, ScriptedBackendConfig):
        print("simulate requires a scripted backend", file=sys.stderr)
        return EXIT_CONFIG
    return _bench(args, config)


def cmd_sweep(args: argparse.Namespace) -> int:
    config = _load_config(args)
    questions, name = _questions(args)
    rows = sweep(questions, config, args.n, jobs=args.jobs, dataset=name)
    table = format_sweep(rows)
    print(table)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / f"sweep-{_slug(config)}.txt").write_text(table + "\n")
    return EXIT_OK


def format_trace(pool: MemoryPool, agent: int | None, phase: str | None, round: int | None) -> str:
    entries = [
        e for e in pool.read_all()
        if (agent is None or e.author == agent_name(agent))
        and (phase is None or e.phase.value == phase)
        and (round is None or e.round == round)
    ]
    if not entries:
        return "no entries"
    lines, group = [], None
    for e in entries:
        if (e.phase, e.round) != group:
            group = (e.phase, e.round)
            lines.append(f"== {e.phase.value} (round {e.round}) ==")
        p = e.payload
        if e.phase is Phase.QUERY_INIT:
            body = f"{p.question} [{', '.join(p.domain)}]"
        elif e.phase in (Phase.ANALYSIS, Phase.FUSION):
            body = f"ANSWER {p.answer} CONFIDENCE {p.confidence:.2f} | {' '.join(p.reasoning.split())[:200]}"
        elif e.phase is Phase.DEBATE:
            target = f" -> A{p.target}" if p.target is not None else ""
            body = f"{p.kind.value}{target}: {' '.join(p.argument.split())[:200]}"
        elif e.phase is Phase.ROLE_PROPOSAL:
            body = f"{p.role}: {p.reasoning}"
        elif e.phase is Phase.ROLE_FINAL:
            body = f"{p.role}: {p.rationale}"
        else:
            body = f"FINAL {p.answer} ({p.mode.value})\n{p.trace}"
        lines.append(f"#{e.seq} {e.timestamp.isoformat()} {e.author}: {body}")
    return "\n".join(lines)


def cmd_trace(args: argparse.Namespace) -> int:
    try:
        pool = MemoryPool.load(args.path)
    except OSError as exc:
        print(f"cannot read trace: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(format_trace(pool, args.agent, args.phase, args.round))
    return EXIT_OK


COMMANDS = {
    "run": cmd_run,
    "bench": cmd_bench,
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
    "trace": cmd_trace,
}


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return COMMANDS[args.command](args)
    except BackendFatal as exc:
        print(f"backend failure: {exc}", file=sys.stderr)
        return EXIT_BACKEND
    except AllInvalid as exc:
        print(f"no valid answer: {exc}", file=sys.stderr)
        return EXIT_ALL_INVALID
    except CorruptTrace as exc:
        print(f"corrupt trace: {exc} (last valid seq: {exc.last_valid_seq})", file=sys.stderr)
        return EXIT_CONFIG
    except (ProtocolError, DatasetError, HiveError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
