"""Benchmark ingestion: MedQA / PubMedQA records into ``QuestionInstance``."""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Iterator

from .errors import EmptyInput, MalformedRecord, UnknownLabel

PUBMEDQA_LABELS: tuple[str, ...] = ("yes", "no", "maybe")


@dataclass(frozen=True)
class QuestionInstance:
    """A normalized task handed to the agent collective.

    ``domain`` is the ordered list of admissible answer labels. ``options``
    maps option labels to their text (multiple choice only) and ``contexts``
    carries dataset-provided passages such as a PubMedQA abstract.
    """

    id: str
    question: str
    domain: tuple[str, ...]
    options: dict[str, str] = field(default_factory=dict)
    contexts: tuple[str, ...] = ()
    gold: str | None = None

    def __post_init__(self) -> None:
        if len(self.domain) not in (3, 4, 5):
            raise ValueError(f"answer domain must have 3-5 labels, got {list(self.domain)}")
        if len(set(self.domain)) != len(self.domain):
            raise ValueError(f"duplicate labels in domain {list(self.domain)}")
        if self.gold is not None and self.gold not in self.domain:
            raise UnknownLabel(self.gold)

    def to_record(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "question": self.question,
            "domain": list(self.domain),
            "options": dict(self.options),
            "contexts": list(self.contexts),
            "gold": self.gold,
        }

    @classmethod
    def from_record(cls, rec: dict[str, Any]) -> "QuestionInstance":
        return cls(
            id=str(rec["id"]),
            question=rec["question"],
            domain=tuple(rec["domain"]),
            options=dict(rec.get("options") or {}),
            contexts=tuple(rec.get("contexts") or ()),
            gold=rec.get("gold"),
        )


def _no_duplicate_keys(pairs: list[tuple[str, Any]]) -> dict[str, Any]:
    out: dict[str, Any] = {}
    for key, value in pairs:
        if key in out:
            raise ValueError(f"duplicate key {key!r}")
        out[key] = value
    return out


def _iter_jsonl(path: Path) -> Iterator[tuple[int, dict[str, Any]]]:
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line, object_pairs_hook=_no_duplicate_keys)
            except ValueError as exc:
                raise MalformedRecord(lineno, str(exc)) from None
            if not isinstance(rec, dict):
                raise MalformedRecord(lineno, "record is not an object")
            yield lineno, rec


def load_medqa(path: str | Path) -> list[QuestionInstance]:
    """Load a MedQA (USMLE) JSONL file.

    Each line needs ``question`` and an ``options`` object mapping labels to
    text; ``answer_idx`` is the gold label and may be absent.
    """
    path = Path(path)
    out = []
    for lineno, rec in _iter_jsonl(path):
        question = rec.get("question")
        options = rec.get("options")
        if not isinstance(question, str) or not question.strip():
            raise MalformedRecord(lineno, "missing 'question'")
        if not isinstance(options, dict) or not options:
            raise MalformedRecord(lineno, "missing 'options' object")
        labels = tuple(sorted(str(k).strip().upper() for k in options))
        if len(set(labels)) != len(labels):
            raise MalformedRecord(lineno, "duplicate option labels")
        if len(labels) not in (4, 5):
            raise MalformedRecord(lineno, f"expected 4 or 5 options, got {len(labels)}")
        gold = rec.get("answer_idx")
        if gold is not None:
            gold = str(gold).strip().upper()
            if gold not in labels:
                raise UnknownLabel(gold, lineno)
        out.append(
            QuestionInstance(
                id=str(rec.get("id", f"{path.stem}-{lineno}")),
                question=question.strip(),
                domain=labels,
                options={str(k).strip().upper(): str(v) for k, v in options.items()},
                gold=gold,
            )
        )
    return out


def _pubmedqa_instance(rec: dict[str, Any], default_id: str, lineno: int) -> QuestionInstance:
    question = rec.get("question", rec.get("QUESTION"))
    if not isinstance(question, str) or not question.strip():
        raise MalformedRecord(lineno, "missing 'question'")
    contexts = rec.get("contexts", rec.get("CONTEXTS", []))
    if isinstance(contexts, dict):
        # some mirrors nest the passages as {"contexts": [...], "labels": [...]}
        contexts = contexts.get("contexts", [])
    if not isinstance(contexts, list) or not all(isinstance(c, str) for c in contexts):
        raise MalformedRecord(lineno, "'contexts' must be a list of strings")
    gold = rec.get("final_decision")
    if gold is not None:
        gold = str(gold).strip().lower()
        if gold not in PUBMEDQA_LABELS:
            raise UnknownLabel(gold, lineno)
    return QuestionInstance(
        id=str(rec.get("id", rec.get("pubid", default_id))),
        question=question.strip(),
        domain=PUBMEDQA_LABELS,
        contexts=tuple(contexts),
        gold=gold,
    )


def load_pubmedqa(path: str | Path) -> list[QuestionInstance]:
    """Load PubMedQA records.

    Accepts line-delimited records (``question``, ``contexts``,
    ``final_decision``) and also the upstream single-object layout keyed by
    PMID with upper-case ``QUESTION``/``CONTEXTS`` fields.
    """
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    try:
        whole = json.loads(text)
    except ValueError:
        whole = None
    if isinstance(whole, dict) and whole and all(isinstance(v, dict) for v in whole.values()) \
            and "question" not in whole and "QUESTION" not in whole:
        return [_pubmedqa_instance(rec, pmid, i) for i, (pmid, rec) in enumerate(whole.items(), 1)]
    return [
        _pubmedqa_instance(rec, f"{path.stem}-{lineno}", lineno)
        for lineno, rec in _iter_jsonl(path)
    ]


def load_dataset(path: str | Path, kind: str) -> list[QuestionInstance]:
    loaders = {"medqa": load_medqa, "pubmedqa": load_pubmedqa, "native": load_native}
    try:
        loader = loaders[kind.lower()]
    except KeyError:
        raise ValueError(f"unknown dataset kind {kind!r}; expected one of {sorted(loaders)}") from None
    questions = loader(path)
    if not questions:
        raise EmptyInput(f"no records in {path}")
    return questions


def load_native(path: str | Path) -> list[QuestionInstance]:
    """Load instances written by :func:`dump_instances`."""
    out = []
    for lineno, rec in _iter_jsonl(Path(path)):
        try:
            out.append(QuestionInstance.from_record(rec))
        except (KeyError, TypeError, ValueError) as exc:
            raise MalformedRecord(lineno, str(exc)) from None
    return out


def dump_instances(questions: Iterable[QuestionInstance], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for q in questions:
            fh.write(json.dumps(q.to_record(), ensure_ascii=False) + "\n")


def subsample(
    questions: list[QuestionInstance], limit: int | None, seed: int | None = None
) -> list[QuestionInstance]:
    """First ``limit`` questions, or a seeded random sample when ``seed`` is given."""
    if limit is None or limit >= len(questions):
        return list(questions)
    if seed is None:
        return list(questions[:limit])
    picked = sorted(random.Random(seed).sample(range(len(questions)), limit))
    return [questions[i] for i in picked]


def synthetic_questions(
    count: int, labels: tuple[str, ...] = ("A", "B", "C", "D"), seed: int = 0
) -> list[QuestionInstance]:
    """Placeholder questions with uniformly drawn gold labels, for scripted simulation."""
    rng = random.Random(seed)
    multiple_choice = labels != PUBMEDQA_LABELS
    return [
        QuestionInstance(
            id=f"sim-{i:06d}",
            question=f"Synthetic question {i}",
            domain=labels,
            options={lab: f"option {lab}" for lab in labels} if multiple_choice else {},
            gold=rng.choice(labels),
        )
        for i in range(count)
    ]
