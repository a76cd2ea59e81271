"""Accuracy and macro-F1 over benchmark results."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field
from statistics import mean
from typing import Any, Iterable, Sequence

from .errors import EmptyInput


@dataclass(frozen=True)
class QuestionRecord:
    id: str
    predicted: str
    gold: str | None
    mode: str = ""
    rounds: int = 0
    debate_triggered: bool = False
    final_agreement: float = 0.0
    agreements: tuple[float, ...] = ()

    @property
    def correct(self) -> bool:
        return self.gold is not None and self.predicted == self.gold


@dataclass(frozen=True)
class LabelScore:
    precision: float
    recall: float
    f1: float
    support: int


@dataclass
class BenchReport:
    records: list[QuestionRecord]
    accuracy: float
    macro_f1: float
    per_label: dict[str, LabelScore]
    n_scored: int
    agreement_stats: dict[str, float]
    config: dict[str, Any] = field(default_factory=dict)
    label: str = ""
    dataset: str = ""

    def to_dict(self) -> dict[str, Any]:
        return {
            "label": self.label,
            "dataset": self.dataset,
            "n_questions": len(self.records),
            "n_scored": self.n_scored,
            "accuracy": self.accuracy,
            "f1_averaging": "macro",
            "macro_f1": self.macro_f1,
            "per_label": {k: asdict(v) for k, v in sorted(self.per_label.items())},
            "agreement_stats": self.agreement_stats,
            "config": self.config,
            "records": [
                {**asdict(r), "correct": r.correct} for r in self.records
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["id", "predicted", "gold", "correct", "mode", "rounds", "debate_triggered", "final_agreement"])
        for r in self.records:
            writer.writerow([
                r.id, r.predicted, r.gold or "", int(r.correct), r.mode, r.rounds,
                int(r.debate_triggered), f"{r.final_agreement:.4f}",
            ])
        return buf.getvalue()


def per_label_scores(gold: Sequence[str], pred: Sequence[str]) -> dict[str, LabelScore]:
    """Precision/recall/F1 for every label that occurs in ``gold``."""
    out = {}
    for label in sorted(set(gold)):
        tp = sum(1 for g, p in zip(gold, pred) if g == label and p == label)
        n_pred = sum(1 for p in pred if p == label)
        n_gold = sum(1 for g in gold if g == label)
        precision = tp / n_pred if n_pred else 0.0
        recall = tp / n_gold
        f1 = 2 * tp / (n_pred + n_gold)
        out[label] = LabelScore(precision, recall, f1, n_gold)
    return out


def accuracy_and_macro_f1(gold: Sequence[str], pred: Sequence[str]) -> tuple[float, float]:
    if len(gold) != len(pred):
        raise ValueError("gold and prediction lists differ in length")
    if not gold:
        raise EmptyInput("nothing to score")
    per_label = per_label_scores(gold, pred)
    acc = sum(g == p for g, p in zip(gold, pred)) / len(gold)
    return acc, sum(s.f1 for s in per_label.values()) / len(per_label)


def score(
    records: Iterable[QuestionRecord],
    *,
    config: dict[str, Any] | None = None,
    label: str = "",
    dataset: str = "",
) -> BenchReport:
    """Score records; only those carrying a gold label count.

    Raises:
        EmptyInput: no record has a gold label.
    """
    records = list(records)
    scored = [r for r in records if r.gold is not None]
    if not scored:
        raise EmptyInput("no records with a gold label")
    gold = [r.gold for r in scored]
    pred = [r.predicted for r in scored]
    acc, macro = accuracy_and_macro_f1(gold, pred)  # type: ignore[arg-type]
    stats = {
        "debate_rate": mean(r.debate_triggered for r in records),
        "confirmatory_rate": mean(r.mode == "Confirmatory" for r in records),
        "mean_rounds": mean(r.rounds for r in records),
        "mean_final_agreement": mean(r.final_agreement for r in records),
    }
    return BenchReport(
        records=records,
        accuracy=acc,
        macro_f1=macro,
        per_label=per_label_scores(gold, pred),  # type: ignore[arg-type]
        n_scored=len(scored),
        agreement_stats=stats,
        config=config or {},
        label=label,
        dataset=dataset,
    )
