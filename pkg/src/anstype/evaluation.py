"""Evaluation protocol: accuracy, lenient NDCG@k, MRR, and error analysis.

Category accuracy is computed over all gold questions. Type metrics cover
only questions whose gold category is literal or resource:

* gold literal: the single predicted subtype is either correct (1) or
  incorrect (0), and the predicted category must be literal;
* gold resource: 0 when the predicted category is not resource (the
  two-phase pipeline emits no type list then), otherwise lenient NDCG@k
  against the type hierarchy (hierarchical mode) or the reciprocal rank of
  the first exact gold hit (flat mode).

NDCG note: the ideal DCG counts each gold type with gain 1, truncated at
k. Lenient ancestor credit can push DCG above that ideal, so NDCG is
capped at 1.0; every report carries this note and the uncapped value is
available in debug logs.
"""

from __future__ import annotations

import json
import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

from .dataset import (
    LITERAL_SUBTYPES,
    RAW_CATEGORIES,
    QuestionSet,
    flatten_category,
)
from .errors import ValidationError
from .ranking import RankedTypeList
from .typehier import TypeHierarchy

log = logging.getLogger(__name__)

CAP_NOTE = (
    "NDCG capped at 1.0: ideal DCG counts each gold type with gain 1, "
    "so lenient ancestor credit may exceed it"
)

MODES = ("dbpedia", "wikidata")


def ndcg_at_k(
    predicted: RankedTypeList | list[str],
    gold: set[str] | frozenset[str],
    hier: TypeHierarchy,
    k: int,
    capped: bool = True,
) -> float:
    """Lenient NDCG@k with linear-decay gains.

    DCG sums lenient gains discounted by log2(rank+1) over the top-k
    predictions; ideal DCG gives gain 1 to each gold type, truncated at k.
    """
    if not gold:
        raise ValidationError("gold type set is empty")
    if k < 1:
        raise ValidationError(f"k must be >= 1, got {k}")
    labels = [t if isinstance(t, str) else t[0] for t in predicted]
    dcg = sum(
        hier.lenient_gain(t, gold) / math.log2(i + 2)
        for i, t in enumerate(labels[:k])
    )
    idcg = sum(1.0 / math.log2(i + 2) for i in range(min(k, len(gold))))
    value = dcg / idcg
    if capped and value > 1.0:
        log.debug("NDCG@%d capped: uncapped value %.6f", k, value)
        return 1.0
    return value


def reciprocal_rank(predicted: RankedTypeList | list[str], gold: set[str]) -> float:
    """1/rank of the first predicted type present in gold, 0 if none."""
    for i, t in enumerate(predicted):
        label = t if isinstance(t, str) else t[0]
        if label in gold:
            return 1.0 / (i + 1)
    return 0.0


def mrr(runs: list[tuple[RankedTypeList | list[str], set[str]]]) -> float:
    """Mean reciprocal rank of the first exact gold hit over many questions."""
    if not runs:
        raise ValidationError("cannot average over zero questions")
    return sum(reciprocal_rank(pred, gold) for pred, gold in runs) / len(runs)


@dataclass
class PredictionRun:
    """Predicted category and ranked type list per question id, plus run metadata."""

    predictions: dict[str, tuple[str, list[str]]]  # id -> (raw category, types)
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        for qid, (category, types) in self.predictions.items():
            _validate_prediction(qid, category, types)

    @classmethod
    def from_file(cls, path) -> "PredictionRun":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        if isinstance(data, dict):  # with metadata wrapper
            meta = data.get("metadata", {})
            records = data["predictions"]
        else:
            meta = {}
            records = data
        preds: dict[str, tuple[str, list[str]]] = {}
        for rec in records:
            qid = str(rec["id"])
            if qid in preds:
                raise ValidationError(f"duplicate prediction id {qid!r}")
            preds[qid] = (rec["category"], list(rec["type"]))
        return cls(preds, meta)

    def to_file(self, path) -> None:
        records = [
            {"id": qid, "category": cat, "type": types}
            for qid, (cat, types) in self.predictions.items()
        ]
        payload: dict | list = records
        if self.metadata:
            payload = {"metadata": self.metadata, "predictions": records}
        Path(path).write_text(json.dumps(payload, indent=1), encoding="utf-8")


def _validate_prediction(qid: str, category: str, types: list[str]) -> None:
    if category not in RAW_CATEGORIES:
        raise ValidationError(f"prediction {qid!r}: unknown category {category!r}")
    if category == "boolean" and types != ["boolean"]:
        raise ValidationError(f"prediction {qid!r}: boolean must carry ['boolean']")
    if category == "literal" and (
        len(types) != 1 or types[0] not in LITERAL_SUBTYPES
    ):
        raise ValidationError(f"prediction {qid!r}: literal must carry one subtype")
    if category == "resource" and not types:
        raise ValidationError(f"prediction {qid!r}: resource must carry >= 1 type")


@dataclass
class EvalReport:
    mode: str
    n_questions: int
    n_missing: int
    n_unusable: int
    n_skipped_empty_gold: int
    accuracy_3way: float
    accuracy_5way: float
    per_category_accuracy: dict[str, float]
    ndcg5: float | None = None
    ndcg10: float | None = None
    mrr: float | None = None
    n_type_scored: int = 0
    note: str = CAP_NOTE
    metadata: dict = field(default_factory=dict)

    def to_json(self) -> str:
        payload = {
            "note": self.note,
            "mode": self.mode,
            "questions": self.n_questions,
            "missing_predictions": self.n_missing,
            "unusable_text": self.n_unusable,
            "skipped_empty_gold": self.n_skipped_empty_gold,
            "accuracy_3way": self.accuracy_3way,
            "accuracy_5way": self.accuracy_5way,
            "per_category_accuracy": self.per_category_accuracy,
            "type_questions_scored": self.n_type_scored,
            "metadata": self.metadata,
        }
        if self.mode == "dbpedia":
            payload["ndcg@5"] = self.ndcg5
            payload["ndcg@10"] = self.ndcg10
        else:
            payload["mrr"] = self.mrr
        return json.dumps(payload, indent=2)

    def to_text(self) -> str:
        rows = [
            ("questions", f"{self.n_questions}"),
            ("missing predictions", f"{self.n_missing}"),
            ("unusable text", f"{self.n_unusable}"),
            ("skipped (empty gold)", f"{self.n_skipped_empty_gold}"),
            ("accuracy (3-way)", f"{self.accuracy_3way:.4f}"),
            ("accuracy (5-way)", f"{self.accuracy_5way:.4f}"),
        ]
        for cat in RAW_CATEGORIES:
            if cat in self.per_category_accuracy:
                rows.append((f"accuracy [{cat}]", f"{self.per_category_accuracy[cat]:.4f}"))
        if self.mode == "dbpedia":
            rows.append(("NDCG@5", f"{self.ndcg5:.4f}"))
            rows.append(("NDCG@10", f"{self.ndcg10:.4f}"))
        else:
            rows.append(("MRR", f"{self.mrr:.4f}"))
        rows.append(("type questions scored", f"{self.n_type_scored}"))
        width = max(len(name) for name, _ in rows)
        lines = [f"# {self.note}", f"# mode: {self.mode}"]
        lines += [f"{name.ljust(width)}  {value}" for name, value in rows]
        return "\n".join(lines) + "\n"


def evaluate_run(
    run: PredictionRun,
    gold: QuestionSet,
    hier: TypeHierarchy | None,
    mode: str,
) -> EvalReport:
    """Score a prediction run against gold questions.

    Missing predictions and unusable (empty-text) gold questions are scored
    as incorrect and counted separately. Gold resource questions with an
    empty gold type list cannot be ranked and are skipped from type metrics.
    """
    if mode not in MODES:
        raise ValidationError(f"unknown mode {mode!r}")
    if mode == "dbpedia" and hier is None:
        raise ValidationError("hierarchical mode requires a type hierarchy")

    n_missing = 0
    n_unusable = 0
    n_skipped = 0
    match3: list[int] = []
    match5: list[int] = []
    per_cat: dict[str, list[int]] = {c: [] for c in RAW_CATEGORIES}
    type_scores5: list[float] = []
    type_scores10: list[float] = []

    for q in gold:
        pred = run.predictions.get(q.id)
        if pred is None:
            n_missing += 1
        if not q.usable:
            n_unusable += 1
        scoreable = pred is not None and q.usable
        pred_cat, pred_types = pred if pred is not None else ("", [])

        ok3 = 1 if scoreable and pred_cat == q.category else 0
        match3.append(ok3)
        per_cat[q.category].append(ok3)
        gold_flat = q.flat
        pred_flat = None
        if scoreable:
            try:
                pred_flat = flatten_category(pred_cat, pred_types)
            except ValidationError:
                pred_flat = None
        match5.append(1 if pred_flat is not None and pred_flat == gold_flat else 0)

        if q.category == "boolean":
            continue
        if q.category == "literal":
            correct = (
                scoreable
                and pred_cat == "literal"
                and len(pred_types) >= 1
                and pred_types[0] == q.types[0]
            )
            value = 1.0 if correct else 0.0
            type_scores5.append(value)
            type_scores10.append(value)
            continue
        # gold resource
        if not q.types:
            n_skipped += 1
            continue
        if not scoreable or pred_cat != "resource" or not pred_types:
            type_scores5.append(0.0)
            type_scores10.append(0.0)
            continue
        gold_set = set(q.types)
        if mode == "dbpedia":
            type_scores5.append(ndcg_at_k(pred_types, gold_set, hier, k=5))
            type_scores10.append(ndcg_at_k(pred_types, gold_set, hier, k=10))
        else:
            rr = reciprocal_rank(pred_types, gold_set)
            type_scores5.append(rr)
            type_scores10.append(rr)

    if not match3:
        raise ValidationError("gold set is empty")

    report = EvalReport(
        mode=mode,
        n_questions=len(gold),
        n_missing=n_missing,
        n_unusable=n_unusable,
        n_skipped_empty_gold=n_skipped,
        accuracy_3way=sum(match3) / len(match3),
        accuracy_5way=sum(match5) / len(match5),
        per_category_accuracy={
            c: sum(v) / len(v) for c, v in per_cat.items() if v
        },
        n_type_scored=len(type_scores5),
        metadata=dict(run.metadata),
    )
    if type_scores5:
        if mode == "dbpedia":
            report.ndcg5 = sum(type_scores5) / len(type_scores5)
            report.ndcg10 = sum(type_scores10) / len(type_scores10)
        else:
            report.mrr = sum(type_scores5) / len(type_scores5)
    else:
        if mode == "dbpedia":
            report.ndcg5 = report.ndcg10 = 0.0
        else:
            report.mrr = 0.0
    return report


@dataclass
class ErrorAnalysis:
    rows: list[tuple[str, int, int]]  # (type, total gold occurrences, miss count)

    def to_text(self) -> str:
        lines = ["type\t#Total\t#Errors"]
        lines += [f"{t}\t{total}\t{miss}" for t, total, miss in self.rows]
        return "\n".join(lines) + "\n"

    def to_json(self) -> str:
        return json.dumps(
            [{"type": t, "total": total, "errors": miss} for t, total, miss in self.rows],
            indent=2,
        )


def error_analysis(run: PredictionRun, gold: QuestionSet, n: int = 10) -> ErrorAnalysis:
    """Top-n gold resource types most often missing from the predicted lists.

    Types that are never missed are left out, so a perfect run yields an
    empty table.
    """
    totals: Counter[str] = Counter()
    misses: Counter[str] = Counter()
    for q in gold:
        if q.category != "resource":
            continue
        pred = run.predictions.get(q.id)
        predicted = set(pred[1]) if pred is not None else set()
        for t in q.types:
            totals[t] += 1
            if t not in predicted:
                misses[t] += 1
    ordered = sorted((t for t in totals if misses[t] > 0),
                     key=lambda t: (-misses[t], -totals[t], t))
    return ErrorAnalysis(rows=[(t, totals[t], misses[t]) for t in ordered[:n]])
