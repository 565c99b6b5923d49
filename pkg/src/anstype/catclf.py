"""Stage-1 category classifier: one-vs-rest linear max-margin models.

Five binary hinge-loss models over TF-IDF vectors, one per flat category,
trained with the deterministic subgradient core in :mod:`anstype.linear`.
Prediction is the argmax of the per-class decision values, ties broken by
the fixed class order boolean < literal-date < literal-number <
literal-string < resource.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dataset import FLAT_ORDER, FlatCategory
from .errors import ValidationError
from .linear import SGDParams, train_hinge_ovr, vectors_to_csr
from .textproc import SparseVector

MODEL_FORMAT = "anstype-catclf-v1"


@dataclass
class LinearModel:
    classes: tuple[FlatCategory, ...]
    W: np.ndarray  # (5, n_features)
    b: np.ndarray  # (5,)
    params: SGDParams
    vocab_hash: str = ""
    loss_history: list[float] = field(default_factory=list)

    @property
    def n_features(self) -> int:
        return self.W.shape[1]

    def decision_values(self, x: SparseVector) -> np.ndarray:
        if len(x.ids) and int(x.ids[-1]) >= self.n_features:
            raise ValidationError(
                f"term id {int(x.ids[-1])} outside model dimension {self.n_features}"
            )
        if len(x.ids) == 0:
            return self.b.copy()
        return self.W[:, x.ids] @ x.weights + self.b

    def save(self, path) -> None:
        meta = {
            "format": MODEL_FORMAT,
            "classes": [c.value for c in self.classes],
            "params": vars(self.params) | {},
            "vocab_hash": self.vocab_hash,
            "loss_history": self.loss_history,
        }
        with open(path, "wb") as fh:
            np.savez(fh, meta=np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8),
                     W=self.W, b=self.b)

    @classmethod
    def load(cls, path) -> "LinearModel":
        with np.load(path) as npz:
            meta = json.loads(npz["meta"].tobytes().decode())
            if meta.get("format") != MODEL_FORMAT:
                raise ValidationError(f"unsupported model format {meta.get('format')!r}")
            return cls(
                classes=tuple(FlatCategory(c) for c in meta["classes"]),
                W=npz["W"],
                b=npz["b"],
                params=SGDParams(**meta["params"]),
                vocab_hash=meta["vocab_hash"],
                loss_history=list(meta["loss_history"]),
            )


def train_category_classifier(
    X: list[SparseVector],
    y: list[FlatCategory],
    params: SGDParams = SGDParams(),
    n_features: int | None = None,
    vocab_hash: str = "",
) -> LinearModel:
    """Train the 5-way one-vs-rest classifier.

    All five class rows exist even when a class is absent from y (its model
    then sees only negatives); at least two distinct classes are required.
    """
    if len(X) != len(y):
        raise ValidationError(f"{len(X)} vectors but {len(y)} labels")
    if not X:
        raise ValidationError("empty training set")
    if len(set(y)) < 2:
        raise ValidationError("training data contains a single class")
    if n_features is None:
        n_features = max((int(v.ids[-1]) + 1 for v in X if len(v.ids)), default=0)

    Xm = vectors_to_csr(X, n_features)
    Y = np.full((len(y), len(FLAT_ORDER)), -1.0)
    index = {c: j for j, c in enumerate(FLAT_ORDER)}
    for i, label in enumerate(y):
        Y[i, index[label]] = 1.0
    W, b, losses = train_hinge_ovr(Xm, Y, params)
    return LinearModel(
        classes=FLAT_ORDER, W=W, b=b, params=params,
        vocab_hash=vocab_hash, loss_history=losses,
    )


def predict_category(model: LinearModel, x: SparseVector) -> tuple[FlatCategory, np.ndarray]:
    """Predicted flat category and the 5 per-class decision values."""
    scores = model.decision_values(x)
    # np.argmax takes the first maximum, which matches the tie-break class order
    return model.classes[int(np.argmax(scores))], scores


def accuracy(pred: list, gold: list) -> float:
    """Fraction of exact matches between two equal-length label lists."""
    if len(pred) != len(gold):
        raise ValidationError(f"length mismatch: {len(pred)} vs {len(gold)}")
    if not pred:
        raise ValidationError("empty prediction list")
    return sum(p == g for p, g in zip(pred, gold)) / len(pred)


class ImportedCategories:
    """Stage-1 predictions imported from file: JSON map id -> flat category.

    Lets an externally trained classifier (e.g. a fine-tuned transformer)
    drive the pipeline without being trained here.
    """

    def __init__(self, mapping: dict[str, FlatCategory]):
        self.mapping = mapping

    @classmethod
    def load(cls, path) -> "ImportedCategories":
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls({qid: FlatCategory(v) for qid, v in raw.items()})

    def predict_for_id(self, qid: str) -> FlatCategory:
        if qid not in self.mapping:
            raise ValidationError(f"no imported category for question {qid!r}")
        return self.mapping[qid]
