"""Tokenization, vocabulary construction, and TF-IDF sparse vectors.

The vocabulary (term ids and document frequencies) is fitted on training
text only; transforming unseen text simply drops out-of-vocabulary terms.
"""

from __future__ import annotations

import json
import hashlib
import re
from collections import Counter
from dataclasses import dataclass

import numpy as np

VOCAB_FORMAT = "anstype-vocab-v1"

# Maximal runs of >=2 alphanumeric characters, after lowercasing.
_TOKEN_RE = re.compile(r"[^\W_]{2,}", re.UNICODE)


def tokenize(text: str) -> list[str]:
    """Lowercase and split into maximal alphanumeric runs of length >= 2."""
    if not text:
        return []
    return _TOKEN_RE.findall(text.lower())


@dataclass(frozen=True)
class SparseVector:
    """Sorted sparse feature vector: strictly increasing term ids, no zeros."""

    ids: np.ndarray      # int32, strictly increasing
    weights: np.ndarray  # float64, nonzero

    def __post_init__(self):
        if len(self.ids) != len(self.weights):
            raise ValueError("ids and weights length mismatch")

    def __len__(self) -> int:
        return len(self.ids)

    def l2_norm(self) -> float:
        return float(np.sqrt(np.sum(self.weights**2)))

    def dot_dense(self, dense: np.ndarray) -> float:
        """Dot product against a dense vector indexed by term id."""
        if len(self.ids) and self.ids[-1] >= dense.shape[-1]:
            raise ValueError(
                f"term id {self.ids[-1]} out of range for dimension {dense.shape[-1]}"
            )
        return float(dense[self.ids] @ self.weights)

    def scaled(self, factor: float) -> "SparseVector":
        return SparseVector(self.ids, self.weights * factor)


def sparse_from_counts(counts: dict[int, float]) -> SparseVector:
    """Build a SparseVector from an id -> weight map, dropping zeros."""
    items = sorted((i, w) for i, w in counts.items() if w != 0.0)
    ids = np.array([i for i, _ in items], dtype=np.int32)
    weights = np.array([w for _, w in items], dtype=np.float64)
    return SparseVector(ids, weights)


def sparse_sum(vectors: list[SparseVector]) -> SparseVector:
    """Sum of sparse vectors (exact accumulation in id order)."""
    acc: dict[int, float] = {}
    for v in vectors:
        for i, w in zip(v.ids.tolist(), v.weights.tolist()):
            acc[i] = acc.get(i, 0.0) + w
    return sparse_from_counts(acc)


class Vocabulary:
    """Term -> id map with per-term document frequencies.

    Term ids are assigned by first-occurrence document, ties within a
    document broken lexicographically, so refitting the same corpus yields
    an identical vocabulary.
    """

    def __init__(self, term_ids: dict[str, int], df: np.ndarray, n_docs: int):
        self.term_ids = term_ids
        self.df = df
        self.n_docs = n_docs
        # idf(t) = ln((1 + N) / (1 + df(t))) + 1, smoothed convention
        self.idf = np.log((1.0 + n_docs) / (1.0 + df)) + 1.0

    def __len__(self) -> int:
        return len(self.term_ids)

    def __contains__(self, term: str) -> bool:
        return term in self.term_ids

    def to_json(self) -> str:
        terms = sorted(self.term_ids.items(), key=lambda kv: kv[1])
        payload = {
            "format": VOCAB_FORMAT,
            "n_docs": self.n_docs,
            "terms": [[t, i, int(self.df[i])] for t, i in terms],
        }
        return json.dumps(payload, ensure_ascii=False)

    @classmethod
    def from_json(cls, blob: str) -> "Vocabulary":
        payload = json.loads(blob)
        if payload.get("format") != VOCAB_FORMAT:
            raise ValueError(f"unsupported vocabulary format: {payload.get('format')!r}")
        term_ids = {t: i for t, i, _ in payload["terms"]}
        df = np.zeros(len(term_ids), dtype=np.int64)
        for _, i, d in payload["terms"]:
            df[i] = d
        return cls(term_ids, df, payload["n_docs"])

    def content_hash(self) -> str:
        return hashlib.sha256(self.to_json().encode("utf-8")).hexdigest()


def fit_vocabulary(train_texts: list[str]) -> Vocabulary:
    """Build the vocabulary from training text only.

    Document frequency counts documents containing a term, not occurrences.
    Raises ValueError if no document yields any token.
    """
    if not train_texts:
        raise ValueError("cannot fit a vocabulary on an empty corpus")
    first_doc: dict[str, int] = {}
    df_counter: Counter[str] = Counter()
    for doc_idx, text in enumerate(train_texts):
        seen = set(tokenize(text))
        for term in seen:
            df_counter[term] += 1
            if term not in first_doc:
                first_doc[term] = doc_idx
    if not df_counter:
        raise ValueError("corpus produced no tokens")
    ordered = sorted(first_doc, key=lambda t: (first_doc[t], t))
    term_ids = {t: i for i, t in enumerate(ordered)}
    df = np.zeros(len(ordered), dtype=np.int64)
    for t, i in term_ids.items():
        df[i] = df_counter[t]
    return Vocabulary(term_ids, df, len(train_texts))


def vectorize(vocab: Vocabulary, text: str) -> SparseVector:
    """TF-IDF vector of `text` under `vocab`, L2-normalized.

    weight(t) = tf(t) * idf(t); out-of-vocabulary terms contribute nothing.
    A text with no in-vocabulary terms yields an empty vector.
    """
    counts = Counter(tokenize(text))
    pairs = sorted(
        (vocab.term_ids[t], tf) for t, tf in counts.items() if t in vocab.term_ids
    )
    if not pairs:
        return SparseVector(np.array([], dtype=np.int32), np.array([], dtype=np.float64))
    ids = np.array([i for i, _ in pairs], dtype=np.int32)
    tf = np.array([c for _, c in pairs], dtype=np.float64)
    weights = tf * vocab.idf[ids]
    norm = np.sqrt(np.sum(weights**2))
    return SparseVector(ids, weights / norm)
