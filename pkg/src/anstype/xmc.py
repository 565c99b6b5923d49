"""Extreme multi-label type prediction.

Three stages mirror the classic XMC decomposition: label embeddings are
clustered to shrink the label space (semantic label indexing), a linear
matcher scores clusters and the labels inside them, and a small linear
ensemble ranker fuses cluster score, label score, and label prior into the
final type ranking. Matchers are sparse linear one-vs-rest models, kept
deterministic and desk-scale; externally computed per-question label
scores can be imported instead (see :class:`ImportedTypeScores`).
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import ValidationError
from .linear import SGDParams, train_hinge_ovr, vectors_to_csr
from .ranking import RankedTypeList, ranked_type_list
from .textproc import SparseVector

log = logging.getLogger(__name__)

LABEL_INDEX_FORMAT = "anstype-labelindex-v1"
MATCHER_FORMAT = "anstype-matchers-v1"
RANKER_FORMAT = "anstype-ranker-v1"

FALLBACK_RANKER_WEIGHTS = (1.0, 1.0, 0.1)  # (cluster score, label score, prior)
MIN_RANKER_FOLD = 50

DEFAULT_BRANCHING = 8
DEFAULT_MAX_LEAF = 64
DEFAULT_BEAM = 4


@dataclass
class LabelEmbeddings:
    """Per-label sparse embeddings: normalized sums of positive question vectors."""

    labels: tuple[str, ...]
    matrix: sp.csr_matrix  # (n_labels, n_features), rows L2-normalized or zero

    def vector(self, label: str) -> SparseVector:
        row = self.matrix[self.labels.index(label)]
        return SparseVector(row.indices.astype(np.int32), row.data.astype(np.float64))

    def zero_rows(self) -> list[int]:
        counts = np.diff(self.matrix.indptr)
        return [i for i in range(len(self.labels)) if counts[i] == 0]


def build_label_embeddings(
    vectors: list[SparseVector],
    gold_types: list[tuple[str, ...]],
    n_features: int,
    labels: tuple[str, ...] | None = None,
) -> LabelEmbeddings:
    """Positive-instance aggregation: embedding(l) = normalize(sum of l's questions).

    ``labels`` fixes the label universe; by default it is the sorted set of
    labels occurring in ``gold_types``. Labels without positives keep a zero
    embedding (they are routed to the overflow cluster later).
    """
    if len(vectors) != len(gold_types):
        raise ValidationError("vectors and gold type lists differ in length")
    if labels is None:
        labels = tuple(sorted({t for ts in gold_types for t in ts}))
    pos = {label: i for i, label in enumerate(labels)}
    X = vectors_to_csr(vectors, n_features)
    rows, cols, vals = [], [], []
    for q_idx, ts in enumerate(gold_types):
        for t in set(ts):
            if t in pos:
                rows.append(pos[t])
                cols.append(q_idx)
                vals.append(1.0)
    member = sp.csr_matrix((vals, (rows, cols)), shape=(len(labels), len(vectors)))
    summed = member @ X
    norms = np.sqrt(np.asarray(summed.multiply(summed).sum(axis=1)).ravel())
    scale = np.divide(1.0, norms, out=np.zeros_like(norms), where=norms > 0)
    emb = sp.diags(scale) @ summed
    emb = sp.csr_matrix(emb)
    emb.sort_indices()
    return LabelEmbeddings(labels=labels, matrix=emb)


@dataclass
class LabelIndex:
    clusters: list[tuple[str, ...]]
    branching: int
    max_leaf: int
    depth: int
    seed: int
    overflow: int | None  # index of the zero-embedding overflow cluster
    cluster_bound: int

    def __post_init__(self):
        self._cluster_of = {
            label: c for c, members in enumerate(self.clusters) for label in members
        }

    @property
    def n_clusters(self) -> int:
        return len(self.clusters)

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(sorted(self._cluster_of))

    def cluster_of(self, label: str) -> int:
        return self._cluster_of[label]

    def save(self, path) -> None:
        payload = {
            "format": LABEL_INDEX_FORMAT,
            "branching": self.branching,
            "max_leaf": self.max_leaf,
            "depth": self.depth,
            "seed": self.seed,
            "overflow": self.overflow,
            "cluster_bound": self.cluster_bound,
            "clusters": [list(c) for c in self.clusters],
        }
        Path(path).write_text(json.dumps(payload, indent=1), encoding="utf-8")

    @classmethod
    def load(cls, path) -> "LabelIndex":
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
        if payload.get("format") != LABEL_INDEX_FORMAT:
            raise ValidationError(f"unsupported label index format {payload.get('format')!r}")
        return cls(
            clusters=[tuple(c) for c in payload["clusters"]],
            branching=payload["branching"],
            max_leaf=payload["max_leaf"],
            depth=payload["depth"],
            seed=payload["seed"],
            overflow=payload["overflow"],
            cluster_bound=payload["cluster_bound"],
        )


def _balanced_assign(sims: np.ndarray, capacity: int) -> np.ndarray:
    """Greedy balanced assignment: best (point, cluster) similarities first."""
    n, k = sims.shape
    order = np.argsort(-sims, axis=None, kind="stable")
    assign = np.full(n, -1, dtype=np.int64)
    sizes = np.zeros(k, dtype=np.int64)
    placed = 0
    for flat in order:
        p, c = divmod(int(flat), k)
        if assign[p] == -1 and sizes[c] < capacity:
            assign[p] = c
            sizes[c] += 1
            placed += 1
            if placed == n:
                break
    return assign


def _spherical_kmeans_balanced(
    X: sp.csr_matrix, k: int, seed: int, max_iter: int = 20
) -> np.ndarray:
    """Balanced spherical k-means on L2-normalized rows.

    During iterations sibling cluster sizes differ by at most one; a final
    nearest-centroid reassignment pass may then relax the balance, with
    every size kept within a factor two of the balanced size n/k.
    """
    n = X.shape[0]
    rng = np.random.default_rng(seed)
    start = rng.choice(n, size=k, replace=False)
    centroids = np.asarray(X[start].todense())

    capacity = math.ceil(n / k)
    assign = np.full(n, -1, dtype=np.int64)
    for _ in range(max_iter):
        sims = np.asarray((X @ centroids.T))
        new_assign = _balanced_assign(sims, capacity)
        if np.array_equal(new_assign, assign):
            break
        assign = new_assign
        for c in range(k):
            members = np.where(assign == c)[0]
            centroid = np.asarray(X[members].sum(axis=0)).ravel()
            norm = np.linalg.norm(centroid)
            if norm > 0:
                centroids[c] = centroid / norm

    # Convergence reassignment: points may move to their best centroid as
    # long as sizes stay within [ceil(cap/2), 2*cap].
    sims = np.asarray(X @ centroids.T)
    sizes = np.bincount(assign, minlength=k)
    lo, hi = math.ceil(capacity / 2), 2 * capacity
    best = np.argmax(sims, axis=1)
    for p in range(n):
        src, dst = assign[p], int(best[p])
        if dst != src and sizes[dst] < hi and sizes[src] > lo:
            assign[p] = dst
            sizes[src] -= 1
            sizes[dst] += 1
    return assign


def cluster_labels(
    emb: LabelEmbeddings,
    branching: int = DEFAULT_BRANCHING,
    max_leaf: int = DEFAULT_MAX_LEAF,
    seed: int = 0,
) -> LabelIndex:
    """Recursive balanced spherical k-means until every leaf holds <= max_leaf labels.

    Zero-embedding labels are collected into a designated overflow cluster
    appended after the clustered leaves. Deterministic for a fixed seed.
    """
    if branching < 2:
        raise ValidationError(f"branching must be >= 2, got {branching}")
    if max_leaf < 1:
        raise ValidationError(f"max_leaf must be >= 1, got {max_leaf}")

    zero = set(emb.zero_rows())
    live = np.array([i for i in range(len(emb.labels)) if i not in zero], dtype=np.int64)

    leaves: list[np.ndarray] = []
    max_depth = 0

    def split(rows: np.ndarray, node_seed: int, depth: int) -> None:
        nonlocal max_depth
        max_depth = max(max_depth, depth)
        if len(rows) <= max_leaf:
            leaves.append(rows)
            return
        k = min(branching, math.ceil(len(rows) / max_leaf), len(rows))
        assign = _spherical_kmeans_balanced(emb.matrix[rows], k, node_seed)
        for c in range(k):
            split(rows[assign == c], node_seed * 1000003 + c + 1 & 0x7FFFFFFF, depth + 1)

    if len(live):
        split(live, seed, 1)

    clusters = [tuple(sorted(emb.labels[i] for i in leaf)) for leaf in leaves if len(leaf)]
    overflow = None
    if zero:
        clusters.append(tuple(sorted(emb.labels[i] for i in zero)))
        overflow = len(clusters) - 1

    bound = math.ceil(len(emb.labels) / max(1, max_leaf // 4)) + 1
    if len(clusters) > bound:
        raise AssertionError(
            f"cluster count {len(clusters)} exceeds documented bound {bound}"
        )
    return LabelIndex(
        clusters=clusters,
        branching=branching,
        max_leaf=max_leaf,
        depth=max_depth,
        seed=seed,
        overflow=overflow,
        cluster_bound=bound,
    )


@dataclass
class ClusterScorer:
    """Per-cluster one-vs-rest label models over the cluster's feature subspace."""

    labels: tuple[str, ...]
    feature_ids: np.ndarray  # sorted subspace columns, empty if prior_only
    W: np.ndarray            # (n_labels, len(feature_ids))
    b: np.ndarray            # (n_labels,)
    prior_only: bool = False

    def scores(self, x: SparseVector) -> np.ndarray:
        if self.prior_only or len(self.feature_ids) == 0:
            return self.b.copy()
        pos = np.searchsorted(self.feature_ids, x.ids)
        mask = (pos < len(self.feature_ids)) & (self.feature_ids[np.minimum(pos, len(self.feature_ids) - 1)] == x.ids)
        if not mask.any():
            return self.b.copy()
        return self.W[:, pos[mask]] @ x.weights[mask] + self.b


@dataclass
class MatcherModel:
    index: LabelIndex
    cluster_W: np.ndarray  # (n_clusters, n_features)
    cluster_b: np.ndarray
    scorers: list[ClusterScorer]
    label_priors: dict[str, float]
    params: SGDParams
    n_features: int

    def cluster_scores(self, x: SparseVector) -> np.ndarray:
        if len(x.ids) == 0:
            return self.cluster_b.copy()
        if int(x.ids[-1]) >= self.n_features:
            raise ValidationError(
                f"term id {int(x.ids[-1])} outside matcher dimension {self.n_features}"
            )
        return self.cluster_W[:, x.ids] @ x.weights + self.cluster_b

    def label_scores(self, x: SparseVector, cluster: int) -> dict[str, float]:
        scorer = self.scorers[cluster]
        vals = scorer.scores(x)
        return {label: float(v) for label, v in zip(scorer.labels, vals)}

    def prior(self, label: str) -> float:
        return self.label_priors.get(label, 0.0)

    def save(self, path) -> None:
        arrays: dict[str, np.ndarray] = {
            "cluster_W": self.cluster_W,
            "cluster_b": self.cluster_b,
        }
        meta = {
            "format": MATCHER_FORMAT,
            "params": vars(self.params) | {},
            "n_features": self.n_features,
            "priors": self.label_priors,
            "scorers": [],
        }
        for i, s in enumerate(self.scorers):
            meta["scorers"].append(
                {"labels": list(s.labels), "prior_only": s.prior_only}
            )
            arrays[f"feat_{i}"] = s.feature_ids
            arrays[f"W_{i}"] = s.W
            arrays[f"b_{i}"] = s.b
        with open(path, "wb") as fh:
            np.savez(fh, meta=np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8), **arrays)

    @classmethod
    def load(cls, path, index: LabelIndex) -> "MatcherModel":
        with np.load(path) as npz:
            meta = json.loads(npz["meta"].tobytes().decode())
            if meta.get("format") != MATCHER_FORMAT:
                raise ValidationError(f"unsupported matcher format {meta.get('format')!r}")
            scorers = [
                ClusterScorer(
                    labels=tuple(entry["labels"]),
                    feature_ids=npz[f"feat_{i}"],
                    W=npz[f"W_{i}"],
                    b=npz[f"b_{i}"],
                    prior_only=entry["prior_only"],
                )
                for i, entry in enumerate(meta["scorers"])
            ]
            return cls(
                index=index,
                cluster_W=npz["cluster_W"],
                cluster_b=npz["cluster_b"],
                scorers=scorers,
                label_priors=meta["priors"],
                params=SGDParams(**meta["params"]),
                n_features=meta["n_features"],
            )


def train_matchers(
    index: LabelIndex,
    vectors: list[SparseVector],
    gold_types: list[tuple[str, ...]],
    n_features: int,
    params: SGDParams = SGDParams(),
) -> MatcherModel:
    """Train the cluster router and the per-cluster label models.

    A question's target clusters are all clusters containing any of its gold
    labels (multi-positive one-vs-rest); label models are trained only on
    the questions routed to their cluster by gold labels. Clusters with no
    positive questions fall back to prior-only scoring with a warning.
    """
    if len(vectors) != len(gold_types):
        raise ValidationError("vectors and gold type lists differ in length")
    if not vectors:
        raise ValidationError("empty training data")
    X = vectors_to_csr(vectors, n_features)
    n = len(vectors)
    n_clusters = index.n_clusters

    gold_clusters: list[set[int]] = []
    known = set(index.labels)
    for ts in gold_types:
        gold_clusters.append({index.cluster_of(t) for t in ts if t in known})

    # Cluster router. Degenerate single-cluster index routes everything there.
    if n_clusters == 1:
        cluster_W = np.zeros((1, n_features))
        cluster_b = np.zeros(1)
    else:
        Yc = np.full((n, n_clusters), -1.0)
        for i, cs in enumerate(gold_clusters):
            for c in cs:
                Yc[i, c] = 1.0
        cluster_W, cluster_b, _ = train_hinge_ovr(X, Yc, params)

    counts: dict[str, int] = {label: 0 for label in index.labels}
    for ts in gold_types:
        for t in set(ts):
            if t in counts:
                counts[t] += 1
    priors = {label: counts[label] / n for label in counts}

    scorers: list[ClusterScorer] = []
    for c, members in enumerate(index.clusters):
        routed = [i for i in range(n) if c in gold_clusters[i]]
        if not routed:
            log.warning("cluster %d has no positive questions; prior-only scoring", c)
            scorers.append(
                ClusterScorer(
                    labels=members,
                    feature_ids=np.array([], dtype=np.int32),
                    W=np.zeros((len(members), 0)),
                    b=np.zeros(len(members)),
                    prior_only=True,
                )
            )
            continue
        sub = X[routed]
        feature_ids = np.unique(sub.indices).astype(np.int64)
        sub = sp.csr_matrix(sub[:, feature_ids])
        Yl = np.full((len(routed), len(members)), -1.0)
        for row, i in enumerate(routed):
            gold = set(gold_types[i])
            for j, label in enumerate(members):
                if label in gold:
                    Yl[row, j] = 1.0
        W, b, _ = train_hinge_ovr(sub, Yl, params)
        scorers.append(ClusterScorer(labels=members, feature_ids=feature_ids, W=W, b=b))

    return MatcherModel(
        index=index,
        cluster_W=cluster_W,
        cluster_b=cluster_b,
        scorers=scorers,
        label_priors=priors,
        params=params,
        n_features=n_features,
    )


@dataclass
class EnsembleRanker:
    """Linear fusion of (cluster score, label score, label prior)."""

    weights: np.ndarray  # (3,)
    fallback: bool = False
    loss_history: list[float] = field(default_factory=list)

    def score(self, features: np.ndarray) -> np.ndarray:
        return np.asarray(features) @ self.weights

    def save(self, path) -> None:
        payload = {
            "format": RANKER_FORMAT,
            "weights": self.weights.tolist(),
            "fallback": self.fallback,
            "loss_history": self.loss_history,
        }
        Path(path).write_text(json.dumps(payload, indent=1), encoding="utf-8")

    @classmethod
    def load(cls, path) -> "EnsembleRanker":
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
        if payload.get("format") != RANKER_FORMAT:
            raise ValidationError(f"unsupported ranker format {payload.get('format')!r}")
        return cls(
            weights=np.array(payload["weights"]),
            fallback=payload["fallback"],
            loss_history=list(payload["loss_history"]),
        )


def _candidate_features(
    matcher: MatcherModel, x: SparseVector, clusters: list[int]
) -> tuple[list[str], np.ndarray]:
    """Feature rows (cluster score, label score, prior) for all labels in clusters."""
    cscores = matcher.cluster_scores(x)
    labels: list[str] = []
    rows: list[tuple[float, float, float]] = []
    for c in clusters:
        for label, lscore in matcher.label_scores(x, c).items():
            labels.append(label)
            rows.append((float(cscores[c]), lscore, matcher.prior(label)))
    return labels, np.array(rows, dtype=np.float64).reshape(len(labels), 3)


def predict_types_xmc(
    matcher: MatcherModel,
    ranker: EnsembleRanker,
    x: SparseVector,
    beam: int = DEFAULT_BEAM,
    k: int = 10,
) -> RankedTypeList:
    """Rank types: score top-beam clusters, their labels, then fuse and cut at k."""
    if k < 1:
        raise ValidationError(f"k must be >= 1, got {k}")
    if beam < 1:
        raise ValidationError(f"beam must be >= 1, got {beam}")
    cscores = matcher.cluster_scores(x)
    order = sorted(range(len(cscores)), key=lambda c: (-cscores[c], c))
    top = order[: min(beam, len(order))]
    labels, feats = _candidate_features(matcher, x, top)
    if not labels:
        return []
    final = ranker.score(feats)
    return ranked_type_list({label: float(s) for label, s in zip(labels, final)}, top=k)


def train_ensemble_ranker(
    matcher: MatcherModel,
    vectors: list[SparseVector],
    gold_types: list[tuple[str, ...]],
    params: SGDParams = SGDParams(C=100.0, epochs=30, batch_size=64, eta0=1.0, fit_intercept=False),
    negatives_per_gold: int = 40,
    min_fold: int = MIN_RANKER_FOLD,
) -> EnsembleRanker:
    """Fit ranker weights by pairwise hinge on (relevant, irrelevant) label pairs.

    The held-out fold must be disjoint from the matcher's training data.
    Folds with fewer than ``min_fold`` usable questions fall back to the
    fixed weights (1, 1, 0.1).
    """
    known = set(matcher.index.labels)
    usable = [
        (x, ts) for x, ts in zip(vectors, gold_types) if any(t in known for t in ts)
    ]
    if len(usable) < min_fold:
        log.warning(
            "ranker fold has %d usable questions (< %d); using fallback weights",
            len(usable), min_fold,
        )
        return EnsembleRanker(weights=np.array(FALLBACK_RANKER_WEIGHTS), fallback=True)

    all_clusters = list(range(matcher.index.n_clusters))
    diffs: list[np.ndarray] = []
    for x, ts in usable:
        labels, feats = _candidate_features(matcher, x, all_clusters)
        gold = {t for t in ts if t in known}
        by_label = {label: feats[i] for i, label in enumerate(labels)}
        neg = [
            (label, feats[i])
            for i, label in enumerate(labels)
            if label not in gold
        ]
        neg.sort(key=lambda item: (-item[1][1], item[0]))  # hardest by label score
        neg = neg[:negatives_per_gold]
        for g in sorted(gold):
            if g not in by_label:
                continue
            for _, nf in neg:
                diffs.append(by_label[g] - nf)
    if not diffs:
        log.warning("no training pairs for the ranker; using fallback weights")
        return EnsembleRanker(weights=np.array(FALLBACK_RANKER_WEIGHTS), fallback=True)

    D = sp.csr_matrix(np.vstack(diffs))
    Y = np.ones((D.shape[0], 1))
    W, _, losses = train_hinge_ovr(D, Y, params)
    return EnsembleRanker(weights=W.ravel(), fallback=False, loss_history=losses)


class ImportedTypeScores:
    """Stage-2 scores imported from file: JSON map question-id -> label -> score."""

    def __init__(self, scores: dict[str, dict[str, float]]):
        self.scores = scores

    @classmethod
    def load(cls, path) -> "ImportedTypeScores":
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls({qid: {t: float(s) for t, s in m.items()} for qid, m in raw.items()})

    def rank_for_id(self, qid: str, k: int = 10) -> RankedTypeList:
        if qid not in self.scores:
            raise ValidationError(f"no imported type scores for question {qid!r}")
        return ranked_type_list(self.scores[qid], top=k)
