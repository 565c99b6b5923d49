"""Unsupervised BM25 baselines for type ranking.

Two fusion strategies over a corpus of typed entity abstracts:

* type-centric (early fusion): one pseudo-document per type, formed by
  concatenating the abstracts of every entity bearing that type, ranked
  directly with BM25;
* entity-centric (late fusion): retrieve the top-k entities with BM25,
  then aggregate the entity scores onto the types they bear (sum by
  default, max behind a flag).

Entity corpus format: TSV lines ``entity-id<TAB>abstract<TAB>label,label,...``.
"""

from __future__ import annotations

import json
import logging
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from .errors import DataFormatError, ValidationError
from .ranking import RankedTypeList, ranked_type_list
from .textproc import tokenize

log = logging.getLogger(__name__)

INDEX_FORMAT = "anstype-index-v1"

BM25_K1 = 1.2
BM25_B = 0.75
DEFAULT_ENTITY_CUTOFF = 20

Entity = tuple[str, str, tuple[str, ...]]  # (entity id, abstract, type labels)


@dataclass
class InvertedIndex:
    """BM25-ready inverted index over documents labeled with strings.

    ``doc_types`` is populated for entity indexes only, mapping each doc to
    the type labels its entity bears.
    """

    kind: str  # "type" or "entity"
    terms: dict[str, int]
    postings: dict[int, list[tuple[int, int]]]  # term id -> [(doc, tf)], doc ascending
    doc_lens: np.ndarray
    doc_labels: list[str]
    doc_types: list[tuple[str, ...]] | None = None
    k1: float = BM25_K1
    b: float = BM25_B
    skipped_untyped: int = 0

    @property
    def n_docs(self) -> int:
        return len(self.doc_labels)

    @property
    def avg_len(self) -> float:
        return float(self.doc_lens.mean())

    def idf(self, term_id: int) -> float:
        df = len(self.postings[term_id])
        raw = np.log(1.0 + (self.n_docs - df + 0.5) / (df + 0.5))
        return float(max(raw, 0.0))

    def save(self, path) -> None:
        payload = {
            "format": INDEX_FORMAT,
            "kind": self.kind,
            "params": {"k1": self.k1, "b": self.b},
            "skipped_untyped": self.skipped_untyped,
            "doc_labels": self.doc_labels,
            "doc_types": [list(t) for t in self.doc_types] if self.doc_types is not None else None,
        }
        terms = sorted(self.terms.items(), key=lambda kv: kv[1])
        flat_tid, flat_doc, flat_tf = [], [], []
        for _, tid in terms:
            for doc, tf in self.postings[tid]:
                flat_tid.append(tid)
                flat_doc.append(doc)
                flat_tf.append(tf)
        with open(path, "wb") as fh:
            np.savez(
                fh,
                meta=np.frombuffer(json.dumps(payload).encode(), dtype=np.uint8),
                term_strings=np.array([t for t, _ in terms], dtype=object),
                post_tid=np.array(flat_tid, dtype=np.int64),
                post_doc=np.array(flat_doc, dtype=np.int64),
                post_tf=np.array(flat_tf, dtype=np.int64),
                doc_lens=self.doc_lens,
            )

    @classmethod
    def load(cls, path) -> "InvertedIndex":
        with np.load(path, allow_pickle=True) as npz:
            meta = json.loads(npz["meta"].tobytes().decode())
            if meta.get("format") != INDEX_FORMAT:
                raise ValidationError(f"unsupported index format {meta.get('format')!r}")
            terms = {t: i for i, t in enumerate(npz["term_strings"].tolist())}
            postings: dict[int, list[tuple[int, int]]] = {i: [] for i in terms.values()}
            for tid, doc, tf in zip(npz["post_tid"], npz["post_doc"], npz["post_tf"]):
                postings[int(tid)].append((int(doc), int(tf)))
            return cls(
                kind=meta["kind"],
                terms=terms,
                postings=postings,
                doc_lens=npz["doc_lens"],
                doc_labels=list(meta["doc_labels"]),
                doc_types=[tuple(t) for t in meta["doc_types"]] if meta["doc_types"] is not None else None,
                k1=meta["params"]["k1"],
                b=meta["params"]["b"],
                skipped_untyped=meta["skipped_untyped"],
            )


def read_entity_file(path: str | Path) -> Iterator[Entity]:
    """Stream entities from the TSV corpus format."""
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            fields = line.rstrip("\n").split("\t")
            if len(fields) != 3:
                raise DataFormatError(f"{path}:{lineno}: expected 3 tab-separated fields")
            eid, abstract, labels = fields
            types = tuple(t for t in labels.split(",") if t)
            yield eid, abstract, types


def _build(entities: Iterable[Entity], per_type: bool) -> InvertedIndex:
    doc_ids: dict[str, int] = {}
    doc_counts: list[Counter[str]] = []
    doc_lens: list[int] = []
    doc_types: list[tuple[str, ...]] = []
    skipped = 0
    n_entities = 0
    for eid, abstract, types in entities:
        n_entities += 1
        if not types:
            skipped += 1
            continue
        tokens = tokenize(abstract)
        if per_type:
            for t in types:
                if t not in doc_ids:
                    doc_ids[t] = len(doc_ids)
                    doc_counts.append(Counter())
                    doc_lens.append(0)
                d = doc_ids[t]
                doc_counts[d].update(tokens)
                doc_lens[d] += len(tokens)
        else:
            if eid in doc_ids:
                raise ValidationError(f"duplicate entity id {eid!r}")
            doc_ids[eid] = len(doc_ids)
            doc_counts.append(Counter(tokens))
            doc_lens.append(len(tokens))
            doc_types.append(types)
    if n_entities == 0:
        raise ValidationError("empty entity stream")
    if not doc_ids:
        raise ValidationError("no typed entities in stream")
    if skipped:
        log.warning("skipped %d entities with no type labels", skipped)

    terms: dict[str, int] = {}
    postings: dict[int, list[tuple[int, int]]] = {}
    for label in doc_ids:  # insertion order = doc order, keeps postings sorted
        d = doc_ids[label]
        for term in sorted(doc_counts[d]):
            tid = terms.setdefault(term, len(terms))
            postings.setdefault(tid, []).append((d, doc_counts[d][term]))
    return InvertedIndex(
        kind="type" if per_type else "entity",
        terms=terms,
        postings=postings,
        doc_lens=np.array(doc_lens, dtype=np.float64),
        doc_labels=list(doc_ids),
        doc_types=None if per_type else doc_types,
        skipped_untyped=skipped,
    )


def build_type_index(entities: Iterable[Entity]) -> InvertedIndex:
    """One pseudo-document per type: concatenated abstracts of its entities.

    An entity contributes its abstract to every type it bears; untyped
    entities are skipped and counted.
    """
    return _build(entities, per_type=True)


def build_entity_index(entities: Iterable[Entity]) -> InvertedIndex:
    """One document per entity, with the entity -> types map retained."""
    return _build(entities, per_type=False)


def bm25_rank(index: InvertedIndex, query_tokens: list[str], cutoff: int) -> RankedTypeList:
    """BM25 over the index; only documents containing a query term are scored.

    Repeated query tokens contribute proportionally. Returns the top-cutoff
    (label, score) pairs, ties broken by label.
    """
    if cutoff < 1:
        raise ValidationError(f"cutoff must be >= 1, got {cutoff}")
    qtf = Counter(query_tokens)
    scores: dict[int, float] = {}
    avg = index.avg_len
    for term, count in qtf.items():
        tid = index.terms.get(term)
        if tid is None:
            continue
        idf = index.idf(tid)
        for doc, tf in index.postings[tid]:
            dl = float(index.doc_lens[doc])
            sat = tf * (index.k1 + 1.0) / (tf + index.k1 * (1.0 - index.b + index.b * dl / avg))
            scores[doc] = scores.get(doc, 0.0) + count * idf * sat
    labeled = {index.doc_labels[d]: s for d, s in scores.items()}
    return ranked_type_list(labeled, top=cutoff)


def rank_types_tc(question_text: str, type_index: InvertedIndex, k: int = 10) -> RankedTypeList:
    """Type-centric (early fusion): BM25 directly over type pseudo-documents."""
    tokens = tokenize(question_text)
    if not tokens:
        return []
    return bm25_rank(type_index, tokens, cutoff=k)


def rank_types_ec(
    question_text: str,
    entity_index: InvertedIndex,
    k: int = DEFAULT_ENTITY_CUTOFF,
    aggregate: str = "sum",
) -> RankedTypeList:
    """Entity-centric (late fusion): top-k entities, scores aggregated onto types."""
    if k < 1:
        raise ValidationError(f"k must be >= 1, got {k}")
    if entity_index.doc_types is None:
        raise ValidationError("entity-centric ranking needs an entity index")
    if aggregate not in ("sum", "max"):
        raise ValidationError(f"unknown aggregation {aggregate!r}")
    tokens = tokenize(question_text)
    if not tokens:
        return []
    top_entities = bm25_rank(entity_index, tokens, cutoff=k)
    label_pos = {label: i for i, label in enumerate(entity_index.doc_labels)}
    agg: dict[str, float] = {}
    for label, score in top_entities:
        for t in entity_index.doc_types[label_pos[label]]:
            if aggregate == "sum":
                agg[t] = agg.get(t, 0.0) + score
            else:
                agg[t] = max(agg.get(t, score), score)
    return ranked_type_list(agg)
