"""Question dataset ingestion, category flattening, folds, and statistics.

Input format: a JSON array of records with keys ``id``, ``question``
(string or null), ``category`` (one of boolean / literal / resource) and
``type`` (list of type labels). Records with null or empty question text
are retained but flagged unusable for training; they are scored as
incorrect at evaluation time.

Known raw-data quirk: the DBpedia training file repeats some records
verbatim under the same id. Byte-identical repeats are retained (the
published dataset statistics count them) with a ``#n`` suffix appended to
keep ids unique; records that share an id but differ in content are
rejected.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from random import Random

from .errors import DataFormatError, ValidationError

RAW_CATEGORIES = ("boolean", "literal", "resource")
LITERAL_SUBTYPES = ("number", "date", "string")

SOURCES = ("dbpedia", "wikidata", "combined")
SPLITS = ("train", "test")

_ID_PREFIX = {"dbpedia": "dbp:", "wikidata": "wd:"}


class FlatCategory(str, Enum):
    """The five flattened answer categories, in fixed tie-break order."""

    BOOLEAN = "boolean"
    LITERAL_DATE = "literal-date"
    LITERAL_NUMBER = "literal-number"
    LITERAL_STRING = "literal-string"
    RESOURCE = "resource"


# Tie-break / reporting order used everywhere a class order matters.
FLAT_ORDER = (
    FlatCategory.BOOLEAN,
    FlatCategory.LITERAL_DATE,
    FlatCategory.LITERAL_NUMBER,
    FlatCategory.LITERAL_STRING,
    FlatCategory.RESOURCE,
)


def flatten_category(category: str, types: list[str] | tuple[str, ...]) -> FlatCategory:
    """Map a raw (category, type list) pair onto one of the five flat categories."""
    if category == "boolean":
        return FlatCategory.BOOLEAN
    if category == "resource":
        return FlatCategory.RESOURCE
    if category == "literal":
        if not types:
            raise ValidationError("literal question with no subtype")
        subtype = types[0]
        if subtype not in LITERAL_SUBTYPES:
            raise ValidationError(f"unknown literal subtype {subtype!r}")
        return FlatCategory(f"literal-{subtype}")
    raise ValidationError(f"unknown category {category!r}")


def unflatten_category(flat: FlatCategory) -> tuple[str, str | None]:
    """Inverse of flatten_category: (raw category, literal subtype or None)."""
    if flat is FlatCategory.BOOLEAN:
        return "boolean", "boolean"
    if flat is FlatCategory.RESOURCE:
        return "resource", None
    return "literal", flat.value.split("-", 1)[1]


@dataclass(frozen=True)
class Question:
    id: str
    text: str
    category: str | None
    types: tuple[str, ...]

    @property
    def usable(self) -> bool:
        """Has non-empty question text, so it can be vectorized."""
        return bool(self.text.strip())

    @property
    def flat(self) -> FlatCategory | None:
        if self.category is None:
            return None
        return flatten_category(self.category, self.types)


@dataclass
class QuestionSet:
    source: str
    split: str
    questions: list[Question]
    duplicates_renamed: int = 0

    def __post_init__(self):
        ids = [q.id for q in self.questions]
        if len(ids) != len(set(ids)):
            dup = next(i for i, c in Counter(ids).items() if c > 1)
            raise ValidationError(f"duplicate question id {dup!r}")

    def __len__(self) -> int:
        return len(self.questions)

    def __iter__(self):
        return iter(self.questions)

    def by_id(self) -> dict[str, Question]:
        return {q.id: q for q in self.questions}


def _parse_record(rec, index: int, require_labels: bool) -> Question:
    if not isinstance(rec, dict):
        raise DataFormatError(f"record {index} is not an object")
    if "id" not in rec:
        raise DataFormatError(f"record {index} has no id")
    qid = str(rec["id"])
    text = rec.get("question") or ""
    if not isinstance(text, str):
        raise DataFormatError(f"record {index} ({qid}): question is not a string")
    category = rec.get("category")
    types = rec.get("type") or []
    if category is None and not require_labels:
        return Question(qid, text, None, ())
    if category not in RAW_CATEGORIES:
        raise ValidationError(f"record {index} ({qid}): unknown category {category!r}")
    if not isinstance(types, list) or any(not isinstance(t, str) for t in types):
        raise DataFormatError(f"record {index} ({qid}): type is not a list of strings")
    if category == "boolean" and types != ["boolean"]:
        raise ValidationError(f"record {index} ({qid}): boolean question with types {types}")
    if category == "literal":
        if not types or any(t not in LITERAL_SUBTYPES for t in types):
            raise ValidationError(f"record {index} ({qid}): bad literal subtype list {types}")
    if category == "resource" and any(not t for t in types):
        raise ValidationError(f"record {index} ({qid}): empty type label")
    return Question(qid, text, category, tuple(types))


def load_dataset(
    path: str | Path,
    source: str,
    split: str,
    require_labels: bool = True,
) -> QuestionSet:
    """Load a question file into a QuestionSet.

    With ``require_labels=False``, records may omit category/type (prediction
    input); otherwise both are validated against the closed category set.
    """
    if source not in SOURCES:
        raise ValidationError(f"unknown source {source!r}")
    if split not in SPLITS:
        raise ValidationError(f"unknown split {split!r}")
    raw = Path(path).read_text(encoding="utf-8")
    try:
        data = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise DataFormatError(
            f"{path}: malformed JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from exc
    if not isinstance(data, list):
        raise DataFormatError(f"{path}: expected a JSON array of records")

    questions: list[Question] = []
    seen: dict[str, str] = {}
    suffix_count: Counter[str] = Counter()
    renamed = 0
    for index, rec in enumerate(data):
        q = _parse_record(rec, index, require_labels)
        canon = json.dumps(rec, sort_keys=True, ensure_ascii=False)
        if q.id in seen:
            if seen[q.id] != canon:
                raise ValidationError(
                    f"{path}: duplicate id {q.id!r} with conflicting content"
                )
            suffix_count[q.id] += 1
            q = Question(f"{q.id}#{suffix_count[q.id] + 1}", q.text, q.category, q.types)
            renamed += 1
        else:
            seen[q.id] = canon
        questions.append(q)
    return QuestionSet(source, split, questions, duplicates_renamed=renamed)


def combine_sets(a: QuestionSet, b: QuestionSet) -> QuestionSet:
    """Concatenate two same-split sets, prefixing ids by source for uniqueness."""
    if a.split != b.split:
        raise ValidationError(f"cannot combine splits {a.split!r} and {b.split!r}")

    def prefixed(qs: QuestionSet) -> list[Question]:
        prefix = _ID_PREFIX.get(qs.source, qs.source + ":")
        return [Question(prefix + q.id, q.text, q.category, q.types) for q in qs]

    combined = prefixed(a) + prefixed(b)
    return QuestionSet(
        "combined",
        a.split,
        combined,
        duplicates_renamed=a.duplicates_renamed + b.duplicates_renamed,
    )


@dataclass
class FoldAssignment:
    seed: int
    n_folds: int
    assignment: dict[str, int]

    def ids_in(self, fold: int) -> list[str]:
        return [qid for qid, f in self.assignment.items() if f == fold]

    def ids_not_in(self, fold: int) -> list[str]:
        return [qid for qid, f in self.assignment.items() if f != fold]

    def fold_sizes(self) -> list[int]:
        sizes = [0] * self.n_folds
        for f in self.assignment.values():
            sizes[f] += 1
        return sizes


def split_folds(qs: QuestionSet, n: int, seed: int) -> FoldAssignment:
    """Deterministic stratified fold assignment.

    Stratified by flat category; each stratum is shuffled with the given
    seed and dealt round-robin, continuing across strata so global fold
    sizes differ by at most one.
    """
    if n < 2:
        raise ValidationError(f"need at least 2 folds, got {n}")
    if len(qs) == 0:
        raise ValidationError("cannot split an empty question set")
    if n > len(qs):
        raise ValidationError(f"{n} folds requested for {len(qs)} questions")

    strata: dict[str, list[str]] = {}
    for q in qs:
        key = q.flat.value if q.category is not None else "?"
        strata.setdefault(key, []).append(q.id)

    rng = Random(seed)
    assignment: dict[str, int] = {}
    cursor = 0
    for key in sorted(strata):
        ids = strata[key]
        rng.shuffle(ids)
        for qid in ids:
            assignment[qid] = cursor % n
            cursor += 1
    return FoldAssignment(seed=seed, n_folds=n, assignment=assignment)


@dataclass
class DatasetStats:
    total: int
    per_raw: dict[str, int]
    per_flat: dict[str, int]
    unusable: int
    duplicates_renamed: int = 0

    def to_json(self) -> str:
        return json.dumps(
            {
                "total": self.total,
                "per_category": self.per_raw,
                "per_flat_category": self.per_flat,
                "unusable_text": self.unusable,
                "duplicates_renamed": self.duplicates_renamed,
            },
            indent=2,
        )

    def to_tsv(self) -> str:
        lines = [f"total\t{self.total}"]
        lines += [f"category:{c}\t{self.per_raw.get(c, 0)}" for c in RAW_CATEGORIES]
        lines += [f"flat:{f.value}\t{self.per_flat.get(f.value, 0)}" for f in FLAT_ORDER]
        lines.append(f"unusable_text\t{self.unusable}")
        lines.append(f"duplicates_renamed\t{self.duplicates_renamed}")
        return "\n".join(lines) + "\n"


def dataset_stats(qs: QuestionSet) -> DatasetStats:
    per_raw: Counter[str] = Counter()
    per_flat: Counter[str] = Counter()
    unusable = 0
    for q in qs:
        if q.category is not None:
            per_raw[q.category] += 1
            per_flat[q.flat.value] += 1
        if not q.usable:
            unusable += 1
    return DatasetStats(
        total=len(qs),
        per_raw=dict(per_raw),
        per_flat=dict(per_flat),
        unusable=unusable,
        duplicates_renamed=qs.duplicates_renamed,
    )
