"""Desk-scale entity corpus synthesis.

The fusion rankers consume a corpus of typed entity abstracts. Real
knowledge-base abstract dumps run to gigabytes, so for desk-scale
experiments and tests this module synthesizes a stand-in: a handful of
pseudo-entities per ontology type whose "abstract" is a short description
built from the type's name words (plus naive plural variants, the ancestor
chain's words, and seeded per-entity name tokens). That mirrors how real
abstracts carry type-indicative vocabulary ("... is an American artistic
gymnast ...") without copying any question text. Reports built on such a
corpus must say so; absolute scores are not comparable to runs over real
abstracts.
"""

from __future__ import annotations

import re
from pathlib import Path
from random import Random

from .fusion import Entity
from .typehier import TypeHierarchy

_CAMEL_RE = re.compile(r"[A-Z]?[a-z0-9]+|[A-Z]+(?![a-z])")

_FILLER = [
    "known", "for", "its", "history", "located", "near", "famous", "among",
    "founded", "during", "the", "early", "modern", "era", "with", "many",
    "notable", "records", "and", "a", "long", "tradition",
]

_SYLLABLES = ["ba", "ce", "di", "fo", "gu", "ka", "lo", "mi", "nu", "pa",
              "re", "sa", "ti", "vo", "zu"]


def label_words(label: str) -> list[str]:
    """Split an ontology label into lowercase words (camel case and prefixes)."""
    bare = label.split(":", 1)[-1]
    parts = _CAMEL_RE.findall(bare.replace("_", " ").replace("-", " "))
    return [p.lower() for p in parts if p]


def _entity_name(rng: Random) -> str:
    return "".join(rng.choice(_SYLLABLES) for _ in range(3))


def synthesize_entities(
    labels: list[str] | tuple[str, ...],
    hier: TypeHierarchy | None = None,
    per_type: int = 3,
    seed: int = 0,
) -> list[Entity]:
    """Deterministic pseudo-entities: ``per_type`` per label.

    Each entity bears its label plus the label's ancestor chain (transitive
    typing, as in a real knowledge base), so its abstract contributes to
    every one of those type documents in a type-centric index.
    """
    if per_type < 1:
        raise ValueError(f"per_type must be >= 1, got {per_type}")
    rng = Random(seed)
    entities: list[Entity] = []
    for label in sorted(labels):
        chain = (label, *hier.ancestors(label)) if hier is not None and label in hier else (label,)
        own = label_words(label)
        ancestors = [w for anc in chain[1:] for w in label_words(anc)]
        for i in range(per_type):
            name = _entity_name(rng)
            words = [name, "is", "a"] + own + [w + "s" for w in own] + ancestors
            words += rng.sample(_FILLER, k=min(6, len(_FILLER)))
            entities.append((f"{label}/{i}", " ".join(words), chain))
    return entities


def write_entity_file(entities: list[Entity], path: str | Path) -> None:
    """Write entities in the TSV corpus format read by the fusion indexes."""
    lines = []
    for eid, abstract, types in entities:
        clean = abstract.replace("\t", " ").replace("\n", " ")
        lines.append(f"{eid}\t{clean}\t{','.join(types)}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
