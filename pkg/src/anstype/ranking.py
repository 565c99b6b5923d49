"""Ranked type lists: ordered (label, score) pairs.

Sorted by score descending, ties broken by label ascending; labels unique.
"""

from __future__ import annotations

RankedTypeList = list[tuple[str, float]]


def ranked_type_list(scores: dict[str, float], top: int | None = None) -> RankedTypeList:
    """Order a label -> score map into a ranked list, optionally truncated."""
    items = sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))
    return items[:top] if top is not None else items


def is_valid_ranking(ranked: RankedTypeList) -> bool:
    """Strictly sorted under (score desc, label asc) with unique labels."""
    labels = [t for t, _ in ranked]
    if len(set(labels)) != len(labels):
        return False
    keys = [(-s, t) for t, s in ranked]
    return all(keys[i] < keys[i + 1] for i in range(len(keys) - 1))
