"""Type hierarchy: parent graph, depths, and the lenient linear-decay gain.

Distance between two types is measured along the ancestor chain only: a
predicted type earns partial credit 1 - d/h when it is an ancestor or
descendant of (or equal to) a gold type, and 0 otherwise, with h the
maximum depth of the hierarchy. Sibling types therefore score 0 even when
they share a close common ancestor.
"""

from __future__ import annotations

import logging
from pathlib import Path

from .errors import DataFormatError, ValidationError

log = logging.getLogger(__name__)

ROOT_TOKEN = "ROOT"
# The knowledge-base export marks roots with its own top concept.
_ROOT_ALIASES = {ROOT_TOKEN, "owl:Thing"}


class TypeHierarchy:
    """Immutable parent graph with per-type depth (roots have depth 1)."""

    def __init__(self, parent: dict[str, str | None]):
        self.parent = dict(parent)
        self.depth = self._compute_depths()
        self.h = max(self.depth.values()) if self.depth else 0

    def _compute_depths(self) -> dict[str, int]:
        depth: dict[str, int] = {}
        for start in self.parent:
            if start in depth:
                continue
            chain = []
            node: str | None = start
            while node is not None and node not in depth:
                if node in chain:
                    cycle_start = chain.index(node)
                    cyc = " -> ".join(chain[cycle_start:] + [node])
                    raise ValidationError(f"cycle in type hierarchy: {cyc}")
                chain.append(node)
                node = self.parent[node]
            base = depth[node] if node is not None else 0
            for offset, t in enumerate(reversed(chain), start=1):
                depth[t] = base + offset
        return depth

    def __contains__(self, type_label: str) -> bool:
        return type_label in self.parent

    def __len__(self) -> int:
        return len(self.parent)

    def ancestors(self, type_label: str) -> list[str]:
        """Ancestor chain from the immediate parent up to the root."""
        out = []
        node = self.parent.get(type_label)
        while node is not None:
            out.append(node)
            node = self.parent[node]
        return out

    def on_same_path(self, t: str, g: str) -> bool:
        """True iff t equals g or one is an ancestor of the other.

        Unknown types are never an error here; they are just not on any path.
        """
        if t not in self.parent or g not in self.parent:
            log.debug("unknown type in path check: %s / %s", t, g)
            return False
        if t == g:
            return True
        return g in self.ancestors(t) or t in self.ancestors(g)

    def distance(self, t: str, g: str) -> int | None:
        """Parent-edge count between t and g, None if not on the same path."""
        if not self.on_same_path(t, g):
            return None
        return abs(self.depth[t] - self.depth[g])

    def lenient_gain(self, t: str, gold: set[str] | frozenset[str]) -> float:
        """Linear-decay gain of predicted type t against a nonempty gold set.

        1 - d/h for the closest gold type on a shared ancestor path; 0 when t
        shares no path with any gold type (or is unknown).
        """
        if not gold:
            raise ValidationError("gold type set is empty")
        best: int | None = None
        for g in gold:
            d = self.distance(t, g)
            if d is not None and (best is None or d < best):
                best = d
        if best is None:
            return 0.0
        return 1.0 - best / self.h

    def to_tsv(self) -> str:
        lines = [
            f"{t}\t{self.parent[t] or ROOT_TOKEN}" for t in sorted(self.parent)
        ]
        return "\n".join(lines) + "\n"


def load_hierarchy(path: str | Path) -> TypeHierarchy:
    """Read a hierarchy from TSV.

    Accepts two layouts:
      * two columns ``child<TAB>parent`` where parent may be ROOT;
      * the knowledge-base export with a header row and three columns
        ``Type<TAB>Depth<TAB>Parent`` (the depth column is ignored and
        recomputed).
    Raises on cycles and on parents never defined as types.
    """
    parent: dict[str, str | None] = {}
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        fields = line.rstrip("\n").split("\t")
        if len(fields) == 2:
            child, par = fields
        elif len(fields) == 3:
            if lineno == 1 and fields[1].lower() == "depth":
                continue
            child, _, par = fields
        else:
            raise DataFormatError(f"{path}:{lineno}: expected 2 or 3 tab-separated fields")
        child = child.strip()
        par = par.strip()
        if not child:
            raise DataFormatError(f"{path}:{lineno}: empty type label")
        if child in parent:
            raise ValidationError(f"{path}:{lineno}: type {child!r} defined twice")
        parent[child] = None if par in _ROOT_ALIASES else par

    for child, par in parent.items():
        if par is not None and par not in parent:
            raise ValidationError(f"orphan parent {par!r} (referenced by {child!r})")
    if not parent:
        raise DataFormatError(f"{path}: no hierarchy rows")
    return TypeHierarchy(parent)


def on_same_path(hier: TypeHierarchy, t: str, g: str) -> bool:
    return hier.on_same_path(t, g)


def lenient_gain(t: str, gold: set[str] | frozenset[str], hier: TypeHierarchy) -> float:
    return hier.lenient_gain(t, gold)
