"""Conditional (dis)entrainment probabilities from harvest tables."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from fractions import Fraction

from ..features import FEATURE_SETS, position
from .harvest import COLUMNS, TYPE_ORDER

GROUPINGS = ("feature_set", "position", "speaker_type")
POSITIONS = ("F", "L")


@dataclass(frozen=True)
class CondensedCell:
    level: str
    grouping: str
    group: str
    column: str
    hits: int
    total: int

    @property
    def probability(self) -> Fraction | None:
        return Fraction(self.hits, self.total) if self.total else None


def _groups(rows, grouping: str) -> dict:
    if grouping == "feature_set":
        return {s: [r for r in rows if r.feature_set == s] for s in FEATURE_SETS}
    if grouping == "position":
        return {p: [r for r in rows if position(r.feature) == p] for p in POSITIONS}
    raise ValueError(f"unknown grouping {grouping!r}")


def condense(rows, grouping: str, level: str = "") -> list[CondensedCell]:
    """Probabilities per group and evidence column.

    For feature sets and positions a feature counts as evidence when its cell
    holds any speaker type. For speaker types the group is every feature and
    the evidence is that type's presence in the cell.
    """
    rows = list(rows)
    out = []
    if grouping == "speaker_type":
        for t in TYPE_ORDER:
            for c in COLUMNS:
                hits = sum(t in r.cells[c] for r in rows)
                out.append(CondensedCell(level, grouping, t, c, hits, len(rows)))
        return out
    for g, members in _groups(rows, grouping).items():
        for c in COLUMNS:
            hits = sum(bool(r.cells[c]) for r in members)
            out.append(CondensedCell(level, grouping, g, c, hits, len(members)))
    return out


def as_table(cells) -> dict:
    """{(group, column): probability} view of condensed cells."""
    return {(c.group, c.column): c.probability for c in cells}


def format_condense_csv(cells) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["level", "grouping", "group", "column", "hits", "total", "probability"])
    for c in cells:
        p = c.probability
        w.writerow([c.level, c.grouping, c.group, c.column, c.hits, c.total,
                    "" if p is None else repr(float(p))])
    return buf.getvalue()
