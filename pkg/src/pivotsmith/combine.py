"""Combining phrase tables into one table with origin indicator columns.

Each input table gets a 0/1 ``origin_<name>`` column marking its entries.
A (src, tgt) pair present in several inputs keeps one entry per input,
distinguishable by origin, so downstream scoring can weight them apart.
Extra columns are unioned across inputs; entries from tables lacking an
extra carry 0 for it.
"""

from __future__ import annotations

from dataclasses import replace
from typing import Sequence

from .tablecore import ORIGIN_PREFIX, PhraseEntry, PhraseTable, TableError


def combine_tables(tables: Sequence[tuple[PhraseTable, str]]) -> PhraseTable:
    """Merge named tables; entry count is the sum of the input counts."""
    if not tables:
        raise TableError("no tables to combine")
    names = [name for _, name in tables]
    for name in names:
        if not name or any(ch.isspace() for ch in name):
            raise TableError(f"bad table name {name!r}")
    if len(set(names)) != len(names):
        raise TableError(f"duplicate table names in {names!r}")
    origin_cols = tuple(ORIGIN_PREFIX + name for name in names)
    union_extras: list[str] = []
    for table, name in tables:
        for extra in table.extras_names:
            if extra in origin_cols:
                raise TableError(
                    f"extra column {extra!r} in table {name!r} collides with"
                    " an origin column")
            if extra not in union_extras:
                union_extras.append(extra)
    entries = []
    for index, (table, _) in enumerate(tables):
        for entry in table:
            have = dict(entry.scores.extras)
            extras = tuple((extra, have.get(extra, 0.0)) for extra in union_extras)
            marks = tuple((col, 1.0 if i == index else 0.0)
                          for i, col in enumerate(origin_cols))
            entries.append(replace(
                entry, scores=replace(entry.scores, extras=extras + marks)))
    return PhraseTable.build(entries, tuple(union_extras) + origin_cols,
                             max_phrase_len=None, validate=False)
