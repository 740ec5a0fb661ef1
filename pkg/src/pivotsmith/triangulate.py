"""Phrase table triangulation through a pivot language.

Given a source-pivot table and a pivot-target table, every pair of entries
that shares a pivot phrase is composed into a source-target entry.  Each of
the four core scores of the composed entry is the sum over shared pivot
phrases of the products of the matching scores on both sides:

    phi_fwd(t|s) = sum_p phi_fwd_sp(p|s) * phi_fwd_pt(t|p)

and likewise for the backward and lexical columns.  The sums are left as
they are, no renormalization happens.  Word alignments are projected
through the pivot positions and unioned across pivot phrases.

Both sides are filtered to the top ``n`` entries per source phrase by
log-linear score before joining.  The join itself streams over both tables
sorted by pivot phrase, so memory stays bounded by the largest single
pivot group plus the sort chunk size rather than by table size.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from itertools import groupby
from operator import itemgetter
from typing import Iterable, Iterator, Sequence

from .extsort import DEFAULT_CHUNK_SIZE, ext_sorted
from .tablecore import (
    CORE_FEATURES,
    DEFAULT_LOG_FLOOR,
    SCORE_OVERSHOOT_TOL,
    AlignmentLink,
    LogLinearWeights,
    Phrase,
    PhraseEntry,
    PhraseTable,
    ReorderingEntry,
    Row,
    TableError,
    entry_to_row,
    loglinear_score,
    row_to_entry,
    weight_vector,
)

logger = logging.getLogger(__name__)

DEFAULT_TOP_N = 1000

_BY_SRC_TGT = itemgetter(0, 1)
_BY_PIVOT_SRC = itemgetter(1, 0)
_UNIFORM_TRIPLE = (1.0 / 3.0,) * 6


@dataclass(frozen=True)
class PivotConfig:
    """Knobs for one triangulation run.

    ``top_n`` caps entries kept per source phrase on each input table
    before joining.  ``weights_sp`` and ``weights_pt`` rank entries for
    that filter; None means uniform weights of one.  Composed pairs whose
    projected alignment has fewer than ``min_alignment_links`` points are
    dropped.
    """

    top_n: int = DEFAULT_TOP_N
    weights_sp: LogLinearWeights | None = None
    weights_pt: LogLinearWeights | None = None
    min_alignment_links: int = 0
    tmpdir: str | None = None
    chunk_size: int = DEFAULT_CHUNK_SIZE

    def __post_init__(self) -> None:
        if self.top_n < 1:
            raise ValueError("top_n must be at least 1")
        if self.min_alignment_links < 0:
            raise ValueError("min_alignment_links must not be negative")
        if self.chunk_size < 1:
            raise ValueError("chunk_size must be at least 1")


def project_alignment(
        a_sp: Iterable[tuple[int, int]],
        a_pt: Iterable[tuple[int, int]]) -> tuple[AlignmentLink, ...]:
    """Compose alignments through shared middle positions.

    Keeps (i, k) whenever some pivot position j links i to j on one side
    and j to k on the other.  Duplicates collapse.
    """
    return tuple(AlignmentLink(*pair) for pair in _project(tuple(a_sp), tuple(a_pt)))


def _project(a_sp: Sequence[tuple[int, int]],
             a_pt: Sequence[tuple[int, int]]) -> tuple[tuple[int, int], ...]:
    if not a_sp or not a_pt:
        return ()
    by_pivot: dict[int, list[int]] = {}
    for j, k in a_pt:
        by_pivot.setdefault(j, []).append(k)
    out = set()
    for i, j in a_sp:
        targets = by_pivot.get(j)
        if targets:
            for k in targets:
                out.add((i, k))
    return tuple(sorted(out))


def _iter_top_n(rows: Iterable[Row], weight_vec: Sequence[float], n: int,
                side: str, floor: float = DEFAULT_LOG_FLOOR) -> Iterator[Row]:
    """Keep the n best rows per source from a (src, tgt) sorted stream.

    Ranking is by descending log-linear score; ties keep the smaller
    target phrase.  Survivors come out still sorted by (src, tgt).
    """
    for _, grouped in groupby(rows, key=itemgetter(0)):
        group = list(grouped)
        for prev, cur in zip(group, group[1:]):
            if prev[1] == cur[1]:
                raise TableError(
                    f"duplicate entry in {side} table for pair"
                    f" {' '.join(prev[0])!r} -> {' '.join(prev[1])!r}")
        if len(group) > n:
            group.sort(key=lambda row: (-loglinear_score(row[2], weight_vec, floor),
                                        row[1]))
            del group[n:]
            group.sort(key=itemgetter(1))
        yield from group


def filter_rows(rows: Iterable[Row], extras: Sequence[str],
                weights: LogLinearWeights | None, n: int,
                tmpdir: str | None = None,
                chunk_size: int = DEFAULT_CHUNK_SIZE,
                inputs_sorted: bool = False) -> Iterator[Row]:
    """Streaming per-source top-n pruning, extras preserved."""
    if n < 1:
        raise ValueError("n must be at least 1")
    weight_vec = weight_vector(CORE_FEATURES + tuple(extras), weights)
    if not inputs_sorted:
        rows = ext_sorted(rows, _BY_SRC_TGT, chunk_size=chunk_size, tmp_base=tmpdir)
    return _iter_top_n(rows, weight_vec, n, "input")


def filter_top_n(table: PhraseTable, weights: LogLinearWeights | None,
                 n: int) -> PhraseTable:
    """Per-source top-n pruning of a table, extras preserved."""
    rows = (entry_to_row(entry) for entry in table)
    kept = [row_to_entry(row, table.extras_names)
            for row in filter_rows(rows, table.extras_names, weights, n,
                                   inputs_sorted=True)]
    return PhraseTable.build(kept, table.extras_names,
                             max_phrase_len=None, validate=False)


def _drop_extras(rows: Iterable[Row]) -> Iterator[Row]:
    for src, tgt, scores, align in rows:
        yield src, tgt, scores[:4], align


def _paired_pivot_groups(sp_rows: Iterable[Row], pt_rows: Iterable[Row],
                         ) -> Iterator[tuple[Phrase, list[Row], list[Row]]]:
    """Walk two pivot-sorted streams and yield groups sharing a pivot phrase.

    ``sp_rows`` must be sorted by (tgt, src) and ``pt_rows`` by (src, tgt);
    the shared key is the pivot phrase, sp target and pt source.
    """
    sp_groups = groupby(sp_rows, key=itemgetter(1))
    pt_groups = groupby(pt_rows, key=itemgetter(0))
    sp_item = next(sp_groups, None)
    pt_item = next(pt_groups, None)
    while sp_item is not None and pt_item is not None:
        sp_key, sp_group = sp_item
        pt_key, pt_group = pt_item
        if sp_key < pt_key:
            sp_item = next(sp_groups, None)
        elif pt_key < sp_key:
            pt_item = next(pt_groups, None)
        else:
            yield sp_key, list(sp_group), list(pt_group)
            sp_item = next(sp_groups, None)
            pt_item = next(pt_groups, None)


def _iter_join(sp_by_pivot: Iterable[Row], pt_by_pivot: Iterable[Row],
               ) -> Iterator[Row]:
    """Emit one partial product row per entry pair sharing a pivot phrase."""
    for _, sp_group, pt_group in _paired_pivot_groups(sp_by_pivot, pt_by_pivot):
        for src, _, f, a_sp in sp_group:
            for _, tgt, g, a_pt in pt_group:
                yield (src, tgt,
                       (f[0] * g[0], f[1] * g[1], f[2] * g[2], f[3] * g[3]),
                       _project(a_sp, a_pt))


def _snap_score(total: float, column: str, src: Sequence[str],
                tgt: Sequence[str]) -> float:
    if total > 1.0:
        if total <= 1.0 + SCORE_OVERSHOOT_TOL:
            return 1.0
        raise TableError(
            f"composed {column} for {' '.join(src)!r} -> {' '.join(tgt)!r}"
            f" is {total!r}; input scores do not form conditional distributions")
    return total


def _iter_reduce(partials: Iterable[Row], min_links: int) -> Iterator[Row]:
    """Sum partial products per (src, tgt) pair and union their alignments."""
    for (src, tgt), grouped in groupby(partials, key=_BY_SRC_TGT):
        s0 = s1 = s2 = s3 = 0.0
        links: set[tuple[int, int]] = set()
        for _, _, scores, align in grouped:
            s0 += scores[0]
            s1 += scores[1]
            s2 += scores[2]
            s3 += scores[3]
            links.update(align)
        if len(links) < min_links:
            continue
        yield (src, tgt,
               (_snap_score(s0, CORE_FEATURES[0], src, tgt),
                _snap_score(s1, CORE_FEATURES[1], src, tgt),
                _snap_score(s2, CORE_FEATURES[2], src, tgt),
                _snap_score(s3, CORE_FEATURES[3], src, tgt)),
               tuple(sorted(links)))


def compose_rows(sp_rows: Iterable[Row], sp_extras: Sequence[str],
                 pt_rows: Iterable[Row], pt_extras: Sequence[str],
                 cfg: PivotConfig, inputs_sorted: bool = False,
                 ) -> Iterator[Row]:
    """Streaming triangulation over raw rows, yielding (src, tgt) sorted rows.

    Extra feature columns on either input are dropped before composing
    because summed products are only defined for the shared core four.
    """
    for side, extras in (("source-pivot", sp_extras), ("pivot-target", pt_extras)):
        if extras:
            logger.warning("dropping %d extra feature column(s) from the %s table: %s",
                           len(extras), side, " ".join(extras))
    wv_sp = weight_vector(CORE_FEATURES + tuple(sp_extras), cfg.weights_sp)
    wv_pt = weight_vector(CORE_FEATURES + tuple(pt_extras), cfg.weights_pt)

    def sort(rows: Iterable[Row], key) -> Iterator[Row]:
        return ext_sorted(rows, key, chunk_size=cfg.chunk_size, tmp_base=cfg.tmpdir)

    if not inputs_sorted:
        sp_rows = sort(sp_rows, _BY_SRC_TGT)
        pt_rows = sort(pt_rows, _BY_SRC_TGT)
    sp_kept = _drop_extras(_iter_top_n(sp_rows, wv_sp, cfg.top_n, "source-pivot"))
    pt_kept = _drop_extras(_iter_top_n(pt_rows, wv_pt, cfg.top_n, "pivot-target"))
    sp_by_pivot = sort(sp_kept, _BY_PIVOT_SRC)
    partials = _iter_join(sp_by_pivot, pt_kept)
    return _iter_reduce(sort(partials, _BY_SRC_TGT), cfg.min_alignment_links)


def pivot_compose(sp: PhraseTable, pt: PhraseTable,
                  cfg: PivotConfig | None = None) -> PhraseTable:
    """Triangulate two in-memory tables into a source-target table."""
    if cfg is None:
        cfg = PivotConfig()
    rows = compose_rows(
        (entry_to_row(e) for e in sp), sp.extras_names,
        (entry_to_row(e) for e in pt), pt.extras_names,
        cfg, inputs_sorted=True)
    entries = [row_to_entry(row) for row in rows]
    return PhraseTable.build(entries, max_phrase_len=None, validate=False)


def estimate_pivot_size_rows(sp_rows: Iterable[Row],
                             pt_rows: Iterable[Row]) -> int:
    """Pair combinations the unfiltered join would enumerate.

    Holds one counter per distinct pivot phrase in memory, nothing else.
    """
    sp_counts: dict[tuple, int] = {}
    for row in sp_rows:
        key = row[1]
        sp_counts[key] = sp_counts.get(key, 0) + 1
    total = 0
    for row in pt_rows:
        total += sp_counts.get(row[0], 0)
    return total


def estimate_pivot_size(sp: PhraseTable, pt: PhraseTable) -> int:
    return estimate_pivot_size_rows(
        (entry_to_row(e) for e in sp), (entry_to_row(e) for e in pt))


# --- lexicalized reordering through the pivot --------------------------------

class _GroupCursor:
    """Sorted group lookup that advances monotonically through a stream."""

    def __init__(self, rows: Iterable[Row], keyfn) -> None:
        self._groups = groupby(rows, key=keyfn)
        self._current = next(self._groups, None)

    def get(self, key) -> list[Row] | None:
        while self._current is not None and self._current[0] < key:
            self._current = next(self._groups, None)
        if self._current is not None and self._current[0] == key:
            return list(self._current[1])
        return None


def reordering_to_rows(entries: Iterable[ReorderingEntry]) -> Iterator[Row]:
    for entry in entries:
        yield (entry.src, entry.tgt, entry.probs, ())


def write_reordering_rows(rows: Iterable[Row], stream) -> None:
    """Serialize reordering rows without materializing them."""
    for src, tgt, probs, _ in rows:
        stream.write(" ||| ".join([
            " ".join(src), " ".join(tgt),
            " ".join(repr(p) for p in probs)]) + "\n")


def _iter_reorder_join(sp_by_pivot: Iterable[Row], pt_by_pivot: Iterable[Row],
                       pt_reo_rows: Iterable[Row]) -> Iterator[Row]:
    """Partial orientation rows weighted by the source forward score.

    A pivot-target pair without a reordering entry contributes uniform
    orientation probabilities.
    """
    reo = _GroupCursor(pt_reo_rows, itemgetter(0))
    for pivot, sp_group, pt_group in _paired_pivot_groups(sp_by_pivot, pt_by_pivot):
        reo_group = reo.get(pivot)
        probs_by_tgt = {row[1]: row[2] for row in reo_group} if reo_group else {}
        for src, _, f, _ in sp_group:
            weight = f[0]
            for _, tgt, _, _ in pt_group:
                probs = probs_by_tgt.get(tgt, _UNIFORM_TRIPLE)
                yield (src, tgt, tuple(weight * p for p in probs), ())


def _normalize_triples(values: Sequence[float]) -> tuple[float, ...]:
    out = []
    for lo in (0, 3):
        total = values[lo] + values[lo + 1] + values[lo + 2]
        if total > 0.0:
            out.extend(values[lo + k] / total for k in range(3))
        else:
            out.extend(_UNIFORM_TRIPLE[:3])
    return tuple(out)


def _iter_reorder_reduce(partials: Iterable[Row]) -> Iterator[Row]:
    for (src, tgt), grouped in groupby(partials, key=_BY_SRC_TGT):
        sums = [0.0] * 6
        for _, _, scores, _ in grouped:
            for k in range(6):
                sums[k] += scores[k]
        yield (src, tgt, _normalize_triples(sums), ())


def _restrict_to_pairs(rows: Iterable[Row], pairs: Iterable[Row]) -> Iterator[Row]:
    """Keep rows whose (src, tgt) appears in the pair stream, both sorted."""
    pair_iter = iter(pairs)
    pair = next(pair_iter, None)
    for row in rows:
        key = _BY_SRC_TGT(row)
        while pair is not None and _BY_SRC_TGT(pair) < key:
            pair = next(pair_iter, None)
        if pair is not None and _BY_SRC_TGT(pair) == key:
            yield row


def reorder_rows(sp_rows: Iterable[Row], sp_extras: Sequence[str],
                 pt_rows: Iterable[Row], pt_extras: Sequence[str],
                 pt_reo_rows: Iterable[Row], composed_pairs: Iterable[Row],
                 cfg: PivotConfig, inputs_sorted: bool = False) -> Iterator[Row]:
    """Streaming reordering mixture over raw rows.

    For each composed pair the pivot-target orientation distribution is
    mixed with the source-pivot forward scores as mixture weights, then
    each directional triple is renormalized.  Output is restricted to the
    pairs of the composed phrase table so both artifacts stay in step.
    """
    wv_sp = weight_vector(CORE_FEATURES + tuple(sp_extras), cfg.weights_sp)
    wv_pt = weight_vector(CORE_FEATURES + tuple(pt_extras), cfg.weights_pt)

    def sort(rows: Iterable[Row], key) -> Iterator[Row]:
        return ext_sorted(rows, key, chunk_size=cfg.chunk_size, tmp_base=cfg.tmpdir)

    if not inputs_sorted:
        sp_rows = sort(sp_rows, _BY_SRC_TGT)
        pt_rows = sort(pt_rows, _BY_SRC_TGT)
        pt_reo_rows = sort(pt_reo_rows, _BY_SRC_TGT)
    sp_kept = _drop_extras(_iter_top_n(sp_rows, wv_sp, cfg.top_n, "source-pivot"))
    pt_kept = _drop_extras(_iter_top_n(pt_rows, wv_pt, cfg.top_n, "pivot-target"))
    sp_by_pivot = sort(sp_kept, _BY_PIVOT_SRC)
    partials = _iter_reorder_join(sp_by_pivot, pt_kept, pt_reo_rows)
    reduced = _iter_reorder_reduce(sort(partials, _BY_SRC_TGT))
    return _restrict_to_pairs(reduced, composed_pairs)


def pivot_reordering(sp_reo: Sequence[ReorderingEntry],
                     pt_reo: Sequence[ReorderingEntry],
                     sp: PhraseTable, pt: PhraseTable,
                     cfg: PivotConfig | None = None,
                     ) -> tuple[ReorderingEntry, ...]:
    """Reordering table for the composed pairs of ``pivot_compose(sp, pt)``.

    Orientation probabilities come from the pivot-target side, mixed per
    composed pair with the source-pivot forward phrase scores as weights.
    The source-pivot reordering table is accepted and validated for
    interface symmetry but does not enter the mixture; phrase order around
    the source-pivot boundary says nothing about source-target order once
    the pivot phrase drops out.
    """
    if cfg is None:
        cfg = PivotConfig()
    if sp_reo:
        logger.info("source-pivot reordering table (%d entries) is unused"
                    " by the pivot mixture", len(sp_reo))
    composed = compose_rows(
        (entry_to_row(e) for e in sp), sp.extras_names,
        (entry_to_row(e) for e in pt), pt.extras_names,
        cfg, inputs_sorted=True)
    pt_reo_sorted = sorted(pt_reo, key=lambda e: (e.src, e.tgt))
    rows = reorder_rows(
        (entry_to_row(e) for e in sp), sp.extras_names,
        (entry_to_row(e) for e in pt), pt.extras_names,
        reordering_to_rows(pt_reo_sorted), composed, cfg, inputs_sorted=True)
    return tuple(ReorderingEntry(src=row[0], tgt=row[1], probs=row[2])
                 for row in rows)
