"""Shared builders and reference implementations for the test suite.

The reference functions here are deliberately naive transcriptions of the
definitions (nested loops, dict accumulation) so the streaming pipeline
has something independent to be checked against.
"""

from __future__ import annotations

import random

import pytest

from pivotsmith.tablecore import (
    AlignmentLink,
    PhraseEntry,
    PhraseTable,
    ScoreSet,
)


@pytest.hookimpl(tryfirst=True, hookwrapper=True)
def pytest_runtest_makereport(item, call):
    """Stash each phase report on the item so fixtures can see outcomes."""
    outcome = yield
    report = outcome.get_result()
    setattr(item, f"report_{report.when}", report)


def entry(src: str, tgt: str, scores=(1.0, 1.0, 1.0, 1.0), align=(),
          extras=()) -> PhraseEntry:
    return PhraseEntry(
        src=tuple(src.split()),
        tgt=tuple(tgt.split()),
        scores=ScoreSet(*scores, extras=tuple(extras)),
        alignment=tuple(AlignmentLink(i, j) for i, j in align))


def table(entries, extras_names=()) -> PhraseTable:
    return PhraseTable.build(entries, extras_names)


def oracle_compose(sp_entries, pt_entries, min_links=0):
    """Quadratic-loop pivot composition.

    Walks every pair of entries, multiplies matching score columns when
    the pivot phrase is shared, and sums per (src, tgt) pair.  Alignments
    compose through equal middle positions.  Returns a dict mapping
    (src, tgt) to (four summed scores, frozen link set).
    """
    acc = {}
    for sp in sp_entries:
        for pt in pt_entries:
            if sp.tgt != pt.src:
                continue
            key = (sp.src, pt.tgt)
            scores, links = acc.setdefault(key, ([0.0, 0.0, 0.0, 0.0], set()))
            scores[0] += sp.scores.phi_fwd * pt.scores.phi_fwd
            scores[1] += sp.scores.lex_fwd * pt.scores.lex_fwd
            scores[2] += sp.scores.phi_bwd * pt.scores.phi_bwd
            scores[3] += sp.scores.lex_bwd * pt.scores.lex_bwd
            for i, j in sp.alignment:
                for j2, k in pt.alignment:
                    if j == j2:
                        links.add((i, k))
    return {key: (tuple(scores), frozenset(links))
            for key, (scores, links) in acc.items()
            if len(links) >= min_links}


def _phrase(prefix: str, index: int, length: int) -> tuple[str, ...]:
    return tuple(f"{prefix}{index}x{k}" for k in range(length))


def _normalized_column(rng: random.Random, edges, side: int):
    """One probability per edge, normalized over groups of edges[side]."""
    groups = {}
    for edge in edges:
        groups.setdefault(edge[side], []).append(edge)
    probs = {}
    for members in groups.values():
        raw = [rng.random() + 0.01 for _ in members]
        total = sum(raw)
        for member, value in zip(members, raw):
            probs[member] = value / total
    return probs


def phrase_pool(rng: random.Random, prefix: str, count: int,
                max_len: int = 2) -> list[tuple[str, ...]]:
    return [_phrase(prefix, i, rng.randint(1, max_len)) for i in range(count)]


def random_table(rng: random.Random, lefts, rights, max_fanout: int = 4,
                 align_prob: float = 0.6) -> PhraseTable:
    """Random table whose forward scores are normalized per source phrase
    and backward scores per target phrase."""
    edges = []
    for left in lefts:
        for right in rng.sample(rights, rng.randint(1, min(max_fanout, len(rights)))):
            edges.append((left, right))
    phi_fwd = _normalized_column(rng, edges, 0)
    lex_fwd = _normalized_column(rng, edges, 0)
    phi_bwd = _normalized_column(rng, edges, 1)
    lex_bwd = _normalized_column(rng, edges, 1)
    entries = []
    for edge in edges:
        left, right = edge
        links = tuple(
            AlignmentLink(i, j)
            for i in range(len(left)) for j in range(len(right))
            if rng.random() < align_prob)
        entries.append(PhraseEntry(
            src=left, tgt=right,
            scores=ScoreSet(phi_fwd[edge], lex_fwd[edge],
                            phi_bwd[edge], lex_bwd[edge]),
            alignment=links))
    return PhraseTable.build(entries, max_phrase_len=None)


def random_pivot_pair(rng: random.Random, n_src: int = 8, n_pivot: int = 6,
                      n_tgt: int = 8, max_fanout: int = 4):
    """Source-pivot and pivot-target tables sharing one pivot vocabulary."""
    sources = phrase_pool(rng, "s", n_src)
    pivots = phrase_pool(rng, "p", n_pivot)
    targets = phrase_pool(rng, "t", n_tgt)
    sp = random_table(rng, sources, pivots, max_fanout)
    pt = random_table(rng, pivots, targets, max_fanout)
    return sp, pt
