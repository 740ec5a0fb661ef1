"""Monotone phrase decoder and corpus BLEU scoring.

The decoder picks the best segmentation of an input sentence into table
phrases by summed log-linear scores, translating segments left to right
without reordering and without a language model.  Tokens not covered by
any table phrase pass through unchanged at a fixed penalty.  BLEU is the
standard corpus metric: clipped modified n-gram precisions up to length
four, their geometric mean, and a brevity penalty against the closest
reference length.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

from .parallel import ordered_map
from .tablecore import (
    DEFAULT_LOG_FLOOR,
    DEFAULT_MAX_PHRASE_LEN,
    LogLinearWeights,
    Phrase,
    PhraseTable,
    loglinear_score,
    weight_vector,
)


@dataclass(frozen=True)
class DecodeConfig:
    weights: LogLinearWeights | None = None
    max_phrase_len: int = DEFAULT_MAX_PHRASE_LEN
    unknown_word_penalty: float = -10.0

    def __post_init__(self) -> None:
        if self.max_phrase_len < 1:
            raise ValueError("max_phrase_len must be at least 1")
        if not math.isfinite(self.unknown_word_penalty):
            raise ValueError("unknown_word_penalty must be finite")


def build_phrase_index(table: PhraseTable, cfg: DecodeConfig,
                       ) -> dict[Phrase, tuple[float, Phrase]]:
    """Best translation option per source phrase.

    Highest log-linear score wins; ties keep the lexicographically
    smaller target so decoding is reproducible.
    """
    weight_vec = weight_vector(table.manifest, cfg.weights)
    index: dict[Phrase, tuple[float, Phrase]] = {}
    for entry in table:
        if len(entry.src) > cfg.max_phrase_len:
            continue
        score = loglinear_score(entry.scores.values(), weight_vec, DEFAULT_LOG_FLOOR)
        known = index.get(entry.src)
        if known is None or score > known[0] or (score == known[0]
                                                 and entry.tgt < known[1]):
            index[entry.src] = (score, entry.tgt)
    return index


def _decode_indexed(sentence: Sequence[str],
                    index: dict[Phrase, tuple[float, Phrase]],
                    cfg: DecodeConfig) -> tuple[str, ...]:
    return _decode_indexed_scored(sentence, index, cfg)[0]


def _decode_indexed_scored(sentence: Sequence[str],
                           index: dict[Phrase, tuple[float, Phrase]],
                           cfg: DecodeConfig) -> tuple[tuple[str, ...], float]:
    n = len(sentence)
    if n == 0:
        return (), 0.0
    best: list[float] = [0.0] + [-math.inf] * n
    back: list[tuple[int, Phrase] | None] = [None] * (n + 1)
    for end in range(1, n + 1):
        best_score = -math.inf
        best_span = 0
        best_tgt: Phrase = ()
        best_start = 0
        for start in range(max(0, end - cfg.max_phrase_len), end):
            span = tuple(sentence[start:end])
            option = index.get(span)
            if option is not None:
                score = best[start] + option[0]
                tgt = option[1]
            elif end - start == 1:
                score = best[start] + cfg.unknown_word_penalty
                tgt = span
            else:
                continue
            width = end - start
            # Prefer higher score, then longer source span, then the
            # lexicographically smaller target.
            if (score > best_score
                    or (score == best_score and width > best_span)
                    or (score == best_score and width == best_span
                        and tgt < best_tgt)):
                best_score = score
                best_span = width
                best_tgt = tgt
                best_start = start
        best[end] = best_score
        back[end] = (best_start, best_tgt)
    pieces: list[Phrase] = []
    end = n
    while end > 0:
        start, tgt = back[end]
        pieces.append(tgt)
        end = start
    out: list[str] = []
    for piece in reversed(pieces):
        out.extend(piece)
    return tuple(out), best[n]


def decode_monotone(sentence: Sequence[str], table: PhraseTable,
                    cfg: DecodeConfig | None = None) -> tuple[str, ...]:
    if cfg is None:
        cfg = DecodeConfig()
    return _decode_indexed(sentence, build_phrase_index(table, cfg), cfg)


def decode_scored(sentence: Sequence[str], table: PhraseTable,
                  cfg: DecodeConfig | None = None,
                  ) -> tuple[tuple[str, ...], float]:
    """Translation plus its summed log-linear path score."""
    if cfg is None:
        cfg = DecodeConfig()
    return _decode_indexed_scored(sentence, build_phrase_index(table, cfg), cfg)


def decode_corpus(sentences: Sequence[Sequence[str]], table: PhraseTable,
                  cfg: DecodeConfig | None = None,
                  threads: int = 1) -> list[tuple[str, ...]]:
    """Decode many sentences against one shared phrase index."""
    if cfg is None:
        cfg = DecodeConfig()
    index = build_phrase_index(table, cfg)
    return list(ordered_map(
        lambda sentence: _decode_indexed(sentence, index, cfg),
        sentences, threads))


# --- BLEU --------------------------------------------------------------------

class BleuResult(NamedTuple):
    bleu: float
    precisions: tuple[float, float, float, float]
    brevity_penalty: float
    hyp_length: int
    ref_length: int


def _ngram_counts(tokens: Sequence[str], order: int) -> Counter:
    return Counter(tuple(tokens[i:i + order])
                   for i in range(len(tokens) - order + 1))


def _closest_ref_length(refs: Sequence[Sequence[str]], hyp_len: int) -> int:
    # Ties between reference lengths go to the shorter one.
    return min((len(ref) for ref in refs),
               key=lambda length: (abs(length - hyp_len), length))


def bleu4_report(hypotheses: Sequence[Sequence[str]],
                 reference_sets: Sequence[Sequence[Sequence[str]]]) -> BleuResult:
    """Corpus BLEU with n-gram orders 1 to 4 and no smoothing.

    Any order with zero matches over the corpus makes the score 0.
    """
    if not hypotheses:
        raise ValueError("empty corpus")
    if len(hypotheses) != len(reference_sets):
        raise ValueError(
            f"{len(hypotheses)} hypotheses against {len(reference_sets)}"
            " reference sets")
    matched = [0] * 5
    totals = [0] * 5
    hyp_len = 0
    ref_len = 0
    for hyp, refs in zip(hypotheses, reference_sets):
        if not refs:
            raise ValueError("hypothesis without references")
        hyp_len += len(hyp)
        ref_len += _closest_ref_length(refs, len(hyp))
        for order in range(1, 5):
            total = len(hyp) - order + 1
            if total <= 0:
                continue
            totals[order] += total
            counts = _ngram_counts(hyp, order)
            limits: Counter = Counter()
            for ref in refs:
                for gram, count in _ngram_counts(ref, order).items():
                    if count > limits[gram]:
                        limits[gram] = count
            matched[order] += sum(min(count, limits[gram])
                                  for gram, count in counts.items())
    precisions = tuple(
        matched[order] / totals[order] if totals[order] else 0.0
        for order in range(1, 5))
    if hyp_len == 0:
        brevity_penalty = 0.0
    elif hyp_len >= ref_len:
        brevity_penalty = 1.0
    else:
        brevity_penalty = math.exp(1.0 - ref_len / hyp_len)
    if min(precisions) == 0.0:
        bleu = 0.0
    else:
        bleu = brevity_penalty * math.exp(
            sum(math.log(p) for p in precisions) / 4.0)
    return BleuResult(bleu, precisions, brevity_penalty, hyp_len, ref_len)


def bleu4(hypotheses: Sequence[Sequence[str]],
          reference_sets: Sequence[Sequence[Sequence[str]]]) -> float:
    return bleu4_report(hypotheses, reference_sets).bleu


def read_sentences(lines: Iterable[str]) -> list[tuple[str, ...]]:
    """One whitespace-tokenized sentence per line, empty lines kept."""
    return [tuple(line.split()) for line in lines]
