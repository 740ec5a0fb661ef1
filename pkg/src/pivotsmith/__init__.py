"""Phrase-pivot translation toolkit.

Triangulates source-pivot and pivot-target phrase tables into a
source-target table, annotates entries with alignment connectivity and
morphological agreement features, combines tables with origin indicators,
and evaluates with a monotone decoder and corpus BLEU.
"""

from .combine import combine_tables
from .evalkit import (
    BleuResult,
    DecodeConfig,
    bleu4,
    bleu4_report,
    decode_corpus,
    decode_monotone,
)
from .features import (
    FeatureScores,
    annotate_table,
    connectivity_scores,
    induced_morph_scores,
    rule_morph_scores,
)
from .morphmodel import (
    FcModel,
    MorphLexicon,
    RuleMapping,
    build_lexicon,
    default_rules,
    load_rules,
    render_fc_tag,
    train_fc_model,
)
from .tablecore import (
    AlignmentLink,
    LogLinearWeights,
    PhraseEntry,
    PhraseTable,
    ReorderingEntry,
    ScoreSet,
    TableError,
    parse_phrase_table,
    parse_reordering_table,
    write_phrase_table,
    write_reordering_table,
)
from .triangulate import (
    PivotConfig,
    estimate_pivot_size,
    filter_top_n,
    pivot_compose,
    pivot_reordering,
    project_alignment,
)

__version__ = "0.1.0"

__all__ = [
    "AlignmentLink",
    "BleuResult",
    "DecodeConfig",
    "FcModel",
    "FeatureScores",
    "LogLinearWeights",
    "MorphLexicon",
    "PhraseEntry",
    "PhraseTable",
    "PivotConfig",
    "ReorderingEntry",
    "RuleMapping",
    "ScoreSet",
    "TableError",
    "annotate_table",
    "bleu4",
    "bleu4_report",
    "build_lexicon",
    "combine_tables",
    "connectivity_scores",
    "decode_corpus",
    "decode_monotone",
    "default_rules",
    "estimate_pivot_size",
    "filter_top_n",
    "induced_morph_scores",
    "load_rules",
    "parse_phrase_table",
    "parse_reordering_table",
    "pivot_compose",
    "pivot_reordering",
    "project_alignment",
    "render_fc_tag",
    "rule_morph_scores",
    "train_fc_model",
    "write_phrase_table",
    "write_reordering_table",
]
