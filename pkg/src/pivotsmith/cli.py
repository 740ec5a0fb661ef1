"""Command line front end.

One subcommand per pipeline stage.  Commands read stdin and write stdout
when file flags are omitted, exit 2 on usage errors, and exit 1 on data
errors with the offending line number in the message.  Nothing here uses
randomness and results do not depend on the thread count, so reruns are
byte-identical.
"""

from __future__ import annotations

import argparse
import functools
import logging
import sys
from contextlib import contextmanager
from typing import Iterator, TextIO

from . import __version__
from .combine import combine_tables
from .evalkit import DecodeConfig, bleu4_report, build_phrase_index, read_sentences
from .evalkit import _decode_indexed as _decode_one
from .features import (
    DEFAULT_RULE_FEATURES,
    annotate_table,
    connectivity_scores,
    induced_morph_scores,
    rule_morph_scores,
)
from .morphmodel import (
    DEFAULT_FC_FEATURES,
    FcModel,
    MorphLexicon,
    NA_VALUE,
    _feature_index,
    build_lexicon,
    default_rules,
    load_rules,
    train_fc_model,
)
from .parallel import default_threads, ordered_map
from .tablecore import (
    CORE_FEATURES,
    LogLinearWeights,
    TableError,
    parse_phrase_table,
    parse_reordering_table,
    read_rows,
    write_phrase_table,
    write_rows,
)
from .triangulate import (
    DEFAULT_TOP_N,
    PivotConfig,
    compose_rows,
    estimate_pivot_size_rows,
    filter_rows,
    reorder_rows,
    reordering_to_rows,
    write_reordering_rows,
)

logger = logging.getLogger("pivotsmith")

HIST_BINS = 10


@contextmanager
def _open_in(path: str | None) -> Iterator[TextIO]:
    if path is None or path == "-":
        yield sys.stdin
        return
    with open(path, "r", encoding="utf-8") as stream:
        yield stream


@contextmanager
def _open_out(path: str | None) -> Iterator[TextIO]:
    if path is None or path == "-":
        yield sys.stdout
        sys.stdout.flush()
        return
    with open(path, "w", encoding="utf-8") as stream:
        yield stream


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return value


def _nonnegative_int(text: str) -> int:
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError("must not be negative")
    return value


def _load_weights(path: str | None) -> LogLinearWeights | None:
    if path is None:
        return None
    with _open_in(path) as stream:
        return LogLinearWeights.from_config(stream)


def _feature_list(text: str) -> tuple[str, ...]:
    names = tuple(name.strip() for name in text.split(",") if name.strip())
    if not names:
        raise argparse.ArgumentTypeError("empty feature list")
    for name in names:
        try:
            _feature_index(name)
        except TableError as exc:
            raise argparse.ArgumentTypeError(str(exc)) from None
    return names


def _name_pair(text: str) -> tuple[str, str]:
    names = tuple(name.strip() for name in text.split(","))
    if len(names) != 2 or not all(names):
        raise argparse.ArgumentTypeError("expected two comma-separated names")
    return names


# --- subcommands -------------------------------------------------------------

def cmd_pivot(args: argparse.Namespace) -> int:
    cfg = PivotConfig(
        top_n=args.top_n,
        weights_sp=_load_weights(args.weights_sp),
        weights_pt=_load_weights(args.weights_pt),
        min_alignment_links=args.min_links,
        tmpdir=args.tmpdir,
        chunk_size=args.chunk_size)
    reordering = args.reordering_out is not None
    if reordering and args.reordering_pt is None:
        raise UsageError("--reordering-out requires --reordering-pt")
    if reordering and ("-" in (args.sp, args.pt, args.output) or args.output is None):
        raise UsageError("reordering output needs file paths for --sp, --pt and -o,"
                         " they are read twice")
    if args.sp == "-" and args.pt == "-":
        raise UsageError("only one of --sp and --pt can read stdin")
    with _open_in(args.sp) as sp_f, _open_in(args.pt) as pt_f, \
            _open_out(args.output) as out:
        sp_extras, sp_rows = read_rows(sp_f)
        pt_extras, pt_rows = read_rows(pt_f)
        write_rows(compose_rows(sp_rows, sp_extras, pt_rows, pt_extras, cfg), out)
    if not reordering:
        return 0
    if args.reordering_sp is not None:
        with _open_in(args.reordering_sp) as stream:
            entries = parse_reordering_table(stream)
        logger.info("source-pivot reordering table (%d entries) is validated"
                    " but unused by the pivot mixture", len(entries))
    with _open_in(args.reordering_pt) as stream:
        pt_reo = parse_reordering_table(stream)
    with _open_in(args.sp) as sp_f, _open_in(args.pt) as pt_f, \
            _open_in(args.output) as composed_f, \
            _open_out(args.reordering_out) as out:
        sp_extras, sp_rows = read_rows(sp_f)
        pt_extras, pt_rows = read_rows(pt_f)
        _, composed = read_rows(composed_f)
        rows = reorder_rows(sp_rows, sp_extras, pt_rows, pt_extras,
                            reordering_to_rows(pt_reo), composed, cfg)
        write_reordering_rows(rows, out)
    return 0


def cmd_filter(args: argparse.Namespace) -> int:
    weights = _load_weights(args.weights)
    with _open_in(args.input) as stream, _open_out(args.output) as out:
        extras, rows = read_rows(stream)
        kept = filter_rows(rows, extras, weights, args.top_n,
                           tmpdir=args.tmpdir, chunk_size=args.chunk_size)
        write_rows(kept, out, extras)
    return 0


def _build_scorer(args: argparse.Namespace):
    if args.kind == "connectivity":
        return connectivity_scores, ("conn_s", "conn_t")
    if args.src_lex is None or args.tgt_lex is None:
        raise UsageError(f"--kind {args.kind} requires --src-lex and --tgt-lex")
    with _open_in(args.src_lex) as stream:
        src_lex = MorphLexicon.load(stream)
    with _open_in(args.tgt_lex) as stream:
        tgt_lex = MorphLexicon.load(stream)
    if args.kind == "rules":
        if args.rules is None:
            rules = default_rules()
        else:
            with _open_in(args.rules) as stream:
                rules = load_rules(stream)
        scorer = functools.partial(rule_morph_scores, src_lex=src_lex,
                                   tgt_lex=tgt_lex, rules=rules,
                                   features=args.features)
        return scorer, ("morph_rule_s", "morph_rule_t")
    if args.fc_model is None:
        raise UsageError("--kind induced requires --fc-model")
    with _open_in(args.fc_model) as stream:
        model = FcModel.load(stream)
    scorer = functools.partial(induced_morph_scores, src_lex=src_lex,
                               tgt_lex=tgt_lex, model=model)
    return scorer, ("morph_fc_s", "morph_fc_t")


def cmd_annotate(args: argparse.Namespace) -> int:
    scorer, default_names = _build_scorer(args)
    names = args.names if args.names is not None else default_names
    with _open_in(args.input) as stream:
        table = parse_phrase_table(stream)
    annotated = annotate_table(table, scorer, names, threads=args.threads)
    with _open_out(args.output) as out:
        write_phrase_table(annotated, out)
    return 0


def cmd_lexicon(args: argparse.Namespace) -> int:
    paths = args.input if args.input else [None]
    streams = []
    try:
        for path in paths:
            if path is None or path == "-":
                streams.append(sys.stdin)
            else:
                streams.append(open(path, "r", encoding="utf-8"))
        lexicon = build_lexicon(streams, fc_features=args.fc_features,
                                na_value=args.na_value)
    finally:
        for stream in streams:
            if stream is not sys.stdin:
                stream.close()
    with _open_out(args.output) as out:
        lexicon.save(out)
    return 0


def cmd_rules_check(args: argparse.Namespace) -> int:
    if args.rules is None:
        rules = default_rules()
    else:
        with _open_in(args.rules) as stream:
            rules = load_rules(stream)
    with _open_out(args.output) as out:
        if not args.pair:
            for feature in rules.features():
                out.write(f"{feature}: {len(rules.pairs(feature))} pairs\n")
            out.write(f"total: {len(rules)} pairs\n")
            return 0
        for feature, src_value, tgt_value in args.pair:
            verdict = ("allowed" if rules.allows(feature, src_value, tgt_value)
                       else "rejected")
            out.write(f"{feature.lower()} {src_value} {tgt_value}: {verdict}\n")
    return 0


def cmd_fc_train(args: argparse.Namespace) -> int:
    with _open_in(args.src_lex) as stream:
        src_lex = MorphLexicon.load(stream)
    with _open_in(args.tgt_lex) as stream:
        tgt_lex = MorphLexicon.load(stream)
    with _open_in(args.src) as src_f, _open_in(args.tgt) as tgt_f, \
            _open_in(args.align) as align_f:
        model = train_fc_model(src_f, tgt_f, align_f, src_lex, tgt_lex)
    with _open_out(args.output) as out:
        model.save(out)
    return 0


def cmd_combine(args: argparse.Namespace) -> int:
    tables = []
    for name, path in args.input:
        with _open_in(path) as stream:
            tables.append((parse_phrase_table(stream), name))
    combined = combine_tables(tables)
    with _open_out(args.output) as out:
        write_phrase_table(combined, out)
    return 0


def cmd_decode(args: argparse.Namespace) -> int:
    cfg = DecodeConfig(
        weights=_load_weights(args.weights),
        max_phrase_len=args.max_phrase_len,
        unknown_word_penalty=args.unknown_penalty)
    with _open_in(args.table) as stream:
        table = parse_phrase_table(stream)
    index = build_phrase_index(table, cfg)
    with _open_in(args.input) as stream:
        sentences = read_sentences(stream)
    with _open_out(args.output) as out:
        for tokens in ordered_map(
                lambda sentence: _decode_one(sentence, index, cfg),
                sentences, args.threads):
            out.write(" ".join(tokens) + "\n")
    return 0


def cmd_bleu(args: argparse.Namespace) -> int:
    with _open_in(args.hyp) as stream:
        hypotheses = read_sentences(stream)
    reference_sets = None
    for path in args.ref:
        with _open_in(path) as stream:
            column = read_sentences(stream)
        if reference_sets is None:
            reference_sets = [[ref] for ref in column]
        else:
            if len(column) != len(reference_sets):
                raise TableError(
                    f"reference file {path!r} has {len(column)} sentences,"
                    f" expected {len(reference_sets)}")
            for refs, ref in zip(reference_sets, column):
                refs.append(ref)
    if reference_sets is not None and len(hypotheses) != len(reference_sets):
        raise TableError(
            f"{len(hypotheses)} hypotheses against {len(reference_sets)}"
            " reference sentences")
    result = bleu4_report(hypotheses, reference_sets)
    with _open_out(args.output) as out:
        out.write(f"BLEU = {result.bleu:.6f}\n")
        out.write(" ".join(f"p{i} = {p:.6f}"
                           for i, p in enumerate(result.precisions, 1)) + "\n")
        out.write(f"BP = {result.brevity_penalty:.6f}"
                  f" hyp_len = {result.hyp_length}"
                  f" ref_len = {result.ref_length}\n")
    return 0


def cmd_stats(args: argparse.Namespace) -> int:
    with _open_in(args.input) as stream:
        extras, rows = read_rows(stream)
        manifest = CORE_FEATURES + extras
        bins = [[0] * HIST_BINS for _ in manifest]
        overflow = [0] * len(manifest)
        sources = set()
        entries = 0
        for src, _, scores, _ in rows:
            entries += 1
            sources.add(src)
            for k, value in enumerate(scores):
                if value > 1.0:
                    overflow[k] += 1
                else:
                    bins[k][min(int(value * HIST_BINS), HIST_BINS - 1)] += 1
    with _open_out(args.output) as out:
        out.write(f"entries\t{entries}\n")
        out.write(f"distinct_sources\t{len(sources)}\n")
        out.write("features\t" + " ".join(manifest) + "\n")
        for k, name in enumerate(manifest):
            counts = " ".join(str(c) for c in bins[k])
            out.write(f"hist\t{name}\t{counts}\t>1 {overflow[k]}\n")
    return 0


def cmd_estimate_size(args: argparse.Namespace) -> int:
    if args.sp == "-" and args.pt == "-":
        raise UsageError("only one of --sp and --pt can read stdin")
    with _open_in(args.sp) as sp_f, _open_in(args.pt) as pt_f:
        _, sp_rows = read_rows(sp_f)
        _, pt_rows = read_rows(pt_f)
        total = estimate_pivot_size_rows(sp_rows, pt_rows)
    with _open_out(args.output) as out:
        out.write(f"{total}\n")
    return 0


# --- parser ------------------------------------------------------------------

class UsageError(Exception):
    """Bad flag combinations that argparse cannot express."""


def _add_io(parser: argparse.ArgumentParser, input_help: str) -> None:
    parser.add_argument("-i", "--input", default=None, help=input_help)
    parser.add_argument("-o", "--output", default=None,
                        help="output file (default stdout)")


def _add_threads(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--threads", type=_positive_int, default=default_threads(),
                        help="worker threads; results do not depend on this"
                             " (default: machine cores)")


def _add_sort_opts(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--tmpdir", default=None,
                        help="scratch directory for sort spills (default:"
                             " PIVOTSMITH_TMPDIR or the system tmpdir)")
    parser.add_argument("--chunk-size", type=_positive_int, default=250_000,
                        help="rows sorted per in-memory chunk (default 250000)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pivotsmith",
        description="Phrase table triangulation and evaluation toolkit.")
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("--verbose", action="store_true",
                        help="log progress details to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("pivot", help="triangulate two tables through a pivot")
    p.add_argument("--sp", required=True, help="source-pivot phrase table")
    p.add_argument("--pt", required=True, help="pivot-target phrase table")
    p.add_argument("-o", "--output", default=None,
                   help="composed table (default stdout)")
    p.add_argument("--top-n", type=_positive_int, default=DEFAULT_TOP_N,
                   help=f"entries kept per source phrase (default {DEFAULT_TOP_N})")
    p.add_argument("--weights-sp", default=None,
                   help="log-linear weights config for ranking the sp table")
    p.add_argument("--weights-pt", default=None,
                   help="log-linear weights config for ranking the pt table")
    p.add_argument("--min-links", type=_nonnegative_int, default=0,
                   help="drop composed pairs with fewer projected alignment links")
    p.add_argument("--reordering-sp", default=None,
                   help="source-pivot reordering table (validated only)")
    p.add_argument("--reordering-pt", default=None,
                   help="pivot-target reordering table")
    p.add_argument("--reordering-out", default=None,
                   help="write a reordering table for the composed pairs")
    _add_sort_opts(p)
    _add_threads(p)
    p.set_defaults(func=cmd_pivot)

    p = sub.add_parser("filter", help="keep the top-n entries per source phrase")
    _add_io(p, "phrase table (default stdin)")
    p.add_argument("--top-n", type=_positive_int, default=DEFAULT_TOP_N,
                   help=f"entries kept per source phrase (default {DEFAULT_TOP_N})")
    p.add_argument("--weights", default=None, help="log-linear weights config")
    _add_sort_opts(p)
    p.set_defaults(func=cmd_filter)

    p = sub.add_parser("annotate", help="append constraint feature columns")
    _add_io(p, "phrase table (default stdin)")
    p.add_argument("--kind", required=True,
                   choices=("connectivity", "rules", "induced"))
    p.add_argument("--src-lex", default=None, help="source morphological lexicon")
    p.add_argument("--tgt-lex", default=None, help="target morphological lexicon")
    p.add_argument("--rules", default=None,
                   help="agreement rules file (default: bundled rules)")
    p.add_argument("--features", type=_feature_list,
                   default=DEFAULT_RULE_FEATURES,
                   help="comma-separated features for --kind rules"
                        " (default gen,num,det,pos)")
    p.add_argument("--fc-model", default=None,
                   help="FC model file for --kind induced")
    p.add_argument("--names", type=_name_pair, default=None,
                   help="two comma-separated output column names")
    _add_threads(p)
    p.set_defaults(func=cmd_annotate)

    p = sub.add_parser("lexicon", help="build a morphological lexicon")
    p.add_argument("-i", "--input", action="append", default=None,
                   help="tagged corpus, repeatable (default stdin)")
    p.add_argument("-o", "--output", default=None,
                   help="lexicon file (default stdout)")
    p.add_argument("--fc-features", type=_feature_list,
                   default=DEFAULT_FC_FEATURES,
                   help="features joined into the FC tag (default gen,num,det)")
    p.add_argument("--na-value", default=NA_VALUE,
                   help=f"value marking an absent feature (default {NA_VALUE})")
    p.set_defaults(func=cmd_lexicon)

    p = sub.add_parser("rules-check", help="query an agreement rules file")
    p.add_argument("--rules", default=None,
                   help="rules file (default: bundled rules)")
    p.add_argument("--pair", nargs=3, action="append", default=None,
                   metavar=("FEATURE", "SRC", "TGT"),
                   help="value pair to check, repeatable; without pairs a"
                        " summary is printed")
    p.add_argument("-o", "--output", default=None,
                   help="output file (default stdout)")
    p.set_defaults(func=cmd_rules_check)

    p = sub.add_parser("fc-train", help="train an FC tag translation model")
    p.add_argument("--src", required=True, help="tokenized source sentences")
    p.add_argument("--tgt", required=True, help="tokenized target sentences")
    p.add_argument("--align", required=True,
                   help="word alignments, one i-j list per line")
    p.add_argument("--src-lex", required=True, help="source morphological lexicon")
    p.add_argument("--tgt-lex", required=True, help="target morphological lexicon")
    p.add_argument("-o", "--output", default=None,
                   help="model file (default stdout)")
    p.set_defaults(func=cmd_fc_train)

    p = sub.add_parser("combine", help="merge tables with origin indicators")
    p.add_argument("-i", "--input", action="append", required=True,
                   type=_name_eq_path, metavar="NAME=FILE",
                   help="named input table, repeat at least twice")
    p.add_argument("-o", "--output", default=None,
                   help="combined table (default stdout)")
    p.set_defaults(func=cmd_combine)

    p = sub.add_parser("decode", help="monotone segment-and-translate decoding")
    p.add_argument("--table", required=True, help="phrase table")
    p.add_argument("--weights", default=None, help="log-linear weights config")
    p.add_argument("--input", default=None,
                   help="tokenized input sentences (default stdin)")
    p.add_argument("-o", "--output", default=None,
                   help="translations (default stdout)")
    p.add_argument("--max-phrase-len", type=_positive_int, default=8,
                   help="longest source span matched (default 8)")
    p.add_argument("--unknown-penalty", type=float, default=-10.0,
                   help="log score for passing an unknown token through"
                        " (default -10.0)")
    _add_threads(p)
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("bleu", help="corpus BLEU of a hypothesis file")
    p.add_argument("--hyp", required=True, help="hypothesis sentences")
    p.add_argument("--ref", action="append", required=True,
                   help="reference sentences, repeatable for multiple references")
    p.add_argument("-o", "--output", default=None,
                   help="output file (default stdout)")
    p.set_defaults(func=cmd_bleu)

    p = sub.add_parser("stats", help="entry counts and score histograms")
    _add_io(p, "phrase table (default stdin)")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("estimate-size", help="pair combinations a pivot join"
                                             " would enumerate")
    p.add_argument("--sp", required=True, help="source-pivot phrase table")
    p.add_argument("--pt", required=True, help="pivot-target phrase table")
    p.add_argument("-o", "--output", default=None,
                   help="output file (default stdout)")
    p.set_defaults(func=cmd_estimate_size)

    return parser


def _name_eq_path(text: str) -> tuple[str, str]:
    name, sep, path = text.partition("=")
    if not sep or not name or not path:
        raise argparse.ArgumentTypeError("expected NAME=FILE")
    return name, path


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "combine" and len(args.input) < 2:
        parser.error("combine needs at least two -i NAME=FILE inputs")
    try:
        return args.func(args)
    except UsageError as exc:
        parser.error(str(exc))
    except TableError as exc:
        print(f"pivotsmith: error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"pivotsmith: error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"pivotsmith: error: {exc}", file=sys.stderr)
        return 1


def console_main() -> None:
    sys.exit(main())


if __name__ == "__main__":
    console_main()
