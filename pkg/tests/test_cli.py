"""Command line behavior: happy paths, exit codes, determinism."""

from __future__ import annotations

import io
import random

import pytest

from conftest import entry, random_pivot_pair, table
from pivotsmith.cli import main
from pivotsmith.tablecore import (
    parse_phrase_table,
    parse_reordering_table,
    write_phrase_table,
)
from pivotsmith.triangulate import PivotConfig, pivot_compose, pivot_reordering


def write_table(tbl, path):
    with open(path, "w", encoding="utf-8") as stream:
        write_phrase_table(tbl, stream)


@pytest.fixture
def toy_files(tmp_path):
    sp = table([
        entry("a", "x", scores=(0.5, 0.5, 0.5, 0.5), align=[(0, 0)]),
        entry("a", "y", scores=(0.5, 0.5, 0.5, 0.5), align=[(0, 0)]),
        entry("b", "x", scores=(1.0, 1.0, 1.0, 1.0), align=[(0, 0)]),
    ])
    pt = table([
        entry("x", "u", scores=(0.75, 0.75, 0.5, 0.5), align=[(0, 0)]),
        entry("x", "v", scores=(0.25, 0.25, 0.5, 0.5), align=[(0, 0)]),
        entry("y", "u", scores=(1.0, 1.0, 0.5, 0.5), align=[(0, 0)]),
    ])
    sp_path = tmp_path / "sp.txt"
    pt_path = tmp_path / "pt.txt"
    write_table(sp, sp_path)
    write_table(pt, pt_path)
    return sp, pt, str(sp_path), str(pt_path), tmp_path


class TestPivotCommand:
    def test_matches_library_output(self, toy_files):
        sp, pt, sp_path, pt_path, tmp_path = toy_files
        out_path = tmp_path / "out.txt"
        assert main(["pivot", "--sp", sp_path, "--pt", pt_path,
                     "-o", str(out_path)]) == 0
        expected = io.StringIO()
        write_phrase_table(pivot_compose(sp, pt), expected)
        assert out_path.read_text() == expected.getvalue()

    def test_reruns_are_byte_identical(self, toy_files):
        _, _, sp_path, pt_path, tmp_path = toy_files
        outputs = []
        for k in range(3):
            out_path = tmp_path / f"out{k}.txt"
            assert main(["pivot", "--sp", sp_path, "--pt", pt_path,
                         "-o", str(out_path), "--chunk-size", "2"]) == 0
            outputs.append(out_path.read_bytes())
        assert outputs[0] == outputs[1] == outputs[2]

    def test_stdout_and_stdin(self, toy_files, capsys, monkeypatch):
        _, _, sp_path, pt_path, _ = toy_files
        with open(pt_path, encoding="utf-8") as stream:
            monkeypatch.setattr("sys.stdin", stream)
            assert main(["pivot", "--sp", sp_path, "--pt", "-"]) == 0
        out = capsys.readouterr().out
        assert "a ||| u |||" in out

    def test_both_stdin_rejected(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["pivot", "--sp", "-", "--pt", "-"])
        assert exc.value.code == 2

    def test_data_error_exits_one_with_line_number(self, tmp_path, capsys):
        bad = tmp_path / "bad.txt"
        bad.write_text("a ||| x ||| 2.0 1 1 1 |||\n")
        good = tmp_path / "good.txt"
        good.write_text("x ||| u ||| 1 1 1 1 |||\n")
        assert main(["pivot", "--sp", str(bad), "--pt", str(good)]) == 1
        err = capsys.readouterr().err
        assert "line 1" in err and "score out of range" in err

    def test_missing_file_exits_one(self, tmp_path, capsys):
        good = tmp_path / "good.txt"
        good.write_text("x ||| u ||| 1 1 1 1 |||\n")
        assert main(["pivot", "--sp", str(tmp_path / "nope"),
                     "--pt", str(good)]) == 1
        assert "error" in capsys.readouterr().err

    def test_tmpdir_env_and_flag(self, toy_files, monkeypatch):
        _, _, sp_path, pt_path, tmp_path = toy_files
        scratch = tmp_path / "scratch"
        scratch.mkdir()
        monkeypatch.setenv("PIVOTSMITH_TMPDIR", str(scratch))
        out_path = tmp_path / "out.txt"
        assert main(["pivot", "--sp", sp_path, "--pt", pt_path,
                     "-o", str(out_path), "--chunk-size", "1"]) == 0
        assert list(scratch.iterdir()) == []
        assert out_path.read_text()

    def test_reordering_outputs_match_library(self, toy_files):
        sp, pt, sp_path, pt_path, tmp_path = toy_files
        reo_pt = tmp_path / "reo_pt.txt"
        reo_pt.write_text(
            "x ||| u ||| 0.8 0.1 0.1 0.6 0.2 0.2\n"
            "y ||| u ||| 0.2 0.4 0.4 0.3 0.3 0.4\n")
        out_path = tmp_path / "out.txt"
        reo_out = tmp_path / "reo_out.txt"
        assert main(["pivot", "--sp", sp_path, "--pt", pt_path,
                     "-o", str(out_path),
                     "--reordering-pt", str(reo_pt),
                     "--reordering-out", str(reo_out)]) == 0
        got = parse_reordering_table(
            reo_out.read_text().splitlines(keepends=True))
        with open(reo_pt, encoding="utf-8") as stream:
            pt_reo = parse_reordering_table(stream)
        want = pivot_reordering((), pt_reo, sp, pt)
        assert got == want

    def test_reordering_needs_pt_table(self, toy_files):
        _, _, sp_path, pt_path, tmp_path = toy_files
        with pytest.raises(SystemExit) as exc:
            main(["pivot", "--sp", sp_path, "--pt", pt_path,
                  "-o", str(tmp_path / "o.txt"),
                  "--reordering-out", str(tmp_path / "r.txt")])
        assert exc.value.code == 2

    def test_min_links_flag(self, tmp_path):
        sp = tmp_path / "sp.txt"
        sp.write_text("a ||| x ||| 1 1 1 1 ||| 0-0\nb ||| y ||| 1 1 1 1 |||\n")
        pt = tmp_path / "pt.txt"
        pt.write_text("x ||| u ||| 1 1 1 1 ||| 0-0\ny ||| v ||| 1 1 1 1 |||\n")
        out = tmp_path / "out.txt"
        assert main(["pivot", "--sp", str(sp), "--pt", str(pt),
                     "-o", str(out), "--min-links", "1"]) == 0
        assert out.read_text() == "a ||| u ||| 1 1 1 1 ||| 0-0\n"


class TestFilterCommand:
    def test_top_one(self, toy_files, capsys):
        _, _, _, pt_path, _ = toy_files
        assert main(["filter", "-i", pt_path, "--top-n", "1"]) == 0
        out = capsys.readouterr().out
        assert "x ||| u |||" in out
        assert "x ||| v |||" not in out
        assert "y ||| u |||" in out

    def test_weights_file(self, toy_files, tmp_path, capsys):
        _, _, _, pt_path, _ = toy_files
        weights = tmp_path / "w.cfg"
        weights.write_text("phi_fwd = -1.0\nlex_fwd = 0\nphi_bwd = 0\nlex_bwd = 0\n")
        assert main(["filter", "-i", pt_path, "--top-n", "1",
                     "--weights", str(weights)]) == 0
        out = capsys.readouterr().out
        # Negative weight inverts the ranking for the x group.
        assert "x ||| v |||" in out

    def test_incomplete_weights_exit_one(self, toy_files, tmp_path, capsys):
        _, _, _, pt_path, _ = toy_files
        weights = tmp_path / "w.cfg"
        weights.write_text("phi_fwd = 1.0\n")
        assert main(["filter", "-i", pt_path, "--top-n", "1",
                     "--weights", str(weights)]) == 1
        assert "no weight configured" in capsys.readouterr().err


MORPH_SRC_CORPUS = (
    "sa\tNOUN\tFeminine\tSingular\tNA\n"
    "sb\tNOUN\tMasculine\tSingular\tNA\n"
    "\n"
    "sa\tNOUN\tFeminine\tSingular\tNA\n"
)
MORPH_TGT_CORPUS = (
    "ta\tNOUN\tFeminine\tSingular\tNA\n"
    "tb\tNOUN\tMasculine\tSingular\tNA\n"
)


@pytest.fixture
def morph_files(tmp_path):
    src_corpus = tmp_path / "src_tagged.tsv"
    tgt_corpus = tmp_path / "tgt_tagged.tsv"
    src_corpus.write_text(MORPH_SRC_CORPUS)
    tgt_corpus.write_text(MORPH_TGT_CORPUS)
    src_lex = tmp_path / "src.lex"
    tgt_lex = tmp_path / "tgt.lex"
    assert main(["lexicon", "-i", str(src_corpus), "-o", str(src_lex)]) == 0
    assert main(["lexicon", "-i", str(tgt_corpus), "-o", str(tgt_lex)]) == 0
    return tmp_path, src_lex, tgt_lex


class TestMorphCommands:
    def test_lexicon_output(self, morph_files):
        _, src_lex, _ = morph_files
        text = src_lex.read_text()
        assert "sa\tNOUN\tFeminine\tSingular\tNA\t[Feminine+Singular]\t2\n" in text

    def test_fc_train_and_annotate(self, morph_files):
        tmp_path, src_lex, tgt_lex = morph_files
        (tmp_path / "psrc.txt").write_text("sa sb\nsa\n")
        (tmp_path / "ptgt.txt").write_text("ta tb\nta\n")
        (tmp_path / "palign.txt").write_text("0-0 1-1\n0-0\n")
        model_path = tmp_path / "model.tsv"
        assert main(["fc-train", "--src", str(tmp_path / "psrc.txt"),
                     "--tgt", str(tmp_path / "ptgt.txt"),
                     "--align", str(tmp_path / "palign.txt"),
                     "--src-lex", str(src_lex), "--tgt-lex", str(tgt_lex),
                     "-o", str(model_path)]) == 0
        text = model_path.read_text()
        assert "[Feminine+Singular]\t[Feminine+Singular]\t1\t1\n" in text

        tbl = tmp_path / "table.txt"
        tbl.write_text("sa ||| ta ||| 1 1 1 1 ||| 0-0\n"
                       "sa ||| tb ||| 1 1 1 1 ||| 0-0\n")
        out = tmp_path / "annotated.txt"
        assert main(["annotate", "-i", str(tbl), "-o", str(out),
                     "--kind", "induced",
                     "--src-lex", str(src_lex), "--tgt-lex", str(tgt_lex),
                     "--fc-model", str(model_path)]) == 0
        annotated = parse_phrase_table(out.read_text().splitlines())
        assert annotated.manifest[4:] == ("morph_fc_s", "morph_fc_t")
        by_tgt = {e.tgt: e for e in annotated}
        assert by_tgt[("ta",)].scores.extra("morph_fc_s") == 1.0
        assert by_tgt[("tb",)].scores.extra("morph_fc_s") == 0.0

    def test_annotate_connectivity_threads_identical(self, tmp_path):
        rng = random.Random(71)
        sp, _ = random_pivot_pair(rng, n_src=15, n_pivot=10)
        tbl = tmp_path / "t.txt"
        write_table(sp, tbl)
        outs = []
        for threads in ("1", "8"):
            out = tmp_path / f"o{threads}.txt"
            assert main(["annotate", "-i", str(tbl), "-o", str(out),
                         "--kind", "connectivity", "--threads", threads]) == 0
            outs.append(out.read_bytes())
        assert outs[0] == outs[1]

    def test_annotate_rules_with_bundled_default(self, morph_files):
        tmp_path, src_lex, tgt_lex = morph_files
        tbl = tmp_path / "table.txt"
        tbl.write_text("sa ||| ta ||| 1 1 1 1 ||| 0-0\n")
        out = tmp_path / "annotated.txt"
        assert main(["annotate", "-i", str(tbl), "-o", str(out),
                     "--kind", "rules",
                     "--src-lex", str(src_lex), "--tgt-lex", str(tgt_lex)]) == 0
        annotated = parse_phrase_table(out.read_text().splitlines())
        e = annotated.entries[0]
        # gen and num agree under the bundled pairs, det and pos do not.
        assert e.scores.extra("morph_rule_s") == pytest.approx(0.5)

    def test_annotate_missing_lexicons_is_usage_error(self, tmp_path):
        tbl = tmp_path / "t.txt"
        tbl.write_text("a ||| x ||| 1 1 1 1 |||\n")
        with pytest.raises(SystemExit) as exc:
            main(["annotate", "-i", str(tbl), "--kind", "rules"])
        assert exc.value.code == 2

    def test_rules_check_queries(self, capsys):
        assert main(["rules-check",
                     "--pair", "gen", "Feminine", "Both",
                     "--pair", "gen", "Masculine", "Feminine"]) == 0
        out = capsys.readouterr().out
        assert "gen Feminine Both: allowed" in out
        assert "gen Masculine Feminine: rejected" in out

    def test_rules_check_summary(self, capsys):
        assert main(["rules-check"]) == 0
        out = capsys.readouterr().out
        assert "total: 13 pairs" in out


class TestCombineCommand:
    def test_merges_with_origins(self, tmp_path, capsys):
        a = tmp_path / "a.txt"
        b = tmp_path / "b.txt"
        a.write_text("a ||| x ||| 0.9 0.9 0.9 0.9 |||\n")
        b.write_text("a ||| x ||| 0.1 0.1 0.1 0.1 |||\n")
        assert main(["combine", "-i", f"direct={a}", "-i", f"pivoted={b}"]) == 0
        out = capsys.readouterr().out
        assert out.startswith("#features: origin_direct origin_pivoted\n")
        assert out.count("a ||| x |||") == 2

    def test_single_input_is_usage_error(self, tmp_path):
        a = tmp_path / "a.txt"
        a.write_text("a ||| x ||| 1 1 1 1 |||\n")
        with pytest.raises(SystemExit) as exc:
            main(["combine", "-i", f"one={a}"])
        assert exc.value.code == 2


class TestDecodeAndBleu:
    def test_decode_to_file(self, tmp_path):
        tbl = tmp_path / "t.txt"
        tbl.write_text("a ||| A ||| 1 1 1 1 |||\n"
                       "b c ||| BC ||| 1 1 1 1 |||\n")
        inp = tmp_path / "in.txt"
        inp.write_text("a b c\nzzz a\n\n")
        out = tmp_path / "out.txt"
        assert main(["decode", "--table", str(tbl), "--input", str(inp),
                     "-o", str(out)]) == 0
        assert out.read_text() == "A BC\nzzz A\n\n"

    def test_decode_threads_identical(self, tmp_path):
        rng = random.Random(72)
        vocab = [f"w{i}" for i in range(8)]
        lines = []
        seen = set()
        for _ in range(30):
            src = " ".join(rng.choice(vocab)
                           for _ in range(rng.randint(1, 3)))
            tgt = rng.choice(vocab).upper()
            if src in seen:
                continue
            seen.add(src)
            lines.append(f"{src} ||| {tgt} ||| 0.5 0.5 0.5 0.5 |||\n")
        tbl = tmp_path / "t.txt"
        tbl.write_text("".join(lines))
        inp = tmp_path / "in.txt"
        inp.write_text("".join(
            " ".join(rng.choice(vocab + ["oov"]) for _ in range(8)) + "\n"
            for _ in range(40)))
        outs = []
        for threads in ("1", "8"):
            out = tmp_path / f"o{threads}.txt"
            assert main(["decode", "--table", str(tbl), "--input", str(inp),
                         "-o", str(out), "--threads", threads]) == 0
            outs.append(out.read_bytes())
        assert outs[0] == outs[1]

    def test_bleu_output_format(self, tmp_path, capsys):
        hyp = tmp_path / "hyp.txt"
        ref = tmp_path / "ref.txt"
        hyp.write_text("a b c d\n")
        ref.write_text("a b c d e\n")
        assert main(["bleu", "--hyp", str(hyp), "--ref", str(ref)]) == 0
        out = capsys.readouterr().out
        assert "BLEU = 0.778801" in out
        assert "p1 = 1.000000" in out
        assert "BP = 0.778801" in out
        assert "hyp_len = 4" in out

    def test_bleu_multiple_references(self, tmp_path, capsys):
        hyp = tmp_path / "hyp.txt"
        hyp.write_text("a b c d\n")
        ref1 = tmp_path / "r1.txt"
        ref1.write_text("w x y z\n")
        ref2 = tmp_path / "r2.txt"
        ref2.write_text("a b c d\n")
        assert main(["bleu", "--hyp", str(hyp),
                     "--ref", str(ref1), "--ref", str(ref2)]) == 0
        assert "BLEU = 1.000000" in capsys.readouterr().out

    def test_bleu_length_mismatch_exits_one(self, tmp_path, capsys):
        hyp = tmp_path / "hyp.txt"
        hyp.write_text("a\nb\n")
        ref = tmp_path / "ref.txt"
        ref.write_text("a\n")
        assert main(["bleu", "--hyp", str(hyp), "--ref", str(ref)]) == 1
        assert "error" in capsys.readouterr().err


class TestStatsAndEstimate:
    def test_stats_output(self, toy_files, capsys):
        _, _, sp_path, _, _ = toy_files
        assert main(["stats", "-i", sp_path]) == 0
        out = capsys.readouterr().out
        assert "entries\t3" in out
        assert "distinct_sources\t2" in out
        assert "features\tphi_fwd lex_fwd phi_bwd lex_bwd" in out
        assert out.count("hist\t") == 4

    def test_estimate_size(self, toy_files, capsys):
        _, _, sp_path, pt_path, _ = toy_files
        assert main(["estimate-size", "--sp", sp_path, "--pt", pt_path]) == 0
        # a->x, a->y, b->x against x->u, x->v, y->u enumerates 5 pairs.
        assert capsys.readouterr().out == "5\n"


def test_unknown_command_exits_two():
    with pytest.raises(SystemExit) as exc:
        main(["not-a-command"])
    assert exc.value.code == 2
