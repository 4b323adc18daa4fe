import numpy as np
import pytest

from morphprobe.errors import DimensionMismatch, FormatError
from morphprobe.ingest import (
    EmbeddingTable, dump_annotated_treebank, dump_embeddings, dump_syllabified_lexicon,
    dump_unimorph, load_annotated_treebank, load_embeddings, load_frequency_list,
    load_syllabified_lexicon, load_unimorph,
)
from morphprobe.schema import PERSON, POLARITY, POS, TENSE, parse_bundle


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


class TestUnimorph:
    def test_turkish_line(self, tmp_path):
        p = write(tmp_path, "u.tsv", "istemek\tistemeyecek\tV;NEG;FUT;3;SG\n")
        (e,), stats = load_unimorph(p)
        assert (e.lemma, e.form) == ("istemek", "istemeyecek")
        assert e.bundle.get(POS) == "V" and e.bundle.get(POLARITY) == "NEG"
        assert e.bundle.get(TENSE) == "FUT" and e.bundle.get(PERSON) == "3SG"
        assert stats.total == stats.parsed == 1

    def test_empty_file(self, tmp_path):
        ents, stats = load_unimorph(write(tmp_path, "u.tsv", ""))
        assert ents == [] and stats.total == 0 and stats.n_skipped == 0

    def test_two_columns(self, tmp_path):
        p = write(tmp_path, "u.tsv", "a\ta\tN\nb\tb\n")
        with pytest.raises(FormatError) as ei:
            load_unimorph(p)
        assert ei.value.line == 2

    def test_skips_are_counted(self, tmp_path):
        p = write(tmp_path, "u.tsv", "a\ta\tN;SG\nb\tb c\tN;PL\nc\tc\tN;ACC;DAT\nd\td\t\n")
        ents, stats = load_unimorph(p)
        assert [e.form for e in ents] == ["a"]
        assert stats.skipped == {"multiword": 1, "malformed_bundle": 1, "empty_bundle": 1}
        assert stats.parsed + stats.n_skipped == stats.total

    def test_round_trip(self, tmp_path, entries):
        p = tmp_path / "rt.tsv"
        dump_unimorph(entries[:500], p)
        again, _ = load_unimorph(p)
        assert again == entries[:500]


class TestFrequency:
    def test_prefix(self, tmp_path):
        f = load_frequency_list(write(tmp_path, "f.txt", "de 100\nve 90\nbir 80\n"), cutoff_rank=2)
        assert f.is_frequent("de") and "ve" in f and not f.is_frequent("bir")

    def test_non_monotone_warns(self, tmp_path, caplog):
        f = load_frequency_list(write(tmp_path, "f.txt", "a 5\nb 9\n"))
        assert [w for w, _ in f.words] == ["a", "b"]
        assert "monotone" in caplog.text

    def test_bad_count(self, tmp_path):
        with pytest.raises(FormatError):
            load_frequency_list(write(tmp_path, "f.txt", "a x\n"))

    def test_missing_counts_and_duplicates(self, tmp_path):
        f = load_frequency_list(write(tmp_path, "f.txt", "a\nb\na\nc\n"))
        assert [w for w, _ in f.words] == ["a", "b", "c"]
        assert [c for _, c in f.words] == sorted([c for _, c in f.words], reverse=True)


class TestEmbeddings:
    def test_header(self, tmp_path):
        t = load_embeddings(write(tmp_path, "e.vec", "2 3\na 1 0 0\nb 0 1 0\n"))
        assert t.dim == 3 and len(t) == 2
        assert np.array_equal(t.lookup("b"), [0, 1, 0])

    def test_unk(self, tmp_path):
        t = load_embeddings(write(tmp_path, "e.vec", "2 3\na 1 0 0\nb 0 1 0\n"), seed=4)
        v = t.lookup("zzz")
        assert np.array_equal(v, t.unk_vector) and v.shape == (3,)
        assert np.all(np.abs(v) <= 0.5 / 3)
        again = load_embeddings(tmp_path / "e.vec", seed=4)
        assert np.array_equal(again.unk_vector, v)

    def test_width_mismatch(self, tmp_path):
        with pytest.raises(DimensionMismatch) as ei:
            load_embeddings(write(tmp_path, "e.vec", "a 1 0 0\nc 1 2\n"))
        assert ei.value.line == 2

    def test_expected_dim(self, tmp_path):
        with pytest.raises(DimensionMismatch):
            load_embeddings(write(tmp_path, "e.vec", "2 3\na 1 0 0\n"), expected_dim=4)

    def test_duplicates_keep_first(self, tmp_path):
        t = load_embeddings(write(tmp_path, "e.vec", "a 1 0\na 0 1\n"))
        assert len(t) == 1 and np.array_equal(t.lookup("a"), [1, 0])

    def test_lowercase_lookup(self):
        t = EmbeddingTable(["Kedi"], np.ones((1, 2)), lowercase_lookup=True)
        assert "kedi" in t and "KEDI" in t

    def test_lookup_many_counts_oov(self):
        t = EmbeddingTable(["a"], np.ones((1, 2)))
        mat, oov = t.lookup_many(["a", "b", "c"])
        assert mat.shape == (3, 2) and oov == 2

    def test_dump_round_trip(self, tmp_path):
        m = np.arange(6, dtype=float).reshape(2, 3)
        dump_embeddings(["x", "y"], m, tmp_path / "e.vec")
        t = load_embeddings(tmp_path / "e.vec")
        assert np.allclose(t.matrix, m)


class TestLexicon:
    def test_kedi(self, tmp_path):
        (w,) = load_syllabified_lexicon(write(tmp_path, "l.tsv", "kedi\tk:e:-d:i:\n"))
        assert [(s.onset, s.nucleus, s.coda) for s in w.syllables] == [("k", "e", ""), ("d", "i", "")]

    def test_vowel_only(self, tmp_path):
        (w,) = load_syllabified_lexicon(write(tmp_path, "l.tsv", "a\t:a:\n"))
        assert [(s.onset, s.nucleus, s.coda) for s in w.syllables] == [("", "a", "")]

    @pytest.mark.parametrize("line", ["x\tx::", "kedi\tk:e-d:i:", "kedi\tk:a:-d:i:"])
    def test_bad(self, tmp_path, line):
        with pytest.raises(FormatError):
            load_syllabified_lexicon(write(tmp_path, "l.tsv", line + "\n"))

    def test_round_trip(self, tmp_path, lexicon):
        dump_syllabified_lexicon(lexicon[:200], tmp_path / "l.tsv")
        assert load_syllabified_lexicon(tmp_path / "l.tsv") == lexicon[:200]


class TestTreebank:
    def test_looks_good(self, tmp_path):
        toks = load_annotated_treebank(write(tmp_path, "t.txt", "0\tLooks\tV;3;SG;PRS\n1\tgood\tADJ\n"))
        t = toks[0]
        assert (t.sentence, t.index, t.form) == ("Looks good", 0, "Looks")
        assert t.bundle.get(PERSON) == "3SG"

    def test_empty(self, tmp_path):
        assert load_annotated_treebank(write(tmp_path, "t.txt", "")) == []

    def test_index_out_of_range(self, tmp_path):
        with pytest.raises(FormatError):
            load_annotated_treebank(write(tmp_path, "t.txt", "0\ta\tN\n2\tb\tN\n"))

    def test_round_trip(self, tmp_path, tokens):
        n = max(i for i, t in enumerate(tokens[:300]) if t.index == 0)
        dump_annotated_treebank(tokens[:n], tmp_path / "t.txt")
        assert load_annotated_treebank(tmp_path / "t.txt") == tokens[:n]
