from collections import Counter

import pytest

from morphprobe.errors import EmptyLexicon
from morphprobe.ingest import parse_syllabification
from morphprobe.probe import majority_baseline
from morphprobe.pseudogen import (
    END, START, build_grammar, generate_pseudo_task, generate_pseudowords, segments_of,
)
from conftest import small_config


def W(word, raw):
    return parse_syllabification(word, raw)


KEDI = W("kedi", "k:e:-d:i:")


class TestGrammar:
    def test_hand_counts(self):
        g = build_grammar([KEDI])
        assert g.count(START, ("O", "k")) == 1
        assert g.count(("O", "k"), ("N", "e")) == 1
        assert g.count(("N", "e"), ("C", "")) == 1
        assert g.count(("C", ""), ("O", "d")) == 1
        assert g.count(("C", ""), END) == 1
        assert all(c > 0 for nxt in g.transitions.values() for c in nxt.values())

    def test_empty(self):
        with pytest.raises(EmptyLexicon):
            build_grammar([])

    def test_self_reachable(self, lexicon):
        assert build_grammar([KEDI]).accepts(segments_of(KEDI))
        g = build_grammar(lexicon)
        assert all(g.accepts(segments_of(w)) for w in lexicon[:500])


class TestSearch:
    def test_all_substitutions_real(self):
        lex = [W("ka", "k:a:"), W("ta", "t:a:")]
        g = build_grammar(lex)
        assert generate_pseudowords(g, [lex[0]]) == []

    def test_simple_candidate(self):
        lex = [W("kata", "k:a:-t:a:"), W("tako", "t:a:-k:o:"), W("kako", "k:a:-k:o:")]
        g = build_grammar(lex)
        words = [c.word for c in generate_pseudowords(g, [lex[0]], overlap=0.5, frequency_band=10)]
        assert words and all(w not in g.lexicon_forms for w in words)
        assert all(len(w) == 4 for w in words)

    def test_budget_prefix(self, lexicon):
        g = build_grammar(lexicon)
        seeds = lexicon[:30]
        full = generate_pseudowords(g, seeds, max_expansions=None)
        short = generate_pseudowords(g, seeds, max_expansions=40)
        by_seed = lambda cs: {s.word: [c.word for c in cs if c.seed == s.word] for s in seeds}
        f, s = by_seed(full), by_seed(short)
        for k in f:
            assert f[k][:len(s[k])] == s[k]

    def test_constraints(self, lexicon):
        g = build_grammar(lexicon)
        seeds = lexicon[:200]
        by_word = {w.word: w for w in seeds}
        cands = generate_pseudowords(g, seeds)
        assert cands
        for c in cands:
            seed = by_word[c.seed]
            segs = segments_of(seed)
            assert len(c.segments) == len(segs)
            assert "".join(t for _, t in c.segments) == c.word
            assert [len(t) for _, t in c.segments] == [len(t) for _, t in segs]
            shared = sum(a == b for a, b in zip(c.segments, segs))
            assert shared >= -(-2 * len(segs) // 3)
            assert g.accepts(c.segments)
        assert max(Counter(c.seed for c in cands).values()) <= 5


class TestPseudoTask:
    def test_balanced(self, lexicon):
        g = build_grammar(lexicon)
        ds = generate_pseudo_task(lexicon, g, small_config())
        counts = Counter(i.label for i in ds.all_instances())
        assert counts == {"Pseudo": 500, "Real": 500}
        assert majority_baseline(ds) == 50.0
        assert all(i.item.form not in g.lexicon_forms for i in ds.all_instances() if i.label == "Pseudo")

    def test_deterministic(self, lexicon):
        g = build_grammar(lexicon)
        assert generate_pseudo_task(lexicon, g, small_config()) == generate_pseudo_task(lexicon, g, small_config())
