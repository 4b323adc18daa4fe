"""Pseudoword generation from a bigram chain over sub-syllabic segments.

Each word is read as a chain ``^ -> onset -> nucleus -> coda -> onset ... -> $``.
Candidates for a seed word replace some of its segments with others of the
same kind such that every transition stays attested in the grammar, with a
frequency in the same decade as the seed's transition at that position.
"""

from __future__ import annotations

import math
import random
import time
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .errors import EmptyLexicon, InsufficientData
from .ingest import SyllabifiedWord
from .schema import LanguageConfig
from .taskgen import ProbingInstance, Provenance, SingleForm, _finish, _rng

START = ("^", "")
END = ("$", "")
KINDS = ("O", "N", "C")

PSEUDO_LABEL = "Pseudo"
REAL_LABEL = "Real"


def segments_of(word: SyllabifiedWord) -> list[tuple[str, str]]:
    segs = []
    for syl in word.syllables:
        segs += [("O", syl.onset), ("N", syl.nucleus), ("C", syl.coda)]
    return segs


@dataclass
class SegmentGrammar:
    transitions: dict[tuple, Counter]
    lexicon_forms: frozenset[str]
    inventory: dict[str, set[str]]

    def __post_init__(self):
        self._succ = {
            prev: sorted(nexts.items(), key=lambda kv: kv[0])
            for prev, nexts in self.transitions.items()
        }

    def count(self, prev, nxt) -> int:
        return self.transitions.get(prev, {}).get(nxt, 0)

    def successors(self, prev):
        return self._succ.get(prev, [])

    def accepts(self, segments: Sequence[tuple[str, str]]) -> bool:
        chain = [START, *segments, END]
        return all(self.count(a, b) > 0 for a, b in zip(chain, chain[1:]))


def build_grammar(lexicon: Iterable[SyllabifiedWord]) -> SegmentGrammar:
    transitions: dict[tuple, Counter] = defaultdict(Counter)
    inventory: dict[str, set[str]] = {k: set() for k in KINDS}
    forms = set()
    for word in lexicon:
        segs = segments_of(word)
        forms.add(word.word)
        for kind, text in segs:
            inventory[kind].add(text)
        chain = [START, *segs, END]
        for a, b in zip(chain, chain[1:]):
            transitions[a][b] += 1
    if not forms:
        raise EmptyLexicon("cannot build a grammar from an empty lexicon")
    return SegmentGrammar(dict(transitions), frozenset(forms), inventory)


@dataclass
class PseudoCandidate:
    word: str
    seed: str
    segments: list[tuple[str, str]]
    matched_constraints: dict = field(default_factory=dict)


def _decade(n: int) -> int:
    return int(math.floor(math.log10(n)))


def _same_band(candidate: int, reference: int, band: float) -> bool:
    if candidate <= 0:
        return False
    if band == 1.0:
        return _decade(candidate) == _decade(reference)
    return abs(math.log10(candidate) - math.log10(reference)) < band


def generate_pseudowords(grammar: SegmentGrammar, seeds: Iterable[SyllabifiedWord], max_candidates: int = 5,
                         max_expansions: int | None = 200_000, time_budget: float | None = None,
                         match_segment_lengths: bool = True, overlap: float = 2 / 3,
                         frequency_band: float = 1.0) -> list[PseudoCandidate]:
    """Candidates for every seed, in seed order.

    Search visits candidates with fewer substituted segments first, and in
    lexicographic segment order within a substitution count.  ``max_expansions``
    bounds the number of search nodes per seed (deterministic); ``time_budget``
    adds an optional wall-clock limit in seconds.  ``frequency_band=1.0`` means
    "same log10 decade"; any other value is a maximum log10 distance.
    """
    out = []
    for seed in seeds:
        out.extend(_search(grammar, seed, max_candidates, max_expansions, time_budget,
                           match_segment_lengths, overlap, frequency_band))
    return out


def _search(grammar, seed, max_candidates, max_expansions, time_budget, match_lengths, overlap, band):
    segs = segments_of(seed)
    m = len(segs)
    min_shared = math.ceil(overlap * m - 1e-9)
    max_subs = m - min_shared
    chain = [START, *segs, END]
    ref = [grammar.count(a, b) for a, b in zip(chain, chain[1:])]
    if any(r == 0 for r in ref):
        return []
    target_len = len(seed.word)
    found: list[PseudoCandidate] = []
    emitted = set()
    expansions = 0
    deadline = None if time_budget is None else time.monotonic() + time_budget

    class _Stop(Exception):
        pass

    def visit(pos, prev, subs_left, length, picked):
        nonlocal expansions
        expansions += 1
        if max_expansions is not None and expansions > max_expansions:
            raise _Stop
        if deadline is not None and (expansions & 0xFF) == 0 and time.monotonic() > deadline:
            raise _Stop
        if pos == m:
            if subs_left or length != target_len:
                return
            if not _same_band(grammar.count(prev, END), ref[m], band):
                return
            word = "".join(t for _, t in picked)
            if word in grammar.lexicon_forms or word == seed.word or word in emitted:
                return
            emitted.add(word)
            shared = sum(a == b for a, b in zip(picked, segs))
            found.append(PseudoCandidate(word, seed.word, list(picked), {
                "segment_count": len(picked) == m,
                "letter_length": len(word) == target_len,
                "transition_band": True,
                "shared_segments": shared,
                "not_in_lexicon": True,
            }))
            if len(found) >= max_candidates:
                raise _Stop
            return
        if m - pos < subs_left:
            return
        kind, orig = segs[pos]
        for (nkind, text), cnt in grammar.successors(prev):
            if nkind != kind:
                continue
            if match_lengths and len(text) != len(orig):
                continue
            cost = 0 if text == orig else 1
            if cost > subs_left:
                continue
            if not _same_band(cnt, ref[pos], band):
                continue
            picked.append((kind, text))
            visit(pos + 1, (kind, text), subs_left - cost, length + len(text), picked)
            picked.pop()

    try:
        for n_subs in range(1, max_subs + 1):
            visit(0, START, n_subs, 0, [])
    except _Stop:
        pass
    return found


def generate_pseudo_task(lexicon: Sequence[SyllabifiedWord], grammar: SegmentGrammar, cfg: LanguageConfig,
                         n_seeds: int = 10_000, **search_kw):
    """Balanced Real/Pseudo dataset: seeds give the real half, one candidate per seed the pseudo half."""
    rng = _rng(cfg, "Pseudo")
    n_total = cfg.total_size
    n_pseudo = n_total // 2
    n_real = n_total - n_pseudo
    words = sorted(lexicon, key=lambda w: w.word)
    seeds = rng.sample(words, min(n_seeds, len(words)))
    if len(seeds) < n_real:
        raise InsufficientData(len(seeds), n_real, "seed words")

    pseudo = []
    seen = set()
    for seed in seeds:
        if len(pseudo) >= n_pseudo:
            break
        for cand in _search_one(grammar, seed, search_kw):
            if cand.word not in seen:
                seen.add(cand.word)
                pseudo.append(cand.word)
                break
    if len(pseudo) < n_pseudo:
        raise InsufficientData(len(pseudo), n_pseudo, "pseudowords")

    real = [s.word for s in seeds[:n_real]]
    instances = [ProbingInstance(SingleForm(w), REAL_LABEL, Provenance.LEXICON) for w in real]
    instances += [ProbingInstance(SingleForm(w), PSEUDO_LABEL, Provenance.GENERATED) for w in pseudo]
    meta = {"task_type": "pseudo", "ambiguity_removed": 0, "n_seeds": len(seeds),
            "search": {k: v for k, v in sorted(search_kw.items())}}
    return _finish(cfg.language, "Pseudo", "single", instances, cfg, rng, meta)


def _search_one(grammar, seed, search_kw):
    kw = dict(search_kw)
    kw.setdefault("max_candidates", 5)
    return generate_pseudowords(grammar, [seed], **kw)
