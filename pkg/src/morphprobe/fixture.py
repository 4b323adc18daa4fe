"""A small synthetic agglutinative language and matching toy resources.

``build_fixture(out_dir)`` writes every resource the pipeline consumes so the
whole toolkit can run at desk scale without downloading anything:

    unimorph.tsv    ~20K paradigm entries (nouns, verbs, adjectives)
    freq.txt        frequency list covering most forms
    lexicon.tsv     syllabified lexicon for pseudoword generation
    treebank.txt    annotated sentences for token-level tasks
    emb/*.vec       five 20-dim toy embeddings, from random to feature-encoding
    snapshots/*.vec three "training epochs" whose Case signal sharpens
    downstream.tsv  fabricated downstream scores for the five embeddings
"""

from __future__ import annotations

import random
from collections import defaultdict
from pathlib import Path

import numpy as np

from .ingest import (
    AnnotatedToken,
    Syllable,
    SyllabifiedWord,
    dump_annotated_treebank,
    dump_embeddings,
    dump_syllabified_lexicon,
    dump_unimorph,
)
from .schema import CASE, ParadigmEntry, parse_bundle

LANGUAGE = "syn"
DIM = 20

ONSETS = ["", "b", "d", "g", "k", "l", "m", "n", "p", "r", "s", "t", "y", "z", "ç", "ş"]
NUCLEI = ["a", "e", "ı", "i", "o", "u", "ü", "ö"]
CODAS = ["", "", "", "n", "r", "l", "k", "m", "s", "t"]

NOUN_NUMBER = {"SG": "", "PL": "lar"}
NOUN_POSS = {None: "", "PSS1S": "ım", "PSS2S": "ın", "PSS3S": "sı"}
NOUN_CASE = {"NOM": "", "ACC": "ı", "DAT": "a", "LOC": "da", "ABL": "dan", "GEN": "ın"}
VERB_TENSE = {"PST": "dı", "PRS": "yor", "FUT": "acak"}
VERB_MOOD = {"IND": "", "COND": "sa"}
VERB_PERSON = {("1", "SG"): "m", ("2", "SG"): "n", ("3", "SG"): "",
               ("1", "PL"): "k", ("2", "PL"): "nız", ("3", "PL"): "lar"}
VERB_POLARITY = {"POS": "", "NEG": "ma"}

SNAPSHOT_EPOCHS = (2, 8, 20)
SNAPSHOT_SIGMAS = (1.0, 0.3, 0.0)
EMBEDDING_MIX = {"random": 0.0, "mix25": 0.25, "mix50": 0.5, "mix75": 0.75, "separable": 1.0}
DOWNSTREAM_TASKS = ("POS", "DEP", "SRL", "NER", "XNLI")


def _syllable(rng) -> Syllable:
    return Syllable(rng.choice(ONSETS), rng.choice(NUCLEI), rng.choice(CODAS))


def _stems(rng, n, taken, n_syll=2):
    out = []
    while len(out) < n:
        sylls = tuple(_syllable(rng) for _ in range(n_syll))
        word = "".join(s.text() for s in sylls)
        if word in taken or len(word) < 3:
            continue
        taken.add(word)
        out.append(SyllabifiedWord(word, sylls))
    return out


def make_paradigms(seed=0, n_nouns=160, n_verbs=150, n_adjs=120):
    """Return (entries, stems) for the synthetic language; ~20K entries with default sizes."""
    rng = random.Random(seed)
    taken = set()
    nouns = _stems(rng, n_nouns, taken)
    verbs = _stems(rng, n_verbs, taken)
    adjs = _stems(rng, n_adjs, taken)
    entries = []
    for stem in nouns:
        for num, s_num in NOUN_NUMBER.items():
            for poss, s_poss in NOUN_POSS.items():
                for case, s_case in NOUN_CASE.items():
                    tags = ["N", case, num] + ([poss] if poss else [])
                    entries.append(ParadigmEntry(stem.word, stem.word + s_num + s_poss + s_case,
                                                 parse_bundle(";".join(tags))))
    for stem in verbs:
        lemma = stem.word + "mak"
        for pol, s_pol in VERB_POLARITY.items():
            for tense, s_tense in VERB_TENSE.items():
                for mood, s_mood in VERB_MOOD.items():
                    for (person, number), s_pers in VERB_PERSON.items():
                        tags = ["V", pol, tense, mood, person, number, "ACT"]
                        form = stem.word + s_pol + s_tense + s_mood + s_pers
                        entries.append(ParadigmEntry(lemma, form, parse_bundle(";".join(tags))))
    for stem in adjs:
        for num, s_num in NOUN_NUMBER.items():
            for case, s_case in NOUN_CASE.items():
                entries.append(ParadigmEntry(stem.word, stem.word + s_num + s_case,
                                             parse_bundle(f"ADJ;{case};{num}")))
    return entries, nouns + verbs + adjs


def make_lexicon(stems, seed=0, n_extra=2500):
    rng = random.Random(seed + 1)
    taken = {s.word for s in stems}
    extra = []
    for n_syll in (2, 3):
        extra += _stems(rng, n_extra // 2, taken, n_syll=n_syll)
    return list(stems) + extra


def make_frequency_list(entries, lexicon, seed=0, frequent_share=0.7):
    rng = random.Random(seed + 2)
    forms = sorted({e.form for e in entries} | {w.word for w in lexicon})
    chosen = [f for f in forms if rng.random() < frequent_share]
    rng.shuffle(chosen)
    filler = [f"zz{i}" for i in range(500)]
    words = chosen + filler
    rng.shuffle(words)
    return [(w, max(1, int(1e6 / (rank + 1)))) for rank, w in enumerate(words)]


def make_treebank(entries, seed=0, n_sentences=3000):
    rng = random.Random(seed + 3)
    tokens = []
    for _ in range(n_sentences):
        length = rng.randint(4, 8)
        picked = [rng.choice(entries) for _ in range(length)]
        sentence = " ".join(e.form for e in picked)
        for i, e in enumerate(picked):
            tokens.append(AnnotatedToken(sentence, i, e.form, e.bundle))
    return tokens


def _feature_codes(entries):
    tags = sorted({v.tag for e in entries for v in e.bundle})
    return {t: i for i, t in enumerate(tags)}


def feature_vectors(entries, lexicon, seed=0, dim=DIM):
    """Vectors that linearly encode each word's tags (all readings) and its length."""
    rng = np.random.default_rng(seed + 4)
    codes = _feature_codes(entries)
    proj = rng.normal(size=(len(codes) + 1, dim))
    readings = defaultdict(set)
    for e in entries:
        readings[e.form].update(v.tag for v in e.bundle)
    words = sorted(set(readings) | {w.word for w in lexicon})
    mat = np.zeros((len(words), dim))
    for r, w in enumerate(words):
        ind = np.zeros(len(codes) + 1)
        for t in readings.get(w, ()):
            ind[codes[t]] = 1.0
        ind[-1] = len(w) / 5.0
        mat[r] = ind @ proj
    mat += 0.05 * rng.normal(size=mat.shape)
    return words, mat


def random_vectors(words, seed=0, dim=DIM):
    rng = np.random.default_rng(seed + 5)
    return rng.normal(size=(len(words), dim))


def sharpening_snapshots(entries, words, target=CASE, sigmas=SNAPSHOT_SIGMAS, seed=0, dim=DIM):
    """Per-epoch vectors where the target feature's one-hot code gets less noisy."""
    labels = defaultdict(set)
    for e in entries:
        labels[e.form].add(e.bundle.get(target))
    values = sorted({v for s in labels.values() for v in s if v is not None})
    slot = {v: i for i, v in enumerate(values)}
    clean = np.zeros((len(words), dim))
    for r, w in enumerate(words):
        vals = labels.get(w, {None})
        if len(vals) == 1 and None not in vals:
            clean[r, slot[next(iter(vals))]] = 1.0
        else:
            clean[r, len(values)] = 1.0
    rng = np.random.default_rng(seed + 6)
    noise = rng.normal(size=clean.shape)
    return [clean + sigma * noise for sigma in sigmas]


def build_fixture(out_dir, seed=0) -> dict[str, Path]:
    out = Path(out_dir)
    (out / "emb").mkdir(parents=True, exist_ok=True)
    (out / "snapshots").mkdir(parents=True, exist_ok=True)

    entries, stems = make_paradigms(seed)
    lexicon = make_lexicon(stems, seed)
    paths = {
        "unimorph": out / "unimorph.tsv",
        "freq": out / "freq.txt",
        "lexicon": out / "lexicon.tsv",
        "treebank": out / "treebank.txt",
        "downstream": out / "downstream.tsv",
    }
    dump_unimorph(entries, paths["unimorph"])
    with open(paths["freq"], "w", encoding="utf-8") as fh:
        for w, c in make_frequency_list(entries, lexicon, seed):
            fh.write(f"{w}\t{c}\n")
    dump_syllabified_lexicon(lexicon, paths["lexicon"])
    dump_annotated_treebank(make_treebank(entries, seed), paths["treebank"])

    words, sep = feature_vectors(entries, lexicon, seed)
    rnd = random_vectors(words, seed)
    scale = sep.std() / rnd.std()
    for name, alpha in EMBEDDING_MIX.items():
        p = out / "emb" / f"{name}.vec"
        dump_embeddings(words, alpha * sep + (1 - alpha) * scale * rnd, p)
        paths[f"emb:{name}"] = p
    for epoch, mat in zip(SNAPSHOT_EPOCHS, sharpening_snapshots(entries, words, seed=seed)):
        p = out / "snapshots" / f"epoch{epoch:02d}.vec"
        dump_embeddings(words, mat, p)
        paths[f"snapshot:{epoch}"] = p

    rng = random.Random(seed + 7)
    with open(paths["downstream"], "w", encoding="utf-8") as fh:
        for task_i, task in enumerate(DOWNSTREAM_TASKS):
            for name, alpha in EMBEDDING_MIX.items():
                if task == "NER":
                    score = 60 + 20 * rng.random()
                else:
                    score = 50 + 10 * task_i + 30 * alpha + rng.uniform(-2, 2)
                fh.write(f"{name}\t{task}\t{score:.2f}\n")
    return paths
