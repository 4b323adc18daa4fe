"""Readers (and matching writers) for the external resources.

Formats, all UTF-8 and NFC-normalized on read:

* UniMorph paradigm file: ``lemma<TAB>form<TAB>tags`` per line.
* Frequency list: ``word<WS>count`` or just ``word`` per line, most frequent first.
* Word vectors: optional ``count dim`` header, then ``word v1 ... vd``.
* Syllabified lexicon: ``word<TAB>on:nu:co-on:nu:co``.
* Annotated treebank: blank-line separated sentences of ``index<TAB>form<TAB>tags``.
"""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

from .errors import DimensionMismatch, EmptyBundle, FormatError, MalformedBundle
from .schema import DEFAULT_CATALOG, Catalog, FeatureBundle, ParadigmEntry, nfc, parse_bundle

log = logging.getLogger(__name__)


@dataclass
class IngestStats:
    total: int = 0
    parsed: int = 0
    skipped: Counter = field(default_factory=Counter)

    @property
    def n_skipped(self) -> int:
        return sum(self.skipped.values())

    def as_dict(self) -> dict:
        return {"total": self.total, "parsed": self.parsed,
                "skipped": dict(sorted(self.skipped.items()))}


def _lines(path):
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            yield lineno, nfc(line.rstrip("\r\n"))


def load_unimorph(path, catalog: Catalog = DEFAULT_CATALOG) -> tuple[list[ParadigmEntry], IngestStats]:
    entries = []
    stats = IngestStats()
    for lineno, line in _lines(path):
        if not line.strip():
            continue
        stats.total += 1
        cols = line.split("\t")
        if len(cols) < 3:
            raise FormatError(f"expected 3 tab-separated columns, got {len(cols)}", line=lineno, path=path)
        lemma, form, tags = cols[0].strip(), cols[1].strip(), cols[2].strip()
        if not lemma or not form:
            stats.skipped["empty_form"] += 1
            continue
        try:
            bundle = parse_bundle(tags, catalog)
        except EmptyBundle:
            stats.skipped["empty_bundle"] += 1
            continue
        except MalformedBundle:
            stats.skipped["malformed_bundle"] += 1
            continue
        entry = ParadigmEntry(lemma, form, bundle)
        if entry.multiword:
            stats.skipped["multiword"] += 1
            continue
        entries.append(entry)
        stats.parsed += 1
    return entries, stats


def dump_unimorph(entries: Iterable[ParadigmEntry], path):
    with open(path, "w", encoding="utf-8") as fh:
        for e in entries:
            fh.write(f"{e.lemma}\t{e.form}\t{e.bundle.serialize()}\n")


@dataclass
class FrequencyList:
    words: list[tuple[str, int]]
    cutoff_rank: int
    lowercase: bool = False

    def __post_init__(self):
        self._members = {self._key(w) for w, _ in self.words}

    def _key(self, word):
        word = nfc(word)
        return word.lower() if self.lowercase else word

    def is_frequent(self, word: str) -> bool:
        return self._key(word) in self._members

    __contains__ = is_frequent

    def __len__(self):
        return len(self.words)


def load_frequency_list(path, cutoff_rank: int = 1_000_000, lowercase: bool = False) -> FrequencyList:
    rows = []
    for lineno, line in _lines(path):
        parts = line.split()
        if not parts:
            continue
        if len(parts) > 2:
            raise FormatError("expected 'word' or 'word count'", line=lineno, path=path)
        count = None
        if len(parts) == 2:
            try:
                count = int(parts[1])
            except ValueError:
                raise FormatError(f"non-numeric count {parts[1]!r}", line=lineno, path=path) from None
        rows.append((parts[0], count))

    words = []
    seen = set()
    n = len(rows)
    non_monotone = False
    prev = None
    for rank, (word, count) in enumerate(rows):
        if count is None:
            count = n - rank
        if prev is not None and count > prev:
            non_monotone = True
        prev = count
        key = word.lower() if lowercase else word
        if key in seen:
            continue
        seen.add(key)
        words.append((word, count))
        if len(words) >= cutoff_rank:
            break
    if non_monotone:
        log.warning("%s: counts are not monotone; file order defines rank", path)
    return FrequencyList(words, cutoff_rank, lowercase)


class EmbeddingTable:
    """Fixed word-to-vector map.  Lookups never fail: unknown words get ``unk_vector``."""

    def __init__(self, words: list[str], matrix: np.ndarray, seed: int = 0,
                 lowercase_lookup: bool = False, name: str | None = None):
        matrix = np.asarray(matrix, dtype=np.float64)
        if matrix.ndim != 2 or matrix.shape[0] != len(words):
            raise ValueError("matrix must have one row per word")
        self.dim = matrix.shape[1]
        if self.dim <= 0:
            raise ValueError("dimension must be positive")
        self.lowercase_lookup = lowercase_lookup
        self.name = name
        self.seed = seed
        self.index: dict[str, int] = {}
        keep = []
        for i, w in enumerate(words):
            key = self._key(w)
            if key not in self.index:
                self.index[key] = len(keep)
                keep.append(i)
        self.matrix = matrix[keep]
        bound = 0.5 / self.dim
        self.unk_vector = np.random.default_rng(seed).uniform(-bound, bound, self.dim)

    def _key(self, word):
        word = nfc(word)
        return word.lower() if self.lowercase_lookup else word

    def __contains__(self, word):
        return self._key(word) in self.index

    def __len__(self):
        return len(self.index)

    @property
    def vocab(self) -> set[str]:
        return set(self.index)

    def lookup(self, word: str) -> np.ndarray:
        i = self.index.get(self._key(word))
        return self.unk_vector if i is None else self.matrix[i]

    def lookup_many(self, words) -> tuple[np.ndarray, int]:
        """Stack vectors for ``words``; also returns how many were out of vocabulary."""
        out = np.empty((len(words), self.dim))
        oov = 0
        for r, w in enumerate(words):
            i = self.index.get(self._key(w))
            if i is None:
                out[r] = self.unk_vector
                oov += 1
            else:
                out[r] = self.matrix[i]
        return out, oov


def load_embeddings(path, expected_dim: int | None = None, seed: int = 0,
                    lowercase: bool = False) -> EmbeddingTable:
    words, rows = [], []
    dim = expected_dim
    first = True
    for lineno, line in _lines(path):
        parts = line.split()
        if not parts:
            continue
        if first:
            first = False
            if len(parts) == 2 and all(p.isdigit() for p in parts):
                header_dim = int(parts[1])
                if dim is not None and header_dim != dim:
                    raise DimensionMismatch(f"header declares {header_dim} dims, expected {dim}",
                                            line=lineno, path=path)
                dim = header_dim
                continue
        word, values = parts[0], parts[1:]
        if dim is None:
            dim = len(values)
        if len(values) != dim:
            raise DimensionMismatch(f"row has {len(values)} values, expected {dim}", line=lineno, path=path)
        try:
            rows.append([float(v) for v in values])
        except ValueError:
            raise FormatError("non-numeric vector component", line=lineno, path=path) from None
        words.append(word)
    if dim is None or dim <= 0:
        raise FormatError("no vectors found", path=path)
    matrix = np.array(rows, dtype=np.float64).reshape(len(rows), dim)
    return EmbeddingTable(words, matrix, seed=seed, lowercase_lookup=lowercase, name=Path(path).stem)


def dump_embeddings(table_words, matrix, path, header=True):
    matrix = np.asarray(matrix)
    with open(path, "w", encoding="utf-8") as fh:
        if header:
            fh.write(f"{len(table_words)} {matrix.shape[1]}\n")
        for w, row in zip(table_words, matrix):
            fh.write(w + " " + " ".join(f"{x:.6g}" for x in row) + "\n")


@dataclass(frozen=True)
class Syllable:
    onset: str
    nucleus: str
    coda: str

    def text(self):
        return self.onset + self.nucleus + self.coda


@dataclass(frozen=True)
class SyllabifiedWord:
    word: str
    syllables: tuple[Syllable, ...]

    def serialize(self) -> str:
        return "-".join(f"{s.onset}:{s.nucleus}:{s.coda}" for s in self.syllables)


def parse_syllabification(word: str, raw: str) -> SyllabifiedWord:
    sylls = []
    for chunk in raw.split("-"):
        parts = chunk.split(":")
        if len(parts) != 3:
            raise FormatError(f"syllable {chunk!r} needs onset:nucleus:coda")
        onset, nucleus, coda = parts
        if not nucleus:
            raise FormatError(f"syllable {chunk!r} has an empty nucleus")
        sylls.append(Syllable(onset, nucleus, coda))
    sw = SyllabifiedWord(word, tuple(sylls))
    if "".join(s.text() for s in sylls) != word:
        raise FormatError(f"segments of {raw!r} do not spell {word!r}")
    return sw


def load_syllabified_lexicon(path) -> list[SyllabifiedWord]:
    out = []
    for lineno, line in _lines(path):
        if not line.strip():
            continue
        cols = line.split("\t")
        if len(cols) < 2:
            raise FormatError("expected word<TAB>syllabification", line=lineno, path=path)
        try:
            out.append(parse_syllabification(cols[0].strip(), cols[1].strip()))
        except FormatError as exc:
            raise FormatError(str(exc), line=lineno, path=path) from None
    return out


def dump_syllabified_lexicon(words: Iterable[SyllabifiedWord], path):
    with open(path, "w", encoding="utf-8") as fh:
        for w in words:
            fh.write(f"{w.word}\t{w.serialize()}\n")


@dataclass(frozen=True)
class AnnotatedToken:
    sentence: str
    index: int
    form: str
    bundle: FeatureBundle

    def __post_init__(self):
        toks = self.sentence.split()
        if not 0 <= self.index < len(toks):
            raise FormatError(f"index {self.index} outside sentence of {len(toks)} tokens")
        if toks[self.index] != self.form:
            raise FormatError(f"token {self.index} is {toks[self.index]!r}, not {self.form!r}")


def load_annotated_treebank(path, catalog: Catalog = DEFAULT_CATALOG) -> list[AnnotatedToken]:
    tokens: list[AnnotatedToken] = []
    block: list[tuple[int, int, str, str]] = []
    sent_no = 0

    def flush():
        nonlocal block, sent_no
        if not block:
            return
        sent_no += 1
        n = len(block)
        by_index = {}
        for lineno, idx, form, tags in block:
            if idx >= n or idx < 0:
                raise FormatError(f"sentence {sent_no}: index {idx} outside {n} tokens", line=lineno, path=path)
            if idx in by_index:
                raise FormatError(f"sentence {sent_no}: duplicate index {idx}", line=lineno, path=path)
            by_index[idx] = (lineno, form, tags)
        forms = [by_index[i][1] for i in range(n)]
        sentence = " ".join(forms)
        for i in range(n):
            lineno, form, tags = by_index[i]
            try:
                bundle = FeatureBundle() if tags in ("", "_") else parse_bundle(tags, catalog)
            except FormatError as exc:
                raise FormatError(f"sentence {sent_no}: {exc}", line=lineno, path=path) from None
            tokens.append(AnnotatedToken(sentence, i, form, bundle))
        block = []

    for lineno, line in _lines(path):
        if not line.strip():
            flush()
            continue
        if line.startswith("#"):
            continue
        cols = line.split("\t") if "\t" in line else line.split()
        if len(cols) < 2:
            raise FormatError(f"sentence {sent_no + 1}: expected index, form, tags", line=lineno, path=path)
        try:
            idx = int(cols[0])
        except ValueError:
            raise FormatError(f"sentence {sent_no + 1}: bad index {cols[0]!r}", line=lineno, path=path) from None
        form = cols[1].strip()
        if not form or any(c.isspace() for c in form):
            raise FormatError(f"sentence {sent_no + 1}: bad form {form!r}", line=lineno, path=path)
        tags = cols[2].strip() if len(cols) > 2 else ""
        block.append((lineno, idx, form, tags))
    flush()
    return tokens


def dump_annotated_treebank(tokens: Iterable[AnnotatedToken], path):
    with open(path, "w", encoding="utf-8") as fh:
        current = None
        for tok in tokens:
            if current is not None and (tok.sentence != current or tok.index == 0):
                fh.write("\n")
            current = tok.sentence
            tags = tok.bundle.serialize() or "_"
            fh.write(f"{tok.index}\t{tok.form}\t{tags}\n")
        if current is not None:
            fh.write("\n")
