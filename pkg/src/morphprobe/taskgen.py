"""Probing dataset generation.

Type-level tasks are built from UniMorph paradigm entries (single-feature,
TagCount, CharacterBin, SameFeat, OddFeat); token-level tasks from an
annotated treebank.  Every generator is deterministic in ``cfg.seed``.
"""

from __future__ import annotations

import bisect
import json
import math
import random
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence, Union

from .errors import DegenerateFeature, InsufficientData, SchemaError
from .ingest import AnnotatedToken, FrequencyList
from .schema import (
    POS,
    Dimension,
    FeatureBundle,
    LanguageConfig,
    ParadigmEntry,
    bundle_diff,
    bundle_shared,
    nfc,
)

SPLITS = ("train", "dev", "test")
NONE_LABEL = "None"
LEMMA_LABEL = "Lemma"
CHARACTER_BINS = ((0, 4), (5, 8), (9, 12), (13, 16), (17, 20))


class Provenance(str, Enum):
    FREQUENT = "frequent"
    RARE = "rare"
    NONE_CLASS = "none"
    PAIR = "pair"
    TOKEN = "token"
    LEXICON = "lexicon"
    GENERATED = "generated"


_PROV_CODE = {
    Provenance.FREQUENT: "F",
    Provenance.RARE: "R",
    Provenance.NONE_CLASS: "N",
    Provenance.PAIR: "P",
    Provenance.TOKEN: "T",
    Provenance.LEXICON: "L",
    Provenance.GENERATED: "G",
}
_CODE_PROV = {v: k for k, v in _PROV_CODE.items()}


@dataclass(frozen=True)
class SingleForm:
    form: str

    def __post_init__(self):
        object.__setattr__(self, "form", nfc(self.form))

    @property
    def words(self):
        return (self.form,)


@dataclass(frozen=True)
class FormPair:
    form1: str
    form2: str

    def __post_init__(self):
        object.__setattr__(self, "form1", nfc(self.form1))
        object.__setattr__(self, "form2", nfc(self.form2))

    @property
    def words(self):
        return (self.form1, self.form2)


@dataclass(frozen=True)
class TokenInContext:
    sentence: str
    index: int

    @property
    def form(self):
        return self.sentence.split()[self.index]

    @property
    def words(self):
        return (self.form,)


Item = Union[SingleForm, FormPair, TokenInContext]
_KIND = {SingleForm: "single", FormPair: "pair", TokenInContext: "token"}


@dataclass(frozen=True)
class ProbingInstance:
    item: Item
    label: str
    provenance: Provenance

    def __post_init__(self):
        if not self.label:
            raise ValueError("label must be non-empty")
        if self.provenance is Provenance.NONE_CLASS and not isinstance(self.item, SingleForm):
            raise ValueError("None-class instances must be single forms")

    @property
    def words(self):
        return self.item.words


@dataclass
class ProbingDataset:
    language: str
    task: str
    kind: str
    label_set: list[str]
    splits: dict[str, list[ProbingInstance]]
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        # keep meta JSON-native so a write/read round trip compares equal
        self.meta = json.loads(json.dumps(self.meta, sort_keys=True))

    def split_sizes(self):
        return tuple(len(self.splits[s]) for s in SPLITS)

    def labels(self, split):
        return [inst.label for inst in self.splits[split]]

    def all_instances(self):
        for s in SPLITS:
            yield from self.splits[s]


# ---------------------------------------------------------------------------
# helpers


def _rng(cfg: LanguageConfig, task: str) -> random.Random:
    return random.Random(f"{cfg.seed}/{cfg.language}/{task}")


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def apportion(total: int, weights: dict) -> dict:
    """Largest-remainder apportionment of ``total`` proportionally to ``weights``."""
    keys = sorted(weights)
    wsum = sum(weights[k] for k in keys)
    if wsum <= 0 or total <= 0:
        return {k: 0 for k in keys}
    raw = {k: total * weights[k] / wsum for k in keys}
    out = {k: int(math.floor(raw[k])) for k in keys}
    left = total - sum(out.values())
    order = sorted(keys, key=lambda k: (-(raw[k] - out[k]), k))
    for k in order[:left]:
        out[k] += 1
    return out


def stratified_split(instances: Sequence[ProbingInstance], sizes: Sequence[int],
                     rng: random.Random) -> dict[str, list[ProbingInstance]]:
    """Split into exactly ``sizes`` instances per split, each label spread proportionally."""
    n = sum(sizes)
    if len(instances) != n:
        raise ValueError(f"{len(instances)} instances for split sizes summing to {n}")
    groups = defaultdict(list)
    for inst in instances:
        groups[inst.label].append(inst)
    ordered = []
    for label in sorted(groups):
        g = groups[label]
        rng.shuffle(g)
        ordered.extend(g)
    # evenly interleaved split slots; each label occupies a contiguous run
    slots = []
    for si, size in enumerate(sizes):
        slots.extend(((k + 0.5) * n / size, si) for k in range(size))
    slots.sort()
    out = {s: [] for s in SPLITS}
    for inst, (_, si) in zip(ordered, slots):
        out[SPLITS[si]].append(inst)
    for s in SPLITS:
        rng.shuffle(out[s])
    return out


def _finish(language, task, kind, instances, cfg, rng, meta) -> ProbingDataset:
    splits = stratified_split(instances, cfg.split_sizes, rng)
    label_set = sorted({i.label for i in instances})
    meta = dict(meta)
    meta.setdefault("config", cfg.snapshot())
    meta["seed"] = cfg.seed
    meta["split_sizes"] = list(cfg.split_sizes)
    meta["label_counts"] = dict(sorted(Counter(i.label for i in instances).items()))
    return ProbingDataset(language, task, kind, label_set, splits, meta)


def _is_verbal(bundle: FeatureBundle) -> bool:
    pos = bundle.get(POS)
    return pos is not None and pos.startswith("V")


def character_bin(form: str) -> str:
    n = len(nfc(form))
    for lo, hi in CHARACTER_BINS:
        if lo <= n <= hi:
            return f"{lo}-{hi}"
    return f">{CHARACTER_BINS[-1][1]}"


def _readings(entries: Iterable[ParadigmEntry]) -> dict[str, list[ParadigmEntry]]:
    out = defaultdict(list)
    for e in entries:
        if e.multiword:
            continue
        out[e.form].append(e)
    return out


def _compose_labeled(labeled: dict[str, str], none_pool: list[str], freq: FrequencyList | None,
                     cfg: LanguageConfig, rng: random.Random, with_none: bool):
    """Pick the labeled and None portions with the frequent/rare mix."""
    n_total = cfg.total_size
    n_none = _round_half_up(n_total * cfg.none_class_ratio) if with_none else 0
    n_lab = n_total - n_none
    if len(labeled) < n_lab:
        raise InsufficientData(len(labeled), n_lab, "labeled forms")
    if len(none_pool) < n_none:
        raise InsufficientData(len(none_pool), n_none, "None-class forms")

    forms = sorted(labeled)
    frequent = [f for f in forms if freq is not None and freq.is_frequent(f)]
    rare = [f for f in forms if freq is None or not freq.is_frequent(f)]
    rng.shuffle(frequent)
    rng.shuffle(rare)
    want_freq = math.ceil(cfg.frequent_ratio * n_lab - 1e-9)
    take_f = min(want_freq, len(frequent))
    take_r = n_lab - take_f
    if take_r > len(rare):
        take_f += take_r - len(rare)
        take_r = len(rare)
    relaxed = take_f < want_freq

    instances = [ProbingInstance(SingleForm(f), labeled[f], Provenance.FREQUENT) for f in frequent[:take_f]]
    instances += [ProbingInstance(SingleForm(f), labeled[f], Provenance.RARE) for f in rare[:take_r]]
    if n_none:
        chosen = rng.sample(sorted(none_pool), n_none)
        instances += [ProbingInstance(SingleForm(f), NONE_LABEL, Provenance.NONE_CLASS) for f in chosen]
    composition = {"frequent": take_f, "rare": take_r, "none": n_none}
    return instances, composition, relaxed


def _check_eligible(labeled: dict[str, str], cfg: LanguageConfig):
    if not labeled:
        raise InsufficientData(0, cfg.min_samples)
    values = set(labeled.values())
    if len(values) < 2:
        raise DegenerateFeature(values)
    if len(labeled) < cfg.min_samples:
        raise InsufficientData(len(labeled), cfg.min_samples)


# ---------------------------------------------------------------------------
# single-form tasks


def generate_single_feature_task(entries: Sequence[ParadigmEntry], dimension: Dimension,
                                 freq: FrequencyList | None, cfg: LanguageConfig) -> ProbingDataset:
    readings = _readings(entries)
    labeled: dict[str, str] = {}
    lacking: list[str] = []
    ambiguous = mixed = 0
    verbal_votes = Counter()
    for form in sorted(readings):
        rs = readings[form]
        values = {e.bundle.get(dimension) for e in rs}
        if None not in values:
            if len(values) == 1:
                labeled[form] = values.pop()
                for e in rs:
                    verbal_votes[_is_verbal(e.bundle)] += 1
            else:
                ambiguous += 1
        elif values == {None}:
            lacking.append(form)
        else:
            mixed += 1

    _check_eligible(labeled, cfg)
    with_none = dimension != POS
    verbal_dim = verbal_votes[True] > verbal_votes[False]
    none_pool = [f for f in lacking
                 if all(_is_verbal(e.bundle) != verbal_dim for e in readings[f])]
    none_source = "opposite-class"
    n_none = _round_half_up(cfg.total_size * cfg.none_class_ratio) if with_none else 0
    if len(none_pool) < n_none:
        none_pool = lacking
        none_source = "any-lacking"

    rng = _rng(cfg, dimension.name)
    instances, composition, relaxed = _compose_labeled(labeled, none_pool, freq, cfg, rng, with_none)
    meta = {
        "task_type": "single-feature",
        "dimension": dimension.name,
        "ambiguity_removed": ambiguous + mixed,
        "pools": {"labeled": len(labeled), "none": len(none_pool) if with_none else 0,
                  "none_source": none_source if with_none else None},
        "composition": composition,
        "relaxed": relaxed,
        "skipped": {"ambiguous_value": ambiguous, "ambiguous_presence": mixed},
    }
    return _finish(cfg.language, dimension.name, "single", instances, cfg, rng, meta)


def generate_tagcount_task(entries: Sequence[ParadigmEntry], freq: FrequencyList | None,
                           cfg: LanguageConfig) -> ProbingDataset:
    readings = _readings(entries)
    labeled = {}
    ambiguous = 0
    for form in sorted(readings):
        counts = {len(e.bundle) for e in readings[form]}
        if len(counts) == 1:
            labeled[form] = str(counts.pop())
        else:
            ambiguous += 1
    _check_eligible(labeled, cfg)
    rng = _rng(cfg, "TagCount")
    instances, composition, relaxed = _compose_labeled(labeled, [], freq, cfg, rng, False)
    meta = {
        "task_type": "tag-count",
        "ambiguity_removed": ambiguous,
        "pools": {"labeled": len(labeled)},
        "composition": composition,
        "relaxed": relaxed,
        "skipped": {"ambiguous_value": ambiguous},
    }
    return _finish(cfg.language, "TagCount", "single", instances, cfg, rng, meta)


def generate_characterbin_task(entries: Sequence[ParadigmEntry], freq: FrequencyList | None,
                               cfg: LanguageConfig) -> ProbingDataset:
    readings = _readings(entries)
    labeled = {form: character_bin(form) for form in sorted(readings) if form}
    _check_eligible(labeled, cfg)
    rng = _rng(cfg, "CharacterBin")
    instances, composition, relaxed = _compose_labeled(labeled, [], freq, cfg, rng, False)
    meta = {
        "task_type": "character-bin",
        "ambiguity_removed": 0,
        "pools": {"labeled": len(labeled)},
        "composition": composition,
        "relaxed": relaxed,
        "skipped": {},
    }
    return _finish(cfg.language, "CharacterBin", "single", instances, cfg, rng, meta)


# ---------------------------------------------------------------------------
# paired tasks


class _PairStream:
    """Draws valid, globally unique entry pairs uniformly from a union of cross-product blocks."""

    _ENUMERATE_BELOW = 100_000

    def __init__(self, blocks, valid, rng, seen):
        self.blocks = [b for b in blocks if b[0] and b[1]]
        self.cum = []
        total = 0
        for a, b in self.blocks:
            total += len(a) * len(b)
            self.cum.append(total)
        self.capacity = total
        self.valid = valid
        self.rng = rng
        self.seen = seen
        self._perm = None
        self._tried = set()
        self.exhausted = total == 0

    def _decode(self, idx):
        bi = bisect.bisect_right(self.cum, idx)
        start = self.cum[bi - 1] if bi else 0
        a, b = self.blocks[bi]
        off = idx - start
        return a[off // len(b)], b[off % len(b)]

    def _next_index(self):
        if self.capacity <= self._ENUMERATE_BELOW:
            if self._perm is None:
                self._perm = list(range(self.capacity))
                self.rng.shuffle(self._perm)
                self._perm.reverse()
            return self._perm.pop() if self._perm else None
        if len(self._tried) >= self.capacity:
            return None
        while True:
            idx = self.rng.randrange(self.capacity)
            if idx not in self._tried:
                self._tried.add(idx)
                return idx

    def draw(self, n):
        out = []
        budget = max(50 * n, 20_000)
        while len(out) < n and not self.exhausted:
            if budget <= 0 and self.capacity > self._ENUMERATE_BELOW:
                self.exhausted = True
                break
            budget -= 1
            idx = self._next_index()
            if idx is None:
                self.exhausted = True
                break
            a, b = self._decode(idx)
            if a.form == b.form or not self.valid(a, b):
                continue
            key = (a.form, b.form) if a.form < b.form else (b.form, a.form)
            if key in self.seen:
                continue
            self.seen.add(key)
            out.append((a, b))
        return out


def _halves(group: list, k: int, rng: random.Random):
    g = list(group)
    rng.shuffle(g)
    mid = len(g) // 2
    return g[:mid][:k], g[mid:][:k]


def _by_bundle(entries):
    out = defaultdict(list)
    for e in entries:
        out[e.bundle].append(e)
    return out


def _cross_blocks(side_a, side_b, accept):
    """Cross-product blocks between bundle groups of two halves where ``accept(bundle_a, bundle_b)``."""
    ga, gb = _by_bundle(side_a), _by_bundle(side_b)
    blocks = []
    for ba in sorted(ga, key=lambda b: b.serialize()):
        for bb in sorted(gb, key=lambda b: b.serialize()):
            if accept(ba, bb):
                blocks.append((ga[ba], gb[bb]))
    return blocks


def _sort_entries(entries):
    return sorted(entries, key=lambda e: (e.form, e.lemma, e.bundle.serialize()))


def _allocate(total, capacity, cap):
    alloc = {k: 0 for k in capacity}
    limit = {k: min(capacity[k], cap) for k in capacity}
    active = {k for k in capacity if limit[k] > 0}
    remaining = total
    while remaining > 0 and active:
        shares = apportion(remaining, {k: capacity[k] for k in active})
        for k in sorted(active):
            alloc[k] += min(shares[k], limit[k] - alloc[k])
        remaining = total - sum(alloc.values())
        active = {k for k in active if alloc[k] < limit[k]}
    return alloc


def _sample_pairs(streams: dict[str, _PairStream], cfg: LanguageConfig):
    """Draw ``cfg.total_size`` pairs, proportional to each label's pool but capped near the mean."""
    n_total = cfg.total_size
    labels = sorted(l for l, s in streams.items() if s.capacity > 0)
    if not labels:
        raise InsufficientData(0, cfg.min_samples, "pairs")
    if len(labels) < 2:
        raise DegenerateFeature(labels)
    upper = sum(streams[l].capacity for l in labels)
    if upper < max(cfg.min_samples, n_total):
        raise InsufficientData(upper, max(cfg.min_samples, n_total), "pairs")

    cap = max(1, int(cfg.rebalance_factor * n_total / len(labels)))
    capacity = {l: streams[l].capacity for l in labels}
    drawn = {l: [] for l in labels}
    cap_relaxed = False
    while True:
        target = _allocate(n_total, capacity, cap)
        short = False
        for l in labels:
            need = target[l] - len(drawn[l])
            if need > 0:
                got = streams[l].draw(need)
                drawn[l].extend(got)
                if len(got) < need:
                    capacity[l] = len(drawn[l])
                    short = True
        have = sum(len(v) for v in drawn.values())
        if have >= n_total:
            break
        if not short:
            # every label is at the cap; loosen it
            if sum(min(capacity[l], cap) for l in labels) < n_total and cap < max(capacity.values()):
                cap = max(capacity.values())
                cap_relaxed = True
                continue
            break
    have = sum(len(v) for v in drawn.values())
    if have < max(cfg.min_samples, n_total):
        raise InsufficientData(have, max(cfg.min_samples, n_total), "pairs")
    return drawn, {"label_cap": cap, "cap_relaxed": cap_relaxed,
                   "pool_capacity": {l: streams[l].capacity for l in labels}}


def _pair_instances(drawn):
    out = []
    for label in sorted(drawn):
        for a, b in drawn[label]:
            out.append(ProbingInstance(FormPair(a.form, b.form), label, Provenance.PAIR))
    return out


def generate_samefeat_task(entries: Sequence[ParadigmEntry], cfg: LanguageConfig) -> ProbingDataset:
    """Pairs that share exactly one non-excluded feature value (or only their lemma)."""
    entries = _sort_entries(e for e in entries if not e.multiword)
    excluded = cfg.excluded_dimensions_for_pairing
    rng = _rng(cfg, "SameFeat")
    seen: set = set()
    dims = sorted({d for e in entries for d in e.bundle.dimensions if d not in excluded})

    streams = {}
    for d in dims:
        groups = defaultdict(list)
        for e in entries:
            v = e.bundle.get(d)
            if v is not None:
                groups[v].append(e)
        blocks = []
        for v in sorted(groups):
            side_a, side_b = _halves(groups[v], cfg.samefeat_k, rng)
            blocks += _cross_blocks(
                side_a, side_b, lambda ba, bb, d=d: bundle_shared(ba, bb, excluded) == {d})
        streams[d.name] = _PairStream(blocks, lambda a, b: True, rng, seen)

    by_lemma = defaultdict(list)
    for e in entries:
        by_lemma[e.lemma].append(e)
    blocks = []
    for lemma in sorted(by_lemma):
        side_a, side_b = _halves(by_lemma[lemma], cfg.samefeat_k, rng)
        blocks += _cross_blocks(side_a, side_b, lambda ba, bb: not bundle_shared(ba, bb, excluded))
    streams[LEMMA_LABEL] = _PairStream(blocks, lambda a, b: a.lemma == b.lemma, rng, seen)

    drawn, info = _sample_pairs(streams, cfg)
    meta = {"task_type": "samefeat", "ambiguity_removed": 0, "pairing": info,
            "excluded_dimensions": sorted(d.name for d in excluded)}
    return _finish(cfg.language, "SameFeat", "pair", _pair_instances(drawn), cfg, rng, meta)


def generate_oddfeat_task(entries: Sequence[ParadigmEntry], cfg: LanguageConfig) -> ProbingDataset:
    """Pairs that differ in exactly one non-excluded feature (or only in lemma)."""
    entries = _sort_entries(e for e in entries if not e.multiword)
    excluded = cfg.excluded_dimensions_for_pairing
    rng = _rng(cfg, "OddFeat")
    seen: set = set()

    by_lemma = defaultdict(list)
    for e in entries:
        by_lemma[e.lemma].append(e)
    blocks_by_dim = defaultdict(list)
    for lemma in sorted(by_lemma):
        group = list(by_lemma[lemma])
        rng.shuffle(group)
        group = group[:cfg.lemma_group_sample]
        gb = _by_bundle(group)
        keys = sorted(gb, key=lambda b: b.serialize())
        for i, ba in enumerate(keys):
            for bb in keys[i + 1:]:
                diff = bundle_diff(ba, bb, excluded)
                if len(diff) == 1:
                    (d,) = diff
                    blocks_by_dim[d].append((gb[ba], gb[bb]))
    streams = {d.name: _PairStream(blocks_by_dim[d], lambda a, b: True, rng, seen)
               for d in sorted(blocks_by_dim)}

    by_features = defaultdict(list)
    for e in entries:
        by_features[e.bundle].append(e)
    blocks = []
    for key in sorted(by_features, key=lambda b: b.serialize()):
        side_a, side_b = _halves(by_features[key], cfg.oddfeat_k, rng)
        blocks.append((side_a, side_b))
    streams[LEMMA_LABEL] = _PairStream(
        blocks, lambda a, b: a.lemma != b.lemma and not bundle_diff(a.bundle, b.bundle, excluded), rng, seen)

    drawn, info = _sample_pairs(streams, cfg)
    meta = {"task_type": "oddfeat", "ambiguity_removed": 0, "pairing": info,
            "excluded_dimensions": sorted(d.name for d in excluded)}
    return _finish(cfg.language, "OddFeat", "pair", _pair_instances(drawn), cfg, rng, meta)


# ---------------------------------------------------------------------------
# token-level


def token_task_name(dimension: Dimension) -> str:
    return f"{dimension.name}-token"


def generate_token_level_task(tokens: Sequence[AnnotatedToken], dimension: Dimension,
                              cfg: LanguageConfig) -> ProbingDataset:
    """Single-feature task over tokens in context; no frequency filter, no None class, no dedup."""
    labeled = [(t, t.bundle.get(dimension)) for t in tokens if dimension in t.bundle]
    if not labeled:
        raise InsufficientData(0, cfg.min_samples)
    values = {v for _, v in labeled}
    if len(values) < 2:
        raise DegenerateFeature(values)
    if len(labeled) < cfg.min_samples:
        raise InsufficientData(len(labeled), cfg.min_samples)
    if len(labeled) < cfg.total_size:
        raise InsufficientData(len(labeled), cfg.total_size)
    task = token_task_name(dimension)
    rng = _rng(cfg, task)
    chosen = rng.sample(range(len(labeled)), cfg.total_size)
    instances = [ProbingInstance(TokenInContext(labeled[i][0].sentence, labeled[i][0].index),
                                 labeled[i][1], Provenance.TOKEN) for i in sorted(chosen)]
    meta = {"task_type": "token-level", "dimension": dimension.name, "ambiguity_removed": 0,
            "pools": {"labeled": len(labeled)}}
    return _finish(cfg.language, task, "token", instances, cfg, rng, meta)


# ---------------------------------------------------------------------------
# dataset files


def _format_line(inst: ProbingInstance) -> str:
    it = inst.item
    if isinstance(it, SingleForm):
        cols = [it.form]
    elif isinstance(it, FormPair):
        cols = [it.form1, it.form2]
    else:
        cols = [it.sentence.replace("\t", " "), str(it.index)]
    return "\t".join(cols + [inst.label])


def _parse_line(line: str, kind: str, prov: Provenance, where: str) -> ProbingInstance:
    cols = line.split("\t")
    try:
        if kind == "single" and len(cols) == 2:
            return ProbingInstance(SingleForm(cols[0]), cols[1], prov)
        if kind == "pair" and len(cols) == 3:
            return ProbingInstance(FormPair(cols[0], cols[1]), cols[2], prov)
        if kind == "token" and len(cols) == 3:
            return ProbingInstance(TokenInContext(cols[0], int(cols[1])), cols[2], prov)
    except ValueError as exc:
        raise SchemaError(f"{where}: {exc}") from None
    raise SchemaError(f"{where}: {len(cols)} columns do not fit a {kind} dataset")


def write_dataset(ds: ProbingDataset, directory) -> Path:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    for s in SPLITS:
        with open(d / f"{s}.tsv", "w", encoding="utf-8", newline="\n") as fh:
            for inst in ds.splits[s]:
                fh.write(_format_line(inst) + "\n")
    meta = {
        "language": ds.language,
        "task": ds.task,
        "kind": ds.kind,
        "label_set": list(ds.label_set),
        "split_sizes": {s: len(ds.splits[s]) for s in SPLITS},
        "provenance": {s: "".join(_PROV_CODE[i.provenance] for i in ds.splits[s]) for s in SPLITS},
        "meta": ds.meta,
    }
    with open(d / "meta.json", "w", encoding="utf-8", newline="\n") as fh:
        json.dump(meta, fh, ensure_ascii=False, indent=1, sort_keys=True)
        fh.write("\n")
    return d


def read_dataset(directory) -> ProbingDataset:
    d = Path(directory)
    with open(d / "meta.json", encoding="utf-8") as fh:
        doc = json.load(fh)
    try:
        kind = doc["kind"]
        sizes = doc["split_sizes"]
        provs = doc["provenance"]
        label_set = doc["label_set"]
    except KeyError as exc:
        raise SchemaError(f"{d}/meta.json missing {exc}") from None
    splits = {}
    for s in SPLITS:
        with open(d / f"{s}.tsv", encoding="utf-8") as fh:
            lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
        if len(lines) != sizes.get(s) or len(provs.get(s, "")) != len(lines):
            raise SchemaError(f"{d}: {s} has {len(lines)} lines, metadata says {sizes.get(s)}")
        insts = []
        for n, (line, code) in enumerate(zip(lines, provs[s]), 1):
            if code not in _CODE_PROV:
                raise SchemaError(f"{d}/{s}.tsv:{n}: unknown provenance code {code!r}")
            inst = _parse_line(line, kind, _CODE_PROV[code], f"{d}/{s}.tsv:{n}")
            if inst.label not in label_set:
                raise SchemaError(f"{d}/{s}.tsv:{n}: label {inst.label!r} not in label set")
            insts.append(inst)
        splits[s] = insts
    return ProbingDataset(doc["language"], doc["task"], kind, label_set, splits, doc.get("meta", {}))
