"""Morphological feature model: dimensions, values, bundles and per-language settings.

Bundles are parsed from UniMorph tag strings such as ``N;DAT;PL;PSS2S`` or the
dotted table notation ``N.Dat.Pl.Poss2Sg``.  Both parse to the same bundle and
serialize back to the canonical semicolon form.
"""

from __future__ import annotations

import re
import unicodedata
from dataclasses import dataclass, field, asdict
from pathlib import Path
from typing import Iterable, Mapping

import yaml

from .errors import EmptyBundle, MalformedBundle, FormatError

CORE_DIMENSIONS = (
    "POS",
    "Case",
    "Gender",
    "Mood",
    "Number",
    "Person",
    "Polarity",
    "Possession",
    "Tense",
    "Voice",
    "Aspect",
    "Definiteness",
)
_CORE_INDEX = {name: i for i, name in enumerate(CORE_DIMENSIONS)}


@dataclass(frozen=True)
class Dimension:
    """A feature dimension.  ``other=True`` marks a dimension outside the core set."""

    name: str
    other: bool = False

    def __post_init__(self):
        if not self.name:
            raise ValueError("dimension name must be non-empty")
        if not self.other and self.name not in _CORE_INDEX:
            raise ValueError(f"{self.name!r} is not a core dimension; use Dimension.get")

    @classmethod
    def get(cls, name: str) -> "Dimension":
        if name in _CORE_INDEX:
            return cls(name)
        return cls(name, other=True)

    @property
    def sort_key(self):
        if self.other:
            return (len(CORE_DIMENSIONS), self.name)
        return (_CORE_INDEX[self.name], "")

    def __lt__(self, other: "Dimension") -> bool:
        return self.sort_key < other.sort_key

    def __str__(self):
        return self.name


POS = Dimension("POS")
CASE = Dimension("Case")
GENDER = Dimension("Gender")
MOOD = Dimension("Mood")
NUMBER = Dimension("Number")
PERSON = Dimension("Person")
POLARITY = Dimension("Polarity")
POSSESSION = Dimension("Possession")
TENSE = Dimension("Tense")
VOICE = Dimension("Voice")
ASPECT = Dimension("Aspect")
DEFINITENESS = Dimension("Definiteness")
INTERROGATIVITY = Dimension.get("Interrogativity")


@dataclass(frozen=True, order=False)
class FeatureValue:
    dimension: Dimension
    tag: str

    def __post_init__(self):
        if not self.tag or re.search(r"[\s;]", self.tag):
            raise MalformedBundle(f"invalid tag {self.tag!r}")

    @property
    def sort_key(self):
        return (self.dimension.sort_key, self.tag)

    def __str__(self):
        return f"{self.dimension.name}:{self.tag}"


# UniMorph tags grouped by the dimension they belong to.
_BUILTIN_TAGS: dict[str, tuple[str, ...]] = {
    "POS": (
        "N", "PROPN", "V", "V.PTCP", "V.CVB", "V.MSDR", "ADJ", "ADV", "PRO",
        "DET", "ART", "ADP", "NUM", "CONJ", "PART", "INTJ", "CLF", "COMP", "AUX",
    ),
    "Case": (
        "NOM", "ACC", "GEN", "DAT", "ABL", "LOC", "INS", "VOC", "ESS", "TRANS",
        "PRT", "COM", "ABE", "PRIV", "ERG", "ABS", "FRML", "EQTV", "TERM",
        "IN+ESS", "IN+ABL", "IN+ALL", "AT+ESS", "AT+ABL", "AT+ALL",
        "ON+ESS", "ON+ABL", "ON+ALL",
    ),
    "Gender": ("MASC", "FEM", "NEUT", "MASC+FEM", "BANTU1", "BANTU2"),
    "Mood": (
        "IND", "SBJV", "IMP", "COND", "OPT", "POT", "PURP", "REAL", "IRR",
        "INFR", "OBLIG", "DEB", "ADM", "QUOT",
    ),
    "Number": ("SG", "PL", "DU", "PAUC", "GRPL"),
    "Person": (
        "0", "1", "2", "3", "4",
        "1SG", "2SG", "3SG", "1PL", "2PL", "3PL", "1DU", "2DU", "3DU",
    ),
    "Polarity": ("NEG", "POS"),
    "Possession": (
        "PSS1S", "PSS2S", "PSS3S", "PSS1P", "PSS2P", "PSS3P", "PSS1D",
        "PSS2D", "PSS3D", "PSS3", "PSSD", "PSS4", "ALN", "NALN",
    ),
    "Tense": ("PRS", "PST", "FUT", "RCT", "RMT", "HOD", "1DAY"),
    "Voice": ("ACT", "PASS", "MID", "ANTIP", "APPL", "CAUS", "RECP", "REFL"),
    "Aspect": ("PROG", "PFV", "IPFV", "PRF", "HAB", "PROSP", "ITER", "DUR", "INCH"),
    "Definiteness": ("DEF", "INDF", "SPEC", "NSPEC"),
    "Interrogativity": ("Q", "DECL"),
    "Comparison": ("CMPR", "SPRL", "RL", "AB", "EQT"),
    "Finiteness": ("FIN", "NFIN", "PTCP", "CVB", "MSDR"),
}

# Spellings seen in dotted table notation.
_ALIASES = {
    "F": "FEM",
    "M": "MASC",
    "NT": "NEUT",
    "PASSIVE": "PASS",
    "SUBJ": "SBJV",
    "PRES": "PRS",
    "PAST": "PST",
}
_POSS_RE = re.compile(r"^POSS([123])(SG|PL|DU|S|P|D)$")
_PERSON_DIGITS = frozenset("01234")


class Catalog:
    """Tag-to-dimension lookup.  Unknown tags become their own ``Other`` dimension."""

    def __init__(self, mapping: Mapping[str, Dimension] | None = None):
        self._map: dict[str, Dimension] = dict(mapping or {})

    @classmethod
    def builtin(cls) -> "Catalog":
        mapping = {}
        for dim_name, tags in _BUILTIN_TAGS.items():
            dim = Dimension.get(dim_name)
            for tag in tags:
                mapping[tag] = dim
        return cls(mapping)

    @classmethod
    def from_file(cls, path, base: "Catalog | None" = None) -> "Catalog":
        """Extend ``base`` (default: the builtin catalog) with a YAML/JSON ``tag: Dimension`` map."""
        with open(path, encoding="utf-8") as fh:
            data = yaml.safe_load(fh) or {}
        if not isinstance(data, dict):
            raise FormatError("catalog file must be a mapping of tag to dimension", path=path)
        catalog = (base or cls.builtin()).copy()
        for tag, dim_name in data.items():
            catalog.add(str(tag), str(dim_name))
        return catalog

    def copy(self) -> "Catalog":
        return Catalog(self._map)

    def add(self, tag: str, dimension: str | Dimension):
        if not isinstance(dimension, Dimension):
            dimension = Dimension.get(dimension)
        self._map[_normalize_tag(tag)] = dimension

    def __contains__(self, tag):
        return _normalize_tag(tag) in self._map

    def __len__(self):
        return len(self._map)

    def resolve(self, token: str) -> FeatureValue:
        tag = _normalize_tag(token)
        if tag in self._map:
            return FeatureValue(self._map[tag], tag)
        return FeatureValue(Dimension(tag, other=True), tag)


def _normalize_tag(token: str) -> str:
    tag = unicodedata.normalize("NFC", token.strip()).upper()
    tag = _ALIASES.get(tag, tag)
    m = _POSS_RE.match(tag)
    if m:
        tag = f"PSS{m.group(1)}{m.group(2)[0]}"
    return tag


DEFAULT_CATALOG = Catalog.builtin()


@dataclass(frozen=True)
class FeatureBundle:
    """One morphological interpretation: at most one value per dimension.

    ``values`` is kept in canonical order (dimension, then tag).
    """

    values: tuple[FeatureValue, ...] = ()

    def __post_init__(self):
        ordered = tuple(sorted(set(self.values), key=lambda v: v.sort_key))
        seen = set()
        for v in ordered:
            if v.dimension in seen:
                raise MalformedBundle(f"two values for dimension {v.dimension.name}")
            seen.add(v.dimension)
        object.__setattr__(self, "values", ordered)
        object.__setattr__(self, "_by_dim", {v.dimension: v.tag for v in ordered})

    @classmethod
    def of(cls, pairs: Mapping[Dimension | str, str]) -> "FeatureBundle":
        vals = []
        for dim, tag in pairs.items():
            if not isinstance(dim, Dimension):
                dim = Dimension.get(dim)
            vals.append(FeatureValue(dim, tag))
        return cls(tuple(vals))

    def __eq__(self, other):
        if not isinstance(other, FeatureBundle):
            return NotImplemented
        return self.values == other.values

    def __hash__(self):
        return hash(self.values)

    def __len__(self):
        return len(self.values)

    def __iter__(self):
        return iter(self.values)

    def __contains__(self, dim):
        return dim in self._by_dim

    def get(self, dim: Dimension, default=None):
        return self._by_dim.get(dim, default)

    @property
    def dimensions(self) -> frozenset[Dimension]:
        return frozenset(self._by_dim)

    def serialize(self) -> str:
        return ";".join(v.tag for v in self.values)

    def __str__(self):
        return self.serialize()

    def __repr__(self):
        return "FeatureBundle{" + ", ".join(str(v) for v in self.values) + "}"


def parse_bundle(raw: str, catalog: Catalog = DEFAULT_CATALOG) -> FeatureBundle:
    """Parse a semicolon- or dot-separated tag string into a bundle.

    A bare person digit and a number tag are fused into one Person value
    (``3;SG`` becomes ``3SG``), which is how person agreement is labelled.
    """
    sep = ";" if ";" in raw else "."
    tokens = [t.strip() for t in raw.split(sep)]
    tokens = [t for t in tokens if t]
    if not tokens:
        raise EmptyBundle("empty feature bundle")
    by_dim: dict[Dimension, FeatureValue] = {}
    for tok in tokens:
        if re.search(r"\s", tok):
            raise MalformedBundle(f"tag {tok!r} contains whitespace")
        value = catalog.resolve(tok)
        if value.dimension in by_dim:
            raise MalformedBundle(
                f"{raw!r}: {by_dim[value.dimension].tag} and {value.tag} both mark {value.dimension.name}"
            )
        by_dim[value.dimension] = value
    person, number = by_dim.get(PERSON), by_dim.get(NUMBER)
    if person is not None and number is not None and person.tag in _PERSON_DIGITS:
        by_dim[PERSON] = FeatureValue(PERSON, person.tag + number.tag)
        del by_dim[NUMBER]
    return FeatureBundle(tuple(by_dim.values()))


def bundle_shared(a: FeatureBundle, b: FeatureBundle, excluded: Iterable[Dimension] = ()) -> set[Dimension]:
    """Dimensions outside ``excluded`` that both bundles mark with the same value."""
    excluded = set(excluded)
    return {
        d for d in a.dimensions & b.dimensions
        if d not in excluded and a.get(d) == b.get(d)
    }


def bundle_diff(a: FeatureBundle, b: FeatureBundle, excluded: Iterable[Dimension] = ()) -> set[Dimension]:
    """Dimensions outside ``excluded`` whose values differ, including those marked on one side only."""
    excluded = set(excluded)
    return {
        d for d in a.dimensions | b.dimensions
        if d not in excluded and a.get(d) != b.get(d)
    }


def nfc(text: str) -> str:
    return unicodedata.normalize("NFC", text)


@dataclass(frozen=True)
class ParadigmEntry:
    lemma: str
    form: str
    bundle: FeatureBundle

    def __post_init__(self):
        object.__setattr__(self, "lemma", nfc(self.lemma))
        object.__setattr__(self, "form", nfc(self.form))
        if not self.lemma.strip() or not self.form.strip():
            raise FormatError("lemma and form must be non-empty")

    @property
    def multiword(self) -> bool:
        return bool(re.search(r"\s", self.form.strip()))

    @property
    def pos(self):
        return self.bundle.get(POS)


# Languages whose verbs all carry the same Mood / Interrogativity tag.
_PAIRING_EXCLUSIONS = {
    "fi": {MOOD},
    "fin": {MOOD},
    "tr": {MOOD, INTERROGATIVITY},
    "tur": {MOOD, INTERROGATIVITY},
}


@dataclass
class LanguageConfig:
    language: str
    seed: int
    excluded_dimensions_for_pairing: frozenset[Dimension] = frozenset()
    none_class_ratio: float = 0.30
    frequent_ratio: float = 0.80
    min_samples: int = 10_000
    split_sizes: tuple[int, int, int] = (7000, 2000, 1000)
    frequency_cutoff: int = 1_000_000
    samefeat_k: int = 500
    oddfeat_k: int = 100
    lemma_group_sample: int = 50
    rebalance_factor: float = 2.0

    def __post_init__(self):
        if self.seed is None:
            raise ValueError("seed is mandatory")
        self.seed = int(self.seed)
        excluded = {d if isinstance(d, Dimension) else Dimension.get(d)
                    for d in self.excluded_dimensions_for_pairing}
        excluded |= {POS} | _PAIRING_EXCLUSIONS.get(self.language.lower(), set())
        self.excluded_dimensions_for_pairing = frozenset(excluded)
        if not 0 < self.none_class_ratio < 1:
            raise ValueError("none_class_ratio must lie strictly between 0 and 1")
        if not 0 <= self.frequent_ratio <= 1:
            raise ValueError("frequent_ratio must lie in [0, 1]")
        self.split_sizes = tuple(int(s) for s in self.split_sizes)
        if len(self.split_sizes) != 3 or min(self.split_sizes) <= 0:
            raise ValueError("split_sizes must be three positive counts")
        if self.min_samples < 0:
            raise ValueError("min_samples must be non-negative")

    @property
    def total_size(self) -> int:
        return sum(self.split_sizes)

    def snapshot(self) -> dict:
        d = asdict(self)
        d["excluded_dimensions_for_pairing"] = sorted(
            d.name for d in self.excluded_dimensions_for_pairing)
        d["split_sizes"] = list(self.split_sizes)
        return d

    @classmethod
    def from_snapshot(cls, snap: Mapping) -> "LanguageConfig":
        snap = dict(snap)
        snap["excluded_dimensions_for_pairing"] = frozenset(
            Dimension.get(n) for n in snap.get("excluded_dimensions_for_pairing", ()))
        snap["split_sizes"] = tuple(snap.get("split_sizes", (7000, 2000, 1000)))
        return cls(**snap)


def load_catalog(path: str | Path | None) -> Catalog:
    if path is None:
        return DEFAULT_CATALOG
    return Catalog.from_file(path)
