"""Correlation of probing scores with downstream scores, training trajectories, OOV accounting."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, NamedTuple, Sequence, Union

import numpy as np
from scipy import stats

from .errors import DimensionMismatch, FormatError, InsufficientData, MismatchedSubjects, ProbingError, ZeroVariance
from .ingest import AnnotatedToken, EmbeddingTable
from .probe import ProbeConfig, train_probe
from .taskgen import SPLITS, ProbingDataset

EXACT_MAX_N = 8
DEFAULT_THRESHOLDS = (0.1, 0.2)


@dataclass(frozen=True)
class ScoreVector:
    ids: tuple
    scores: tuple

    def __init__(self, ids, scores):
        ids, scores = tuple(ids), tuple(float(s) for s in scores)
        if len(ids) != len(scores):
            raise ValueError("ids and scores differ in length")
        if len(ids) < 2:
            raise ValueError("a score vector needs at least two subjects")
        if len(set(ids)) != len(ids):
            raise ValueError("subject ids must be unique")
        object.__setattr__(self, "ids", ids)
        object.__setattr__(self, "scores", scores)

    @classmethod
    def from_mapping(cls, m: Mapping) -> "ScoreVector":
        keys = sorted(m)
        return cls(keys, [m[k] for k in keys])

    def aligned(self, ids) -> np.ndarray:
        pos = dict(zip(self.ids, self.scores))
        return np.array([pos[i] for i in ids], dtype=np.float64)


def _align(a: ScoreVector, b: ScoreVector):
    if set(a.ids) != set(b.ids):
        missing = sorted(set(a.ids) ^ set(b.ids), key=str)
        raise MismatchedSubjects(f"subjects differ: {missing}")
    ids = list(a.ids)
    return a.aligned(ids), b.aligned(ids)


def _ranks(x: np.ndarray) -> np.ndarray:
    r = stats.rankdata(x, method="average")
    if np.all(r == r[0]):
        raise ZeroVariance("all scores are tied")
    return r


def _pearson(x: np.ndarray, y: np.ndarray) -> float:
    xc = x - x.mean()
    yc = y - y.mean()
    rho = float(xc @ yc / math.sqrt(float(xc @ xc) * float(yc @ yc)))
    return max(-1.0, min(1.0, rho))


def spearman_rho(a: ScoreVector, b: ScoreVector) -> float:
    """Pearson correlation of mid-ranks.  Raises ZeroVariance if either side is constant."""
    x, y = _align(a, b)
    return _pearson(_ranks(x), _ranks(y))


class PValue(NamedTuple):
    p: float
    exact: bool


def permutation_p_value(a: ScoreVector, b: ScoreVector, two_sided: bool = True) -> PValue:
    """Exact permutation test for n <= 8, t approximation beyond (``exact=False``)."""
    x, y = _align(a, b)
    n = len(x)
    if n < 3:
        raise InsufficientData(n, 3, "subjects")
    rx, ry = _ranks(x), _ranks(y)
    observed = _pearson(rx, ry)
    if n <= EXACT_MAX_N:
        perms = np.array(list(itertools.permutations(ry)), dtype=np.float64)
        xc = rx - rx.mean()
        pc = perms - ry.mean()
        rhos = pc @ xc / math.sqrt(float(xc @ xc) * float(pc[0] @ pc[0]))
        if two_sided:
            hits = np.count_nonzero(np.abs(rhos) >= abs(observed) - 1e-12)
        else:
            hits = np.count_nonzero(rhos >= observed - 1e-12)
        return PValue(hits / len(perms), True)
    if abs(observed) >= 1.0:
        return PValue(0.0, False)
    t = observed * math.sqrt((n - 2) / (1 - observed ** 2))
    if two_sided:
        p = 2 * stats.t.sf(abs(t), n - 2)
    else:
        p = stats.t.sf(t, n - 2)
    return PValue(float(min(1.0, p)), False)


# ---------------------------------------------------------------------------
# correlation matrix


@dataclass
class CorrelationCell:
    probe_task: str
    downstream_task: str
    n: int
    rho: float | None = None
    p_value: float | None = None
    exact: bool | None = None
    undefined: str | None = None  # reason when rho/p cannot be computed

    @property
    def defined(self) -> bool:
        return self.undefined is None

    def significant(self, threshold: float) -> bool:
        return self.defined and self.p_value <= threshold


@dataclass
class CorrelationReport:
    rows: list[str]
    cols: list[str]
    cells: dict[tuple[str, str], CorrelationCell]
    thresholds: tuple[float, ...] = DEFAULT_THRESHOLDS
    subjects: list[str] = field(default_factory=list)

    def cell(self, row, col) -> CorrelationCell:
        return self.cells[(row, col)]

    def flags(self, row, col) -> dict[str, bool]:
        c = self.cells[(row, col)]
        return {f"p<={t:g}": c.significant(t) for t in self.thresholds}

    def filtered(self, threshold: float | None = None) -> dict[tuple[str, str], CorrelationCell]:
        """Only the cells significant at ``threshold`` (default: the loosest threshold)."""
        t = max(self.thresholds) if threshold is None else threshold
        return {k: c for k, c in self.cells.items() if c.significant(t)}

    def to_dict(self) -> dict:
        cells = []
        for r in self.rows:
            for c in self.cols:
                cell = self.cells[(r, c)]
                cells.append({
                    "probe_task": r, "downstream_task": c, "n": cell.n,
                    "rho": cell.rho, "p_value": cell.p_value, "exact": cell.exact,
                    "undefined": cell.undefined, "flags": self.flags(r, c),
                })
        return {"rows": self.rows, "cols": self.cols, "subjects": self.subjects,
                "thresholds": list(self.thresholds), "cells": cells}

    def table(self, threshold: float | None = None) -> str:
        """Aligned text grid of rho; ``*``/``**`` mark the loose/strict thresholds."""
        keep = self.filtered(threshold) if threshold is not None else None
        strict, loose = min(self.thresholds), max(self.thresholds)
        width = max([len(c) for c in self.cols] + [8])
        head = max([len(r) for r in self.rows] + [4])
        lines = [" " * head + "".join(f" {c:>{width}}" for c in self.cols)]
        for r in self.rows:
            parts = []
            for c in self.cols:
                cell = self.cells[(r, c)]
                if not cell.defined:
                    txt = "undef"
                elif keep is not None and (r, c) not in keep:
                    txt = ""
                else:
                    mark = "**" if cell.significant(strict) else "*" if cell.significant(loose) else ""
                    txt = f"{cell.rho:.2f}{mark}"
                parts.append(f" {txt:>{width}}")
            lines.append(f"{r:<{head}}" + "".join(parts))
        return "\n".join(lines) + "\n"


def correlation_matrix(probe_results: Mapping[str, Mapping[str, float | None]],
                       downstream_results: Mapping[str, Mapping[str, float | None]],
                       thresholds: Sequence[float] = DEFAULT_THRESHOLDS) -> CorrelationReport:
    """Spearman rho and p for every (probing task, downstream task) pair.

    Both inputs map task -> {embedding id -> score}.  A missing or ``None``
    score drops that subject from the affected cells only; a cell left with
    fewer than three subjects, or with constant scores, is marked undefined.
    """
    probe_ids = {e for m in probe_results.values() for e in m}
    down_ids = {e for m in downstream_results.values() for e in m}
    if probe_ids != down_ids:
        raise MismatchedSubjects(f"embedding ids differ: {sorted(probe_ids ^ down_ids, key=str)}")
    rows, cols = sorted(probe_results), sorted(downstream_results)
    cells = {}
    for r in rows:
        for c in cols:
            pr, dr = probe_results[r], downstream_results[c]
            ids = sorted((e for e in probe_ids if pr.get(e) is not None and dr.get(e) is not None), key=str)
            cell = CorrelationCell(r, c, len(ids))
            if len(ids) < 3:
                cell.undefined = f"only {len(ids)} subjects with scores"
            else:
                a = ScoreVector(ids, [pr[e] for e in ids])
                b = ScoreVector(ids, [dr[e] for e in ids])
                try:
                    cell.rho = spearman_rho(a, b)
                    pv = permutation_p_value(a, b)
                    cell.p_value, cell.exact = pv.p, pv.exact
                except ZeroVariance as exc:
                    cell.undefined = f"zero variance: {exc}"
            cells[(r, c)] = cell
    return CorrelationReport(rows, cols, cells, tuple(sorted(thresholds)), sorted(probe_ids, key=str))


def read_downstream(path) -> dict[str, dict[str, float]]:
    """``embedding<TAB>task<TAB>score`` lines to {task: {embedding: score}}."""
    out: dict[str, dict[str, float]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip() or line.startswith("#"):
                continue
            cols = line.rstrip("\n").split("\t")
            if len(cols) != 3:
                raise FormatError("expected embedding, task and score", line=lineno, path=path)
            emb, task, raw = cols
            try:
                score = float(raw)
            except ValueError:
                raise FormatError(f"bad score {raw!r}", line=lineno, path=path) from None
            out.setdefault(task, {})[emb] = score
    return out


# ---------------------------------------------------------------------------
# trajectories


Vectors = Union[EmbeddingTable, Mapping[str, Mapping[str, np.ndarray]]]


@dataclass
class Snapshot:
    """One saved model state: a word table, or per-task per-split instance vectors."""
    epoch: str
    vectors: Vectors

    def width(self) -> int:
        if isinstance(self.vectors, EmbeddingTable):
            return self.vectors.dim
        widths = {np.asarray(m).shape[1] for per_task in self.vectors.values() for m in per_task.values()}
        if len(widths) != 1:
            raise DimensionMismatch(f"snapshot {self.epoch}: mixed widths {sorted(widths)}")
        return widths.pop()


@dataclass
class TrajectoryReport:
    epochs: list[str]
    tasks: list[str]
    series: dict[str, list[float | None]]
    deltas: dict[str, list[float | None]]
    increasing: dict[str, bool]
    failures: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"epochs": self.epochs, "tasks": self.tasks, "series": self.series,
                "deltas": self.deltas, "increasing": self.increasing, "failures": self.failures}

    def table(self) -> str:
        head = max([len(t) for t in self.tasks] + [4])
        lines = [f"{'task':<{head}}" + "".join(f" {e:>8}" for e in self.epochs) + "  increasing"]
        for t in self.tasks:
            vals = "".join(f" {'fail':>8}" if v is None else f" {v:>8.2f}" for v in self.series[t])
            lines.append(f"{t:<{head}}{vals}  {'yes' if self.increasing[t] else 'no'}")
        return "\n".join(lines) + "\n"


def diagnose_trajectory(snapshots: Sequence[Snapshot], tasks: Sequence[ProbingDataset],
                        cfg: ProbeConfig) -> TrajectoryReport:
    """Probe every task at every snapshot; report test-accuracy series and consecutive deltas."""
    if len(snapshots) < 2:
        raise InsufficientData(len(snapshots), 2, "snapshots")
    widths = {s.width() for s in snapshots}
    if len(widths) != 1:
        raise DimensionMismatch(f"snapshots disagree on dimensionality: {sorted(widths)}")
    names = [t.task for t in tasks]
    series = {n: [] for n in names}
    failures = []
    for snap in snapshots:
        for ds in tasks:
            try:
                if isinstance(snap.vectors, EmbeddingTable):
                    rep = train_probe(ds, snap.vectors, cfg, embedding=str(snap.epoch))
                else:
                    rep = train_probe(ds, None, cfg, instance_vectors=snap.vectors[ds.task],
                                      embedding=str(snap.epoch))
                series[ds.task].append(rep.test_accuracy)
            except (ProbingError, KeyError) as exc:
                series[ds.task].append(None)
                failures.append({"epoch": str(snap.epoch), "task": ds.task,
                                 "error": type(exc).__name__, "message": str(exc)})
    deltas, increasing = {}, {}
    for n in names:
        s = series[n]
        deltas[n] = [None if a is None or b is None else b - a for a, b in zip(s, s[1:])]
        increasing[n] = all(d is not None and d > 0 for d in deltas[n])
    return TrajectoryReport([str(s.epoch) for s in snapshots], names, series, deltas, increasing, failures)


# ---------------------------------------------------------------------------
# OOV


def oov_rate(data: ProbingDataset | Iterable[AnnotatedToken], vocab) -> dict[str, float]:
    """Percentage of word slots missing from ``vocab`` per split (``all`` for a token corpus).

    ``vocab`` may be any container, including an EmbeddingTable (which applies its own casing).
    """
    if isinstance(data, ProbingDataset):
        groups = {s: [w for inst in data.splits[s] for w in inst.item.words] for s in SPLITS}
    else:
        groups = {"all": [t.form for t in data]}
    out = {}
    for name, words in groups.items():
        missing = sum(1 for w in words if w not in vocab)
        out[name] = round(100.0 * missing / len(words), 2) if words else 0.0
    return out
