"""Command-line entry point: fixture, generate, probe, correlate, diagnose, oov.

Exit status is 0 unless a resource cannot be read (1) or the configuration is
invalid (2).  Individual tasks or cells that fail are recorded in the outputs
and never change the exit status.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path

import yaml

from . import analysis, pseudogen, taskgen
from .errors import FormatError, ProbingError
from .ingest import (
    load_annotated_treebank,
    load_embeddings,
    load_frequency_list,
    load_syllabified_lexicon,
    load_unimorph,
)
from .probe import ProbeConfig, ProbeReport, load_instance_vectors, train_probe
from .schema import CORE_DIMENSIONS, Dimension, LanguageConfig, load_catalog

log = logging.getLogger("morphprobe")

ENV_DATA = "MORPHPROBE_DATA"
RESOURCE_FILES = {
    "unimorph": "unimorph.tsv",
    "freq": "freq.txt",
    "lexicon": "lexicon.tsv",
    "treebank": "treebank.txt",
    "downstream": "downstream.tsv",
}
PAIR_TASKS = ("SameFeat", "OddFeat")
EXTRA_TASKS = ("TagCount", "CharacterBin") + PAIR_TASKS + ("Pseudo",)


class ConfigError(Exception):
    pass


# ---------------------------------------------------------------------------
# configuration


@dataclass
class RunConfig:
    languages: list[str]
    seed: int | None
    out: Path
    tasks: list[str] | None = None
    resources: dict[str, dict[str, Path | None]] = field(default_factory=dict)
    language_overrides: dict = field(default_factory=dict)
    probe_overrides: dict = field(default_factory=dict)
    threads: int = 1

    def language_config(self, lang: str) -> LanguageConfig:
        try:
            return LanguageConfig.from_snapshot({"language": lang, "seed": self.seed, **self.language_overrides})
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"language config: {exc}") from None

    def probe_config(self) -> ProbeConfig:
        try:
            return ProbeConfig(**{"seed": self.seed, **self.probe_overrides})
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"probe config: {exc}") from None

    def snapshot(self) -> dict:
        return {
            "languages": self.languages,
            "seed": self.seed,
            "tasks": self.tasks,
            "resources": {l: {k: str(v) if v else None for k, v in r.items()} for l, r in self.resources.items()},
            "language_overrides": self.language_overrides,
            "probe_overrides": self.probe_overrides,
        }


_LANG_KEYS = {f.name for f in fields(LanguageConfig)} - {"language", "seed"}
_PROBE_KEYS = {f.name for f in fields(ProbeConfig)} - {"seed"}


def _read_config_file(path) -> tuple[dict, dict]:
    with open(path, encoding="utf-8") as fh:
        doc = yaml.safe_load(fh) or {}
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: expected a mapping")
    doc = dict(doc)
    probe = doc.pop("probe", {}) or {}
    lang = doc.pop("language", {}) or {}
    lang.update(doc)
    unknown = (set(lang) - _LANG_KEYS) | {f"probe.{k}" for k in set(probe) - _PROBE_KEYS}
    if unknown:
        raise ConfigError(f"{path}: unknown keys {sorted(unknown)}")
    return lang, probe


def _resolve_resource(args, lang: str, name: str, required: bool) -> Path | None:
    explicit = getattr(args, name, None)
    if explicit:
        p = Path(explicit)
        if not p.exists():
            raise ConfigError(f"{name}: {p} does not exist")
        return p
    root = args.data or os.environ.get(ENV_DATA)
    if root:
        for cand in (Path(root) / lang / RESOURCE_FILES[name], Path(root) / RESOURCE_FILES[name]):
            if cand.exists():
                return cand
    if required:
        raise ConfigError(f"no {name} resource for {lang!r}; pass --{name} or set --data / ${ENV_DATA}")
    return None


def _split_list(raw: str | None) -> list[str] | None:
    if not raw or raw == "all":
        return None
    return [t.strip() for t in raw.split(",") if t.strip()]


def build_run_config(args, resources=(), required=()) -> RunConfig:
    lang_over, probe_over = {}, {}
    if getattr(args, "config", None):
        lang_over, probe_over = _read_config_file(args.config)
    sizes = [getattr(args, s, None) for s in ("train", "dev", "test")]
    if any(s is not None for s in sizes):
        if not all(s is not None for s in sizes):
            raise ConfigError("--train, --dev and --test must be given together")
        lang_over["split_sizes"] = sizes
    if getattr(args, "min_samples", None) is not None:
        lang_over["min_samples"] = args.min_samples
    if getattr(args, "epochs", None) is not None:
        probe_over["epochs"] = args.epochs
        probe_over.setdefault("patience", min(ProbeConfig.patience, args.epochs))
    languages = _split_list(getattr(args, "lang", None)) or []
    res = {}
    for lang in languages or [""]:
        res[lang] = {n: _resolve_resource(args, lang, n, n in required) for n in resources}
    cfg = RunConfig(
        languages=languages,
        seed=getattr(args, "seed", None),
        out=Path(args.out),
        tasks=_split_list(getattr(args, "tasks", None)),
        resources=res,
        language_overrides=lang_over,
        probe_overrides=probe_over,
        threads=max(1, getattr(args, "threads", None) or os.cpu_count() or 1),
    )
    return cfg


def _write_json(path: Path, doc) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(doc, fh, ensure_ascii=False, indent=1, sort_keys=True)
        fh.write("\n")


def _write_tsv(path: Path, header, rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\t".join(header) + "\n")
        for r in rows:
            fh.write("\t".join("" if r.get(h) is None else str(r.get(h)) for h in header) + "\n")


def _text_table(header, rows) -> str:
    cells = [[str(h) for h in header]] + [["" if r.get(h) is None else str(r.get(h)) for h in header] for r in rows]
    widths = [max(len(row[i]) for row in cells) for i in range(len(header))]
    return "\n".join("  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip() for row in cells) + "\n"


def _map(cfg: RunConfig, fn, items):
    if cfg.threads <= 1 or len(items) <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
        return list(pool.map(fn, items))


def _require_seed(cfg: RunConfig):
    if cfg.seed is None:
        raise ConfigError("--seed is required")


# ---------------------------------------------------------------------------
# generate


def _task_plan(cfg: RunConfig, entries, tokens, lexicon) -> list[str]:
    if cfg.tasks is not None:
        return list(cfg.tasks)
    present = {v.dimension for e in entries for v in e.bundle}
    plan = [d for d in CORE_DIMENSIONS if Dimension.get(d) in present]
    plan += list(EXTRA_TASKS if lexicon is not None else EXTRA_TASKS[:-1])
    if tokens is not None:
        tok_dims = {v.dimension for t in tokens for v in t.bundle}
        plan += [taskgen.token_task_name(Dimension.get(d)) for d in CORE_DIMENSIONS
                 if d != "POS" and Dimension.get(d) in tok_dims]
    return plan


def _build_task(task, entries, freq, tokens, lexicon, grammar, lcfg):
    if task == "TagCount":
        return taskgen.generate_tagcount_task(entries, freq, lcfg)
    if task == "CharacterBin":
        return taskgen.generate_characterbin_task(entries, freq, lcfg)
    if task == "SameFeat":
        return taskgen.generate_samefeat_task(entries, lcfg)
    if task == "OddFeat":
        return taskgen.generate_oddfeat_task(entries, lcfg)
    if task == "Pseudo":
        if lexicon is None:
            raise ConfigError("Pseudo needs a syllabified lexicon (--lexicon)")
        return pseudogen.generate_pseudo_task(lexicon, grammar, lcfg)
    if task.endswith("-token"):
        if tokens is None:
            raise ConfigError(f"{task} needs an annotated treebank (--treebank)")
        return taskgen.generate_token_level_task(tokens, Dimension.get(task[:-len("-token")]), lcfg)
    if task not in CORE_DIMENSIONS:
        raise ConfigError(f"unknown task {task!r}")
    return taskgen.generate_single_feature_task(entries, Dimension.get(task), freq, lcfg)


def cmd_generate(cfg: RunConfig, catalog=None) -> dict:
    _require_seed(cfg)
    if not cfg.languages:
        raise ConfigError("--lang is required")
    manifest = {"config": cfg.snapshot(), "seed": cfg.seed, "generated": [], "skipped": []}
    for lang in cfg.languages:
        res = cfg.resources[lang]
        lcfg = cfg.language_config(lang)
        cat = catalog or load_catalog(None)
        entries, stats = load_unimorph(res["unimorph"], cat)
        freq = load_frequency_list(res["freq"], lcfg.frequency_cutoff) if res.get("freq") else None
        tokens = load_annotated_treebank(res["treebank"], cat) if res.get("treebank") else None
        lexicon = load_syllabified_lexicon(res["lexicon"]) if res.get("lexicon") else None
        grammar = pseudogen.build_grammar(lexicon) if lexicon else None
        plan = _task_plan(cfg, entries, tokens, lexicon)

        def run(task):
            try:
                return task, _build_task(task, entries, freq, tokens, lexicon, grammar, lcfg), None
            except ProbingError as exc:
                return task, None, exc

        for task, ds, exc in _map(cfg, run, plan):
            if ds is None:
                log.info("%s/%s skipped: %s", lang, task, exc)
                manifest["skipped"].append({"language": lang, "task": task,
                                            "reason": type(exc).__name__, "message": str(exc)})
                continue
            path = taskgen.write_dataset(ds, cfg.out / lang / task)
            manifest["generated"].append({"language": lang, "task": task, "path": str(path.relative_to(cfg.out)),
                                          "split_sizes": list(ds.split_sizes()), "labels": ds.label_set})
        manifest.setdefault("ingest", {})[lang] = stats.as_dict()
    _write_json(cfg.out / "manifest.json", manifest)
    return manifest


# ---------------------------------------------------------------------------
# probe


def _parse_named(values, what) -> list[tuple[str, Path]]:
    out = []
    for v in values or ():
        name, sep, path = v.partition("=")
        if not sep:
            name, path = Path(v).stem, v
        p = Path(path)
        if not p.exists():
            raise ConfigError(f"{what} {p} does not exist")
        out.append((name, p))
    names = [n for n, _ in out]
    if len(set(names)) != len(names):
        raise ConfigError(f"duplicate {what} names: {names}")
    return out


def discover_datasets(root: Path, languages=None, tasks=None) -> list[Path]:
    if not Path(root).is_dir():
        raise ConfigError(f"dataset directory {root} does not exist")
    found = []
    for meta in sorted(Path(root).glob("*/*/meta.json")):
        d = meta.parent
        if languages and d.parent.name not in languages:
            continue
        if tasks and d.name not in tasks:
            continue
        found.append(d)
    return found


def _failure(lang, task, emb, exc) -> dict:
    return {"language": lang, "task": task, "embedding": emb, "status": "failed",
            "error": type(exc).__name__, "message": str(exc)}


def cmd_probe(cfg: RunConfig, datasets_dir: Path, embeddings, instance_vectors=()) -> dict:
    _require_seed(cfg)
    pcfg = cfg.probe_config()
    dirs = discover_datasets(datasets_dir, cfg.languages, cfg.tasks)
    datasets, failures = [], []
    for d in dirs:
        try:
            datasets.append(taskgen.read_dataset(d))
        except ProbingError as exc:
            failures.append(_failure(d.parent.name, d.name, None, exc))

    tables = {}
    for name, path in embeddings:
        try:
            tables[name] = load_embeddings(path, seed=cfg.seed)
        except (FormatError, ValueError) as exc:
            tables[name] = exc
    jobs = []
    for name, _ in embeddings:
        for ds in datasets:
            jobs.append(("table", name, ds))
    for name, root in instance_vectors:
        for ds in datasets:
            jobs.append(("instance", name, ds, root))

    def run(job):
        kind, name, ds = job[:3]
        try:
            if kind == "table":
                table = tables[name]
                if isinstance(table, Exception):
                    raise table
                return train_probe(ds, table, pcfg, embedding=name)
            root = Path(job[3]) / ds.language / ds.task
            if not root.is_dir():
                root = Path(job[3]) / ds.task
            vecs = {s: load_instance_vectors(root / f"{s}.vec", len(ds.splits[s])) for s in taskgen.SPLITS}
            return train_probe(ds, None, pcfg, instance_vectors=vecs, embedding=name)
        except (ProbingError, ValueError, OSError) as exc:
            return _failure(ds.language, ds.task, name, exc)

    results = _map(cfg, run, jobs)
    reports = [r for r in results if isinstance(r, ProbeReport)]
    failures += [r for r in results if not isinstance(r, ProbeReport)]
    rows = [dict(r.row(), status="ok") for r in reports] + failures
    doc = {"config": cfg.snapshot(), "probe_config": pcfg.__dict__, "seed": cfg.seed,
           "reports": [r.to_dict() for r in reports], "failures": failures}
    header = list(ProbeReport.ROW_FIELDS) + ["status"]
    cfg.out.mkdir(parents=True, exist_ok=True)
    _write_json(cfg.out / "report.json", doc)
    _write_tsv(cfg.out / "report.tsv", header, rows)
    (cfg.out / "report.txt").write_text(_text_table(header, rows), encoding="utf-8")
    return doc


# ---------------------------------------------------------------------------
# correlate / diagnose / oov


def probe_scores(report_doc: dict, metric: str = "test_accuracy") -> dict[str, dict[str, float]]:
    langs = {r["language"] for r in report_doc["reports"]}
    out: dict[str, dict[str, float]] = {}
    for r in report_doc["reports"]:
        key = r["task"] if len(langs) == 1 else f"{r['language']}/{r['task']}"
        out.setdefault(key, {})[r["embedding"]] = r[metric]
    for f in report_doc.get("failures", []):
        if f.get("embedding") is None:
            continue
        key = f["task"] if len(langs) <= 1 else f"{f['language']}/{f['task']}"
        out.setdefault(key, {})[f["embedding"]] = None
    return out


def cmd_correlate(cfg: RunConfig, report_path: Path, downstream_path: Path,
                  thresholds=analysis.DEFAULT_THRESHOLDS, metric="test_accuracy") -> dict:
    with open(report_path, encoding="utf-8") as fh:
        report_doc = json.load(fh)
    probe = probe_scores(report_doc, metric)
    down = analysis.read_downstream(downstream_path)
    rep = analysis.correlation_matrix(probe, down, thresholds)
    doc = {"config": cfg.snapshot(), "seed": report_doc.get("seed"), "metric": metric,
           "inputs": {"report": str(report_path), "downstream": str(downstream_path)}, **rep.to_dict()}
    cfg.out.mkdir(parents=True, exist_ok=True)
    _write_json(cfg.out / "correlation.json", doc)
    rows = [{**{k: c[k] for k in ("probe_task", "downstream_task", "n", "rho", "p_value", "exact", "undefined")},
             **c["flags"]} for c in doc["cells"]]
    header = ["probe_task", "downstream_task", "n", "rho", "p_value", "exact", "undefined"] + \
        [f"p<={t:g}" for t in rep.thresholds]
    _write_tsv(cfg.out / "correlation.tsv", header, rows)
    (cfg.out / "correlation.txt").write_text(rep.table(), encoding="utf-8")
    (cfg.out / "correlation_filtered.txt").write_text(rep.table(max(rep.thresholds)), encoding="utf-8")
    return doc


def cmd_diagnose(cfg: RunConfig, datasets_dir: Path, snapshots) -> dict:
    _require_seed(cfg)
    pcfg = cfg.probe_config()
    datasets = [taskgen.read_dataset(d) for d in discover_datasets(datasets_dir, cfg.languages, cfg.tasks)]
    if not datasets:
        raise ConfigError(f"no datasets under {datasets_dir}")
    snaps = [analysis.Snapshot(name, load_embeddings(path, seed=cfg.seed)) for name, path in snapshots]
    try:
        rep = analysis.diagnose_trajectory(snaps, datasets, pcfg)
    except ProbingError as exc:
        raise ConfigError(f"diagnose: {exc}") from None
    doc = {"config": cfg.snapshot(), "probe_config": pcfg.__dict__, "seed": cfg.seed, **rep.to_dict()}
    cfg.out.mkdir(parents=True, exist_ok=True)
    _write_json(cfg.out / "trajectory.json", doc)
    header = ["task"] + rep.epochs + ["increasing"]
    rows = [{"task": t, **dict(zip(rep.epochs, rep.series[t])), "increasing": rep.increasing[t]} for t in rep.tasks]
    _write_tsv(cfg.out / "trajectory.tsv", header, rows)
    (cfg.out / "trajectory.txt").write_text(rep.table(), encoding="utf-8")
    return doc


def cmd_oov(cfg: RunConfig, datasets_dir: Path, embeddings) -> dict:
    datasets = [taskgen.read_dataset(d) for d in discover_datasets(datasets_dir, cfg.languages, cfg.tasks)]
    rows = []
    for name, path in embeddings:
        table = load_embeddings(path)
        for ds in datasets:
            rates = analysis.oov_rate(ds, table)
            rows.append({"language": ds.language, "task": ds.task, "embedding": name, **rates})
    doc = {"config": cfg.snapshot(), "rows": rows}
    cfg.out.mkdir(parents=True, exist_ok=True)
    _write_json(cfg.out / "oov.json", doc)
    header = ["language", "task", "embedding", *taskgen.SPLITS]
    _write_tsv(cfg.out / "oov.tsv", header, rows)
    (cfg.out / "oov.txt").write_text(_text_table(header, rows), encoding="utf-8")
    return doc


# ---------------------------------------------------------------------------
# argument parsing


def _common(p, seed=True):
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--lang", help="comma-separated language codes")
    p.add_argument("--tasks", help="comma-separated task names (default: all)")
    p.add_argument("--config", help="YAML file with language and probe overrides")
    p.add_argument("--threads", type=int, help="worker threads (default: CPU count)")
    p.add_argument("--data", help=f"resource root (default: ${ENV_DATA})")
    if seed:
        p.add_argument("--seed", type=int, help="random seed (required)")


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="morphprobe", description="Morphological probing toolkit.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fixture", help="write the synthetic desk-scale resources")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("generate", help="build probing datasets")
    _common(p)
    for name in RESOURCE_FILES:
        if name != "downstream":
            p.add_argument(f"--{name}", help=f"{name} resource path")
    p.add_argument("--catalog", help="YAML tag-to-dimension catalog extension")
    p.add_argument("--train", type=int)
    p.add_argument("--dev", type=int)
    p.add_argument("--test", type=int)
    p.add_argument("--min-samples", type=int)

    p = sub.add_parser("probe", help="train diagnostic classifiers")
    _common(p)
    p.add_argument("--datasets", required=True, help="output directory of `generate`")
    p.add_argument("--emb", action="append", default=[], help="[NAME=]PATH of a word-vector file")
    p.add_argument("--instance-vectors", action="append", default=[],
                   help="NAME=DIR holding <lang>/<task>/{train,dev,test}.vec")
    p.add_argument("--epochs", type=int)

    p = sub.add_parser("correlate", help="Spearman correlation with downstream scores")
    _common(p, seed=False)
    p.add_argument("--report", required=True, help="report.json written by `probe`")
    p.add_argument("--downstream", help="embedding<TAB>task<TAB>score file")
    p.add_argument("--thresholds", default="0.1,0.2")
    p.add_argument("--metric", default="test_accuracy", choices=("test_accuracy", "dev_accuracy"))

    p = sub.add_parser("diagnose", help="probe saved training snapshots")
    _common(p)
    p.add_argument("--datasets", required=True)
    p.add_argument("--snapshot", action="append", default=[], help="EPOCH=PATH word-vector file")
    p.add_argument("--epochs", type=int)

    p = sub.add_parser("oov", help="OOV rate per split")
    _common(p, seed=False)
    p.add_argument("--datasets", required=True)
    p.add_argument("--emb", action="append", default=[])
    return parser


def run(argv=None) -> int:
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        if args.command == "fixture":
            from .fixture import build_fixture

            paths = build_fixture(args.out, args.seed)
            for k, v in sorted(paths.items()):
                print(f"{k}\t{v}")
            return 0
        if args.command == "generate":
            cfg = build_run_config(args, resources=("unimorph", "freq", "lexicon", "treebank"),
                                   required=("unimorph",))
            catalog = load_catalog(args.catalog) if args.catalog else None
            m = cmd_generate(cfg, catalog)
            print(f"generated {len(m['generated'])} datasets, skipped {len(m['skipped'])}")
        elif args.command == "probe":
            cfg = build_run_config(args)
            embs = _parse_named(args.emb, "embedding")
            inst = _parse_named(args.instance_vectors, "instance-vector directory")
            if not embs and not inst:
                raise ConfigError("give at least one --emb or --instance-vectors")
            doc = cmd_probe(cfg, Path(args.datasets), embs, inst)
            print(f"{len(doc['reports'])} probes, {len(doc['failures'])} failures")
        elif args.command == "correlate":
            cfg = build_run_config(args, resources=("downstream",))
            downstream = cfg.resources[(cfg.languages or [""])[0]]["downstream"]
            if downstream is None:
                raise ConfigError("--downstream is required")
            try:
                thresholds = tuple(float(t) for t in args.thresholds.split(","))
            except ValueError:
                raise ConfigError(f"bad --thresholds {args.thresholds!r}") from None
            if not Path(args.report).exists():
                raise ConfigError(f"report {args.report} does not exist")
            cmd_correlate(cfg, Path(args.report), downstream, thresholds, args.metric)
        elif args.command == "diagnose":
            cfg = build_run_config(args)
            snaps = _parse_named(args.snapshot, "snapshot")
            cmd_diagnose(cfg, Path(args.datasets), snaps)
        elif args.command == "oov":
            cfg = build_run_config(args)
            cmd_oov(cfg, Path(args.datasets), _parse_named(args.emb, "embedding"))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (OSError, FormatError, ProbingError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
