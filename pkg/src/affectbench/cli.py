"""Command-line entry point: ``affectbench <command> --config run.yaml``.

Commands share one YAML run configuration; ``--seed``, ``--workers`` and
``--out`` override its keys. Exit codes: 0 success, 1 configuration error,
2 input error, 3 empty pipeline stage, 4 every benchmark cell failed.
"""
from __future__ import annotations

import argparse
import dataclasses
import datetime as _dt
import json
import logging
import sys
import traceback
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .artifacts import (ArtifactReport, QualityRow, artifact_report, detect_eda_artifacts, detect_ppg_artifacts,
                        format_quality_table, RuleBasedEDADetector, RuleBasedPPGDetector)
from .core import CohortDimension, IngestError, Modality, Task, cohort_groups, validate_corpus
from .evaluation import (cross_cohort_eval, format_best_model_table, format_cohort_matrix, format_ranking_table,
                         format_results_table, lodo_eval, plot_rankings, rank_results, read_results,
                         run_benchmark, write_results)
from .ingest import UnmappedTaskError
from .models import ModelSpec
from .pipeline import (extract_feature_tables, ingest, label_counts, load_dataset, segments_from_manifest,
                       write_manifest, zscore_records)
from .preprocess import FeatureTable, shuffle_labels
from .synth import SynthSpec, generate_corpus, multi_dataset_specs, write_corpus

log = logging.getLogger("affectbench")

EXIT_OK, EXIT_CONFIG, EXIT_INPUT, EXIT_EMPTY, EXIT_ALL_FAILED = 0, 1, 2, 3, 4

MANIFEST = "manifest.json"
RESULTS = "results.json"
CROSS_RESULTS = "cross_results.json"
RUN_METADATA = "run_metadata.json"


class ConfigError(Exception):
    pass


class InputError(Exception):
    pass


class EmptyStageError(Exception):
    pass


class AllCellsFailed(Exception):
    pass


@dataclass
class RunConfig:
    datasets: list = field(default_factory=list)
    modalities: list = field(default_factory=lambda: ["eda", "ppg", "combined"])
    tasks: list = field(default_factory=lambda: ["arousal", "valence", "quadrant"])
    models: list = field(default_factory=lambda: [{"kind": "rf"}, {"kind": "lda"}, {"kind": "mlp"}])
    protocols: list = field(default_factory=lambda: ["loso"])
    train_fractions: list = field(default_factory=list)
    rebalance: str = "paper"
    smote_denominator: str = "max"
    cohort_dimensions: list = field(default_factory=list)
    lodo: bool = True
    artifacts: str = "report"
    signal_normalization: str = "none"
    controls: list = field(default_factory=list)
    plots: bool = False
    out: str = "affectbench_out"
    seed: int = 42
    workers: int = 1
    synth: object = None
    base_dir: str = "."

    @classmethod
    def load(cls, path: str | None, overrides: dict) -> "RunConfig":
        data = {}
        base = Path(".")
        if path:
            p = Path(path)
            if not p.is_file():
                raise ConfigError(f"config file not found: {p}")
            try:
                data = yaml.safe_load(p.read_text()) or {}
            except yaml.YAMLError as exc:
                raise ConfigError(f"{p}: invalid YAML: {exc}") from None
            if not isinstance(data, dict):
                raise ConfigError(f"{p}: top level must be a mapping")
            base = p.parent
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config key(s): {', '.join(sorted(unknown))}")
        data.update({k: v for k, v in overrides.items() if v is not None})
        cfg = cls(**data, ) if "base_dir" in data else cls(**data, base_dir=str(base))
        cfg.check()
        return cfg

    def check(self) -> None:
        try:
            for m in self.modalities:
                Modality.parse(m)
            for t in self.tasks:
                Task.parse(t)
            for d in self.cohort_dimensions:
                CohortDimension.parse(d)
            self.model_specs()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if self.rebalance not in ("paper", "oversample", "none"):
            raise ConfigError(f"rebalance must be paper, oversample or none, not {self.rebalance!r}")
        if self.smote_denominator not in ("max", "total"):
            raise ConfigError("smote_denominator must be max or total")
        if self.artifacts not in ("report", "exclude"):
            raise ConfigError("artifacts must be report or exclude")
        if self.signal_normalization not in ("none", "zscore"):
            raise ConfigError("signal_normalization must be none or zscore")
        for p in self.protocols:
            if p not in ("loso", "split_swap"):
                raise ConfigError(f"unknown protocol {p!r}")
        for f in self.train_fractions:
            if not 0 < float(f) <= 1:
                raise ConfigError(f"train fraction {f} outside (0, 1]")
        if int(self.workers) < 1:
            raise ConfigError("workers must be >= 1")

    def model_specs(self) -> list[ModelSpec]:
        specs = []
        for m in self.models:
            m = {"kind": m} if isinstance(m, str) else dict(m)
            if "kind" not in m:
                raise ValueError("model entries need a kind")
            kind = m.pop("kind")
            seed = int(m.pop("seed", self.seed))
            specs.append(ModelSpec(kind, m, seed))
        return specs

    def dataset_entries(self) -> list:
        out = []
        for d in self.datasets:
            d = {"path": d} if isinstance(d, str) else dict(d)
            out.append({k: str(Path(self.base_dir) / v) for k, v in d.items()})
        return out

    @property
    def out_dir(self) -> Path:
        p = Path(self.out)
        return p if p.is_absolute() else Path(self.base_dir) / p


# ---------------------------------------------------------------------------
# helpers

def _need_datasets(cfg: RunConfig):
    if not cfg.datasets:
        raise ConfigError("config lists no datasets")


def _load_segments(cfg: RunConfig):
    _need_datasets(cfg)
    entries = cfg.dataset_entries()
    manifest_path = cfg.out_dir / MANIFEST
    if manifest_path.is_file():
        loaded = [load_dataset(e) for e in entries]
        records = [r for ds in loaded for r in ds.records]
        if cfg.signal_normalization == "zscore":
            records = zscore_records(records)
        segments = segments_from_manifest(json.loads(manifest_path.read_text()), records)
    else:
        segments, loaded = _ingest(cfg)
    return segments, loaded


def _ingest(cfg: RunConfig):
    entries = cfg.dataset_entries()
    segments, loaded = ingest(entries)
    if cfg.signal_normalization == "zscore":
        from .ingest import build_segments

        segments = []
        for ds in loaded:
            segments.extend(build_segments(zscore_records(ds.records), ds.annotations, ds.descriptor))
    return segments, loaded


def _feature_path(out: Path, modality: Modality) -> Path:
    return out / f"features_{modality.value}.csv"


def _load_tables(cfg: RunConfig, workers: int) -> dict:
    out = cfg.out_dir
    mods = [Modality.parse(m) for m in cfg.modalities]
    if all(_feature_path(out, m).is_file() for m in mods):
        tables = {}
        for m in mods:
            with open(_feature_path(out, m), newline="") as fh:
                tables[m] = FeatureTable.read_csv(fh)
        return tables
    return _features(cfg, workers)[0]


def _features(cfg: RunConfig, workers: int):
    segments, loaded = _load_segments(cfg)
    if not segments:
        raise EmptyStageError("no labeled segments")
    run = extract_feature_tables(segments, workers=workers, exclude_artifacts=cfg.artifacts == "exclude")
    return run.tables, run, loaded


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, sort_keys=True, indent=1) + "\n")


def _write_metadata(out: Path, command: str, cfg: RunConfig, extra: dict | None = None) -> None:
    meta_path = out / RUN_METADATA
    meta = json.loads(meta_path.read_text()) if meta_path.is_file() else {}
    meta[command] = {"finished_utc": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
                     "seed": cfg.seed, "workers": cfg.workers, **(extra or {})}
    _write_json(meta_path, meta)


# ---------------------------------------------------------------------------
# commands

def cmd_synth(cfg: RunConfig) -> int:
    out = cfg.out_dir
    raw = cfg.synth
    if raw is None or raw == "default":
        specs = [SynthSpec(seed=cfg.seed)]
    elif raw == "multi":
        specs = multi_dataset_specs(SynthSpec(n_participants=4, segments_per_quadrant=2, segment_s=90.0,
                                              seed=cfg.seed))
    else:
        raw = raw if isinstance(raw, list) else [raw]
        try:
            specs = [SynthSpec(**{"seed": cfg.seed, **{k: tuple(v) if isinstance(v, list) else v
                                                       for k, v in r.items()}}) for r in raw]
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"synth section: {exc}") from None
    data_dirs = []
    for spec in specs:
        d = write_corpus(generate_corpus(spec), out / "data" / spec.dataset_id)
        data_dirs.append(d)
        print(f"wrote {spec.dataset_id}: {spec.n_participants} participants x "
              f"{spec.segments_per_participant} segments -> {d}")
    run_cfg = {"datasets": [str(d.relative_to(out)) for d in data_dirs], "out": "run", "seed": cfg.seed,
               "controls": [{"model": "rf", "task": "arousal", "modality": "combined"}]}
    if len(specs) > 1:
        run_cfg["cohort_dimensions"] = ["setting"]
    (out / "run.yaml").write_text(yaml.safe_dump(run_cfg, sort_keys=True))
    print(f"run config: {out / 'run.yaml'}")
    return EXIT_OK


def cmd_ingest(cfg: RunConfig) -> int:
    _need_datasets(cfg)
    segments, loaded = _ingest(cfg)
    for ds in loaded:
        report = validate_corpus(ds.records, ds.descriptor)
        for v in report.violations:
            print(f"warning: {ds.descriptor.name}: {v.kind}: {v.detail}", file=sys.stderr)
        if {"non-finite sample", "empty stream", "nonpositive rate"} & set(report.kinds()):
            raise InputError(f"dataset {ds.descriptor.name} failed validation")
    if not segments:
        raise EmptyStageError("ingest produced no labeled segments")
    out = cfg.out_dir
    out.mkdir(parents=True, exist_ok=True)
    write_manifest(segments, out / MANIFEST)
    counts = {}
    for s in segments:
        counts[s.dataset_id] = counts.get(s.dataset_id, 0) + 1
    for ds, n in sorted(counts.items()):
        print(f"{ds}: {n} segments")
    print(f"manifest: {out / MANIFEST}")
    return EXIT_OK


def cmd_features(cfg: RunConfig) -> int:
    tables, run, _ = _features(cfg, int(cfg.workers))
    out = cfg.out_dir
    out.mkdir(parents=True, exist_ok=True)
    for m, table in tables.items():
        with open(_feature_path(out, m), "w", newline="") as fh:
            table.write_csv(fh)
        print(f"{m.value}: {len(table)} rows x {len(table.columns)} columns -> {_feature_path(out, m)}")
    log_entries = {m.value: {"imputed": {k: v for k, v in run.imputed[m].items() if v},
                             "flags": run.flags[m]} for m in tables}
    _write_json(out / "imputation.json", log_entries)
    n_imp = sum(v for v in run.imputed[Modality.COMBINED].values())
    print(f"imputed entries (combined): {n_imp}; details in {out / 'imputation.json'}")
    return EXIT_OK


def cmd_artifacts(cfg: RunConfig) -> int:
    segments, loaded = _load_segments(cfg)
    rows, detail = [], {}
    for ds in loaded:
        name = ds.descriptor.name
        reps: dict = {}
        for modality, fn, det in ((Modality.EDA, detect_eda_artifacts, RuleBasedEDADetector()),
                                  (Modality.PPG, detect_ppg_artifacts, RuleBasedPPGDetector())):
            recs = [r for r in ds.records if r.modality is modality]
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                series = [fn(r, det) for r in recs]
            try:
                reps[modality] = artifact_report(series) if series else None
            except ValueError:
                reps[modality] = None
        counts = label_counts([s for s in segments if s.dataset_id == name])
        rows.append(QualityRow(name, tuple(counts["arousal"]), tuple(counts["valence"]),
                               tuple(counts["quadrant"]), reps[Modality.EDA], reps[Modality.PPG]))
        detail[name] = {"counts": counts, **{
            m.value: None if r is None else {
                "mean_percent": r.percent[0], "std_percent": r.percent[1],
                "participants": {"/".join(k): 100.0 * f for k, f in sorted(r.fractions.items())}}
            for m, r in reps.items()}}
    if not rows:
        raise EmptyStageError("no datasets to screen")
    out = cfg.out_dir
    out.mkdir(parents=True, exist_ok=True)
    table = format_quality_table(rows)
    (out / "quality.md").write_text(table)
    _write_json(out / "quality.json", detail)
    print(table, end="")
    return EXIT_OK


def _run_cell(job):
    kind, table, args = job
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            if kind == "bench":
                return [run_benchmark(table, **args)], None
            if kind == "cross":
                return [cross_cohort_eval(table, **args)], None
            return lodo_eval(table, **args), None
    except Exception as exc:  # a failed cell is recorded, never fatal
        label = {k: (v.label if hasattr(v, "label") else str(v)) for k, v in args.items()
                 if k in ("task", "protocol", "modality", "train_group", "test_group", "group")}
        label["model"] = args["model_spec"].name
        return [], {"job": kind, **label, "error": f"{type(exc).__name__}: {exc}",
                    "trace": traceback.format_exc(limit=3)}


def _execute(jobs, workers: int):
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_run_cell, jobs))
    else:
        outcomes = [_run_cell(j) for j in jobs]
    results, failures = [], []
    for res, fail in outcomes:
        results.extend(res)
        if fail:
            failures.append(fail)
    return results, failures


def _bench_jobs(cfg: RunConfig, tables: dict) -> list:
    jobs = []
    specs = cfg.model_specs()
    common = {"rebalance_policy": cfg.rebalance, "seed": int(cfg.seed), "smote_denominator": cfg.smote_denominator}
    for mod_name in cfg.modalities:
        m = Modality.parse(mod_name)
        table = tables[m]
        for ds in sorted(set(table.dataset_ids.tolist())):
            sub = table.take(np.flatnonzero(table.dataset_ids == ds))
            for task in cfg.tasks:
                for spec in specs:
                    for protocol in cfg.protocols:
                        fractions = [None] + [float(f) for f in cfg.train_fractions]
                        for frac in fractions:
                            jobs.append(("bench", sub, {"task": task, "model_spec": spec, "protocol": protocol,
                                                        "modality": m.value, "train_fraction": frac, **common}))
            for c in cfg.controls:
                if Modality.parse(c.get("modality", "combined")) is not m:
                    continue
                spec = next((s for s in specs if s.kind == str(c.get("model", "rf")).lower()), None)
                if spec is None:
                    spec = ModelSpec(c.get("model", "rf"), {}, int(cfg.seed))
                shuffled = shuffle_labels(sub, int(cfg.seed))
                jobs.append(("bench", shuffled, {"task": c.get("task", "arousal"), "model_spec": spec,
                                                 "protocol": c.get("protocol", "loso"), "modality": m.value,
                                                 "control": "shuffled_labels", **common}))
    return jobs


def _write_reports(out: Path, results, cfg: RunConfig, name: str = "rankings.md") -> None:
    tables = rank_results(results)
    parts = ["# Benchmark rankings", ""]
    for task in cfg.tasks:
        block = format_best_model_table(tables, Task.parse(task).value)
        if block:
            parts += [block]
    parts += [format_ranking_table(t) for t in tables]
    parts += ["## All cells", "", format_results_table(results)]
    (out / name).write_text("\n".join(parts))
    if cfg.plots:
        try:
            plot_rankings(tables, out / "plots")
        except ImportError:
            print("warning: matplotlib not installed; plots skipped", file=sys.stderr)


def cmd_bench(cfg: RunConfig) -> int:
    tables = _load_tables(cfg, int(cfg.workers))
    jobs = _bench_jobs(cfg, tables)
    if not jobs:
        raise EmptyStageError("benchmark grid is empty")
    results, failures = _execute(jobs, int(cfg.workers))
    out = cfg.out_dir
    out.mkdir(parents=True, exist_ok=True)
    write_results(results, out / RESULTS)
    _write_json(out / "failures.json", failures)
    _write_reports(out, results, cfg)
    _write_metadata(out, "bench", cfg, {"cells": len(jobs), "failed": len(failures)})
    print(f"{len(results)} cells ok, {len(failures)} failed -> {out / RESULTS}")
    if not results:
        raise AllCellsFailed("every benchmark cell failed")
    return EXIT_OK


def cmd_cross(cfg: RunConfig) -> int:
    if not cfg.cohort_dimensions:
        raise ConfigError("cross needs cohort_dimensions in the config")
    tables = _load_tables(cfg, int(cfg.workers))
    _need_datasets(cfg)
    descriptors = [load_dataset(e).descriptor for e in cfg.dataset_entries()]
    specs = cfg.model_specs()
    common = {"rebalance_policy": cfg.rebalance, "seed": int(cfg.seed), "smote_denominator": cfg.smote_denominator}
    jobs = []
    for dim in cfg.cohort_dimensions:
        groups = cohort_groups(descriptors, dim)
        for mod_name in cfg.modalities:
            m = Modality.parse(mod_name)
            for task in cfg.tasks:
                for spec in specs:
                    for a in groups:
                        for b in groups:
                            if a != b:
                                jobs.append(("cross", tables[m], {"train_group": a, "test_group": b, "task": task,
                                                                  "model_spec": spec, "modality": m.value,
                                                                  **common}))
                        if cfg.lodo and len(a.datasets) >= 2:
                            jobs.append(("lodo", tables[m], {"group": a, "task": task, "model_spec": spec,
                                                             "modality": m.value, **common}))
    if not jobs:
        raise EmptyStageError("no cohort pairs: every dimension has fewer than 2 groups")
    results, failures = _execute(jobs, int(cfg.workers))
    out = cfg.out_dir
    out.mkdir(parents=True, exist_ok=True)
    write_results(results, out / CROSS_RESULTS)
    _write_json(out / "cross_failures.json", failures)
    (out / "cohort_tables.md").write_text("# Cohort transfer\n\n" + format_cohort_matrix(results))
    _write_metadata(out, "cross", cfg, {"cells": len(jobs), "failed": len(failures)})
    print(f"{len(results)} cohort results, {len(failures)} failed -> {out / CROSS_RESULTS}")
    if not results:
        raise AllCellsFailed("every cohort cell failed")
    return EXIT_OK


def cmd_report(cfg: RunConfig) -> int:
    out = cfg.out_dir
    path = out / RESULTS
    if not path.is_file():
        raise InputError(f"results store not found: {path} (run bench first)")
    results = read_results(path)
    if not results:
        raise EmptyStageError("results store is empty")
    _write_reports(out, results, cfg)
    if (out / CROSS_RESULTS).is_file():
        cross = read_results(out / CROSS_RESULTS)
        (out / "cohort_tables.md").write_text("# Cohort transfer\n\n" + format_cohort_matrix(cross))
    print(f"rankings: {out / 'rankings.md'}")
    return EXIT_OK


COMMANDS = {
    "synth": (cmd_synth, "write a synthetic corpus and a run config for it"),
    "ingest": (cmd_ingest, "parse inputs, bin labels, write the segment manifest"),
    "features": (cmd_features, "extract, impute and normalize feature tables"),
    "artifacts": (cmd_artifacts, "signal-quality report with class counts"),
    "bench": (cmd_bench, "run the dataset x modality x task x model grid"),
    "cross": (cmd_cross, "cohort transfer and leave-one-dataset-out runs"),
    "report": (cmd_report, "rebuild ranking tables and plots from stored results"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="affectbench", description=__doc__.splitlines()[0])
    parent = argparse.ArgumentParser(add_help=False)
    parent.add_argument("--config", help="YAML run configuration")
    parent.add_argument("--seed", type=int, help="global seed (default 42)")
    parent.add_argument("--workers", type=int, help="parallel worker processes")
    parent.add_argument("--out", help="output directory")
    parent.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        sub.add_parser(name, parents=[parent], help=help_text)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    overrides = {"seed": args.seed, "workers": args.workers}
    if args.out is not None:
        overrides["out"] = str(Path(args.out).resolve())
    try:
        cfg = RunConfig.load(args.config, overrides)
        return COMMANDS[args.command][0](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (InputError, IngestError, UnmappedTaskError, FileNotFoundError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except EmptyStageError as exc:
        print(f"empty stage: {exc}", file=sys.stderr)
        return EXIT_EMPTY
    except AllCellsFailed as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ALL_FAILED


if __name__ == "__main__":
    sys.exit(main())
