"""Glue between stages: dataset directories, segment manifests, feature tables."""
from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .artifacts import RuleBasedEDADetector, detect_eda_artifacts, detect_ppg_artifacts
from .core import (AROUSAL_CODES, QUADRANT_CODES, VALENCE_CODES, Arousal, DatasetDescriptor, LabelSet,
                   Modality, Provenance, ProvenanceKind, RawSignalRecord, Segment, SignalSlice, Valence)
from .features import DEFAULT_REGISTRY, FeatureRegistry, FeatureVector, combine_features, eda_features, ppg_features
from .ingest import build_segments, load_descriptor, parse_annotation_file, parse_signal_file
from .preprocess import FeatureTable, impute_per_participant, minmax_normalize, zscore_normalize

SIGNAL_FILES = {Modality.EDA: "eda.csv", Modality.PPG: "ppg.csv"}
ANNOTATION_FILE = "annotations.csv"
DESCRIPTOR_FILE = "descriptor.yaml"
MANIFEST_VERSION = 1


@dataclass
class LoadedDataset:
    descriptor: DatasetDescriptor
    records: list
    annotations: list
    paths: dict = field(default_factory=dict)


def dataset_paths(entry) -> dict:
    """Resolve a dataset entry (a directory or a mapping of file paths)."""
    if isinstance(entry, (str, Path)):
        entry = {"path": entry}
    root = Path(entry.get("path", "."))
    return {
        "descriptor": Path(entry.get("descriptor", root / DESCRIPTOR_FILE)),
        "annotations": Path(entry.get("annotations", root / ANNOTATION_FILE)),
        Modality.EDA: Path(entry.get("eda", root / SIGNAL_FILES[Modality.EDA])),
        Modality.PPG: Path(entry.get("ppg", root / SIGNAL_FILES[Modality.PPG])),
    }


def load_dataset(entry) -> LoadedDataset:
    """Parse descriptor, signal files and annotations of one dataset.

    A missing signal file for one modality is allowed; a missing descriptor
    or annotation file raises ``FileNotFoundError``.
    """
    paths = dataset_paths(entry)
    for key in ("descriptor", "annotations"):
        if not paths[key].is_file():
            raise FileNotFoundError(f"{key} file not found: {paths[key]}")
    descriptor = load_descriptor(paths["descriptor"])
    records = []
    for modality in (Modality.EDA, Modality.PPG):
        p = paths[modality]
        if p.is_file():
            with open(p, newline="") as fh:
                records.extend(parse_signal_file(fh, modality, descriptor, path=str(p)))
    if not records:
        raise FileNotFoundError(f"no signal files for dataset {descriptor.name!r}")
    with open(paths["annotations"], newline="") as fh:
        annotations = parse_annotation_file(fh, path=str(paths["annotations"]))
    return LoadedDataset(descriptor, records, annotations, paths)


# ---------------------------------------------------------------------------
# manifest

def manifest_of(segments) -> dict:
    """JSON-able description of segments by slice indices (no samples)."""
    rows = []
    for s in segments:
        rows.append({
            "segment_id": s.segment_id,
            "dataset_id": s.dataset_id,
            "participant_id": s.participant_id,
            "provenance": {"kind": s.provenance.kind.value, "value": s.provenance.value},
            "labels": {"arousal": s.labels.arousal.value, "valence": s.labels.valence.value,
                       "quadrant": str(s.labels.quadrant)},
            "slices": {m.value: {"recording_id": sl.recording_id, "start_sample": int(sl.start_sample),
                                 "n_samples": int(len(sl.samples)), "rate_hz": float(sl.sampling_rate_hz)}
                       for m, sl in sorted(s.signals.items(), key=lambda kv: kv[0].value)},
        })
    return {"version": MANIFEST_VERSION, "segments": rows}


def write_manifest(segments, path) -> None:
    Path(path).write_text(json.dumps(manifest_of(segments), sort_keys=True, indent=1) + "\n")


def segments_from_manifest(manifest: dict, records) -> list[Segment]:
    """Rebuild segments by slicing freshly parsed records."""
    if manifest.get("version") != MANIFEST_VERSION:
        raise ValueError("unsupported manifest version")
    index = {(r.dataset_id, r.participant_id, r.modality.value, r.recording_id): r for r in records}
    out = []
    for row in manifest["segments"]:
        signals = {}
        for mod, sl in row["slices"].items():
            key = (row["dataset_id"], row["participant_id"], mod, sl["recording_id"])
            if key not in index:
                raise KeyError(f"manifest references missing recording {'/'.join(key)}")
            rec = index[key]
            i0 = sl["start_sample"]
            samples = rec.samples[i0:i0 + sl["n_samples"]]
            if len(samples) != sl["n_samples"]:
                raise ValueError(f"segment {row['segment_id']}: recording shorter than the manifest says")
            signals[Modality.parse(mod)] = SignalSlice(samples, rec.sampling_rate_hz, i0, rec.recording_id)
        prov = row["provenance"]
        labels = LabelSet(Arousal.parse(row["labels"]["arousal"]), Valence.parse(row["labels"]["valence"]))
        out.append(Segment(row["segment_id"], row["dataset_id"], row["participant_id"], signals,
                           Provenance(ProvenanceKind.parse(prov["kind"]), prov["value"]), labels))
    return out


def ingest(entries) -> tuple[list[Segment], list[LoadedDataset]]:
    loaded = [load_dataset(e) for e in entries]
    segments = []
    for ds in loaded:
        segments.extend(build_segments(ds.records, ds.annotations, ds.descriptor))
    return segments, loaded


# ---------------------------------------------------------------------------
# features

@dataclass
class FeatureRun:
    tables: dict
    imputed: dict
    flags: dict


def _drop_flagged(sl: SignalSlice, modality: Modality, dataset_id: str, pid: str):
    """Samples of a slice outside artifact-flagged 60-sample windows."""
    rec = RawSignalRecord(dataset_id, pid, modality, sl.sampling_rate_hz, sl.samples)
    x = np.asarray(sl.samples, dtype=float)
    if modality is Modality.EDA:
        flags = detect_eda_artifacts(rec, RuleBasedEDADetector()).flags
        span = 60 * sl.sampling_rate_hz / 4.0
    else:
        flags = detect_ppg_artifacts(rec).flags
        span = 60
    keep = np.ones(len(x), dtype=bool)
    for w in np.flatnonzero(flags):
        keep[int(round(w * span)):int(round((w + 1) * span))] = False
    return x[keep]


def _segment_vectors(args):
    seg, registry, exclude_artifacts = args
    vectors = {}
    for modality in (Modality.EDA, Modality.PPG):
        names = registry.columns(modality)
        sl = seg.signals.get(modality)
        flag = "modality missing"
        if sl is not None:
            x = np.asarray(sl.samples, dtype=float)
            if exclude_artifacts:
                x = _drop_flagged(sl, modality, seg.dataset_id, seg.participant_id)
            try:
                if modality is Modality.EDA:
                    vectors[modality] = eda_features(x, sl.sampling_rate_hz, seg.segment_id)
                else:
                    vectors[modality] = ppg_features(x, sl.sampling_rate_hz, seg.segment_id, registry)
                continue
            except ValueError as exc:
                flag = str(exc)
        vectors[modality] = FeatureVector(names, np.full(len(names), np.nan), seg.segment_id, modality,
                                          (f"all: {flag}",))
    vectors[Modality.COMBINED] = combine_features(vectors[Modality.EDA], vectors[Modality.PPG])
    return vectors


def zscore_records(records) -> list[RawSignalRecord]:
    """Z-score every stream over the participant's full recording."""
    return [RawSignalRecord(r.dataset_id, r.participant_id, r.modality, r.sampling_rate_hz,
                            zscore_normalize(r.samples) if len(r.samples) >= 2 else r.samples,
                            r.start_time_s, r.recording_id) for r in records]


def extract_feature_tables(segments, registry: FeatureRegistry = DEFAULT_REGISTRY, workers: int = 1,
                           exclude_artifacts: bool = False, normalize: bool = True) -> FeatureRun:
    """EDA, PPG and combined feature tables for labeled segments.

    Non-finite values are imputed with the participant median (0 when the
    participant has none), then every column is min-max scaled within
    participant.
    """
    segments = list(segments)
    if not segments:
        raise ValueError("no segments to extract features from")
    jobs = [(s, registry, exclude_artifacts) for s in segments]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            vecs = list(pool.map(_segment_vectors, jobs, chunksize=8))
    else:
        vecs = [_segment_vectors(j) for j in jobs]
    ds = [s.dataset_id for s in segments]
    ps = [s.participant_id for s in segments]
    ss = [s.segment_id for s in segments]
    a = [AROUSAL_CODES.index(s.labels.arousal) for s in segments]
    v = [VALENCE_CODES.index(s.labels.valence) for s in segments]
    tables, imputed, flags = {}, {}, {}
    for modality in (Modality.EDA, Modality.PPG, Modality.COMBINED):
        cols = registry.columns(modality)
        X = np.vstack([vv[modality].reindex(cols).values for vv in vecs])
        table = FeatureTable(ds, ps, ss, cols, X, a, v)
        table, counts = impute_per_participant(table)
        if normalize:
            table = minmax_normalize(table)
        tables[modality] = table
        imputed[modality] = counts
        flags[modality] = {vv[modality].segment_id: list(vv[modality].flags) for vv in vecs if vv[modality].flags}
    return FeatureRun(tables, imputed, flags)


def label_counts(segments) -> dict:
    """Per-class segment counts for arousal, valence and quadrant."""
    segments = list(segments)
    return {
        "arousal": [sum(s.labels.arousal is c for s in segments) for c in AROUSAL_CODES],
        "valence": [sum(s.labels.valence is c for s in segments) for c in VALENCE_CODES],
        "quadrant": [sum(s.labels.quadrant is c for s in segments) for c in QUADRANT_CODES],
    }

