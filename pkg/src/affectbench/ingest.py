"""Standardized file parsing, segmentation and label binning.

Input files are long-format CSV (see README). Dataset descriptors and
binning schemes are YAML documents; the ``presets`` directory ships one per
supported public dataset.
"""
from __future__ import annotations

import csv
import math
import re
import warnings
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np
import yaml

from .core import (
    Arousal,
    DatasetDescriptor,
    LabelSet,
    Modality,
    ParseError,
    Provenance,
    ProvenanceKind,
    RawSignalRecord,
    SchemaError,
    Segment,
    SignalSlice,
    Valence,
)

SIGNAL_HEADER = ("participant_id", "recording_id", "t_s", "value")
ANNOTATION_HEADER = ("participant_id", "kind", "task", "start_s", "end_s", "time_s",
                     "arousal", "valence", "scale_min", "scale_max", "tags")

HOUR_S = 3600.0
MIN_PARTIAL_HOUR_S = 300.0
PROMPT_BEFORE_S = 7200.0
PROMPT_AFTER_S = 900.0

# Relative tolerance on sample spacing before a recording is declared to mix rates.
SPACING_RTOL = 0.01


class SegmentationWarning(UserWarning):
    """An annotation could not be turned into a segment."""


class UnmappedTaskError(KeyError):
    pass


# ---------------------------------------------------------------------------
# annotation records

@dataclass(frozen=True)
class TaskInterval:
    participant_id: str
    name: str
    start_s: float
    end_s: float

    def __post_init__(self):
        if not self.end_s > self.start_s:
            raise ValueError(f"task {self.name!r}: end ({self.end_s}) must exceed start ({self.start_s})")


def _check_scale(value, lo, hi, what):
    if not lo <= value <= hi:
        raise ValueError(f"{what} rating {value} outside scale [{lo}, {hi}]")


@dataclass(frozen=True)
class ContinuousRating:
    participant_id: str
    task: str
    times_s: tuple[float, ...]
    arousal_values: tuple[float, ...]
    valence_values: tuple[float, ...]
    scale_min: float
    scale_max: float

    def __post_init__(self):
        if np.any(np.diff(self.times_s) < 0):
            raise ValueError("continuous rating times must be nondecreasing")
        for a in self.arousal_values:
            _check_scale(a, self.scale_min, self.scale_max, "arousal")
        for v in self.valence_values:
            _check_scale(v, self.scale_min, self.scale_max, "valence")


@dataclass(frozen=True)
class DiscreteRating:
    participant_id: str
    arousal_value: float
    valence_value: float
    scale_min: float
    scale_max: float
    time_s: float | None = None
    task: str | None = None


@dataclass(frozen=True)
class EventFlag:
    participant_id: str
    time_s: float
    tags: tuple[str, ...] = ()


AnnotationRecord = TaskInterval | ContinuousRating | DiscreteRating | EventFlag


# ---------------------------------------------------------------------------
# binning schemes

_MATCHERS = {
    "exact": lambda pat, name: name == pat,
    "prefix": lambda pat, name: name.startswith(pat),
    "contains": lambda pat, name: pat in name,
    "regex": lambda pat, name: re.search(pat, name) is not None,
}


@dataclass(frozen=True)
class TaskRule:
    pattern: str
    match: str = "exact"
    arousal: Arousal | None = None
    valence: Valence | None = None

    def __post_init__(self):
        if self.match not in _MATCHERS:
            raise ValueError(f"unknown match mode {self.match!r}")
        object.__setattr__(self, "pattern", str(self.pattern).lower())
        if self.arousal is not None:
            object.__setattr__(self, "arousal", Arousal.parse(self.arousal))
        if self.valence is not None:
            object.__setattr__(self, "valence", Valence.parse(self.valence))

    def matches(self, name: str) -> bool:
        return _MATCHERS[self.match](self.pattern, name.lower())


@dataclass(frozen=True)
class BinningScheme:
    """Ordered task rules plus the rating threshold policy of one dataset.

    Rules are scanned in order separately for arousal and valence, so a
    rule may set only one of the two dimensions. ``labels_from`` says which
    annotation kind provides labels: ``task``, ``discrete``, ``continuous``
    or ``event`` (event tags are matched like task names).
    """

    name: str
    rules: tuple[TaskRule, ...] = ()
    labels_from: str = "task"
    vocabulary: tuple[str, ...] = ()
    default_arousal: Arousal | None = None
    default_valence: Valence | None = None
    threshold_policy: str = "midpoint"
    notes: str = ""

    def __post_init__(self):
        if self.labels_from not in ("task", "discrete", "continuous", "event"):
            raise ValueError(f"unknown label source {self.labels_from!r}")
        if self.threshold_policy != "midpoint":
            raise ValueError(f"unknown threshold policy {self.threshold_policy!r}")
        if self.default_arousal is not None:
            object.__setattr__(self, "default_arousal", Arousal.parse(self.default_arousal))
        if self.default_valence is not None:
            object.__setattr__(self, "default_valence", Valence.parse(self.default_valence))

    @classmethod
    def from_dict(cls, name: str, data: Mapping) -> "BinningScheme":
        rules = [TaskRule(**r) for r in data.get("rules", [])]
        for r in data.get("arousal_rules", []):
            rules.append(TaskRule(r["pattern"], r.get("match", "exact"), arousal=r["value"]))
        for r in data.get("valence_rules", []):
            rules.append(TaskRule(r["pattern"], r.get("match", "exact"), valence=r["value"]))
        default = data.get("default") or {}
        return cls(
            name=name,
            rules=tuple(rules),
            labels_from=data.get("labels_from", "task"),
            vocabulary=tuple(str(v) for v in data.get("vocabulary", ())),
            default_arousal=default.get("arousal"),
            default_valence=default.get("valence"),
            threshold_policy=data.get("threshold", "midpoint"),
            notes=data.get("notes", ""),
        )


def bin_task_label(task_name: str, scheme: BinningScheme) -> LabelSet:
    """Map a task (or event tag) name to labels; first matching rule wins."""
    arousal = next((r.arousal for r in scheme.rules if r.arousal is not None and r.matches(task_name)),
                   scheme.default_arousal)
    valence = next((r.valence for r in scheme.rules if r.valence is not None and r.matches(task_name)),
                   scheme.default_valence)
    if arousal is None or valence is None:
        raise UnmappedTaskError(f"unmapped task {task_name!r} under scheme {scheme.name!r}")
    return LabelSet(arousal, valence)


def _above_midpoint(value: float, lo: float, hi: float) -> bool:
    _check_scale(value, lo, hi, "")
    return value > (lo + hi) / 2.0


def bin_discrete_rating(rating: DiscreteRating, scheme: BinningScheme | None = None) -> LabelSet:
    """Binarize a discrete rating: strictly above the scale midpoint is High/Positive."""
    high = _above_midpoint(rating.arousal_value, rating.scale_min, rating.scale_max)
    pos = _above_midpoint(rating.valence_value, rating.scale_min, rating.scale_max)
    return LabelSet(Arousal.HIGH if high else Arousal.LOW,
                    Valence.POSITIVE if pos else Valence.NEGATIVE)


def bin_continuous_rating(trace: ContinuousRating, scheme: BinningScheme | None,
                          participant_reference_mean: tuple[float, float]) -> LabelSet:
    """Compare a segment's mean annotation with the participant's overall mean.

    Ties go to Low/Negative.
    """
    if len(trace.arousal_values) == 0 or len(trace.valence_values) == 0:
        raise ValueError("empty continuous rating trace")
    ref_a, ref_v = participant_reference_mean
    high = float(np.mean(trace.arousal_values)) > ref_a
    pos = float(np.mean(trace.valence_values)) > ref_v
    return LabelSet(Arousal.HIGH if high else Arousal.LOW,
                    Valence.POSITIVE if pos else Valence.NEGATIVE)


def participant_reference_mean(traces: Iterable[ContinuousRating]) -> tuple[float, float]:
    """Pooled mean over every sample of a participant's traces."""
    traces = list(traces)
    a = np.concatenate([np.asarray(t.arousal_values, float) for t in traces])
    v = np.concatenate([np.asarray(t.valence_values, float) for t in traces])
    return float(a.mean()), float(v.mean())


# ---------------------------------------------------------------------------
# descriptors and presets

def available_presets() -> list[str]:
    root = resources.files("affectbench") / "presets"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".yaml"))


def load_preset(name: str) -> dict:
    key = name.lower().replace("-", "_").replace(" ", "_")
    path = resources.files("affectbench") / "presets" / f"{key}.yaml"
    if not path.is_file():
        raise KeyError(f"no preset named {name!r}; available: {', '.join(available_presets())}")
    return yaml.safe_load(path.read_text())


def _merge(base: dict, overlay: Mapping) -> dict:
    out = dict(base)
    for k, v in overlay.items():
        if isinstance(v, Mapping) and isinstance(out.get(k), Mapping):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def descriptor_from_dict(data: Mapping) -> DatasetDescriptor:
    """Build a descriptor; a ``preset`` key inherits from a shipped preset."""
    data = dict(data)
    if "preset" in data:
        data = _merge(load_preset(data.pop("preset")), data)
    binning = data.get("binning")
    scheme = BinningScheme.from_dict(data["name"], binning) if binning else None
    return DatasetDescriptor(
        name=str(data["name"]),
        setting=data["setting"],
        device=data["device"],
        labeling=data["labeling"],
        sampling_rates=data.get("sampling_rates") or {},
        participants=data.get("participants") or {},
        binning=scheme,
        segmentation=data.get("segmentation", "task"),
    )


def load_descriptor(path: str | Path) -> DatasetDescriptor:
    with open(path) as fh:
        return descriptor_from_dict(yaml.safe_load(fh))


def descriptor_to_dict(descriptor: DatasetDescriptor) -> dict:
    out = {
        "name": descriptor.name,
        "setting": descriptor.setting.value,
        "device": descriptor.device.value,
        "labeling": descriptor.labeling.value,
        "segmentation": descriptor.segmentation,
        "sampling_rates": {m.value: r for m, r in descriptor.sampling_rates.items()},
        "participants": {
            pid: {k: v for k, v in (("gender", d.gender.value if d.gender else None),
                                    ("age_years", d.age_years)) if v is not None}
            for pid, d in descriptor.participants.items()
        },
    }
    s = descriptor.binning
    if s is not None:
        b = {"labels_from": s.labels_from, "threshold": s.threshold_policy}
        if s.vocabulary:
            b["vocabulary"] = list(s.vocabulary)
        b["rules"] = [{k: v for k, v in (("pattern", r.pattern), ("match", r.match),
                                         ("arousal", r.arousal and r.arousal.value),
                                         ("valence", r.valence and r.valence.value)) if v is not None}
                      for r in s.rules]
        if s.default_arousal or s.default_valence:
            b["default"] = {k: v.value for k, v in (("arousal", s.default_arousal),
                                                    ("valence", s.default_valence)) if v is not None}
        if s.notes:
            b["notes"] = s.notes
        out["binning"] = b
    return out


# ---------------------------------------------------------------------------
# file parsing

def _float_cell(text: str, column: str, line: int, path) -> float:
    try:
        value = float(text)
    except (TypeError, ValueError):
        raise ParseError(f"non-numeric {column} {text!r}", line, path) from None
    if not math.isfinite(value):
        raise ParseError(f"non-finite {column} {text!r}", line, path)
    return value


def _reader(stream, header, path):
    if isinstance(stream, (str, Path)):
        raise TypeError("pass an open text stream; use open() for paths")
    reader = csv.reader(stream)
    try:
        got = next(reader)
    except StopIteration:
        raise ParseError("empty file", 1, path) from None
    if tuple(c.strip() for c in got) != header:
        raise ParseError(f"expected header {','.join(header)}, got {','.join(got)}", 1, path)
    return reader


def parse_signal_file(stream, modality: Modality | str, descriptor: DatasetDescriptor,
                      path: str | None = None) -> list[RawSignalRecord]:
    """Parse a long-format signal file into one record per recording.

    Records are returned sorted by (participant_id, recording_id).
    """
    modality = Modality.parse(modality)
    rate = descriptor.rate(modality)
    reader = _reader(stream, SIGNAL_HEADER, path)
    groups: dict[tuple[str, str], tuple[list[float], list[float], int]] = {}
    for line, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(SIGNAL_HEADER):
            raise ParseError(f"expected {len(SIGNAL_HEADER)} cells, got {len(row)}", line, path)
        pid, rid = row[0].strip(), row[1].strip()
        if not pid:
            raise ParseError("empty participant_id", line, path)
        t = _float_cell(row[2], "t_s", line, path)
        v = _float_cell(row[3], "value", line, path)
        times, values, _ = groups.setdefault((pid, rid), ([], [], line))
        if times and t <= times[-1]:
            raise SchemaError(f"{path or 'signal file'}:line {line}: times not strictly increasing "
                              f"in recording {pid}/{rid}")
        times.append(t)
        values.append(v)

    records = []
    period = 1.0 / rate
    for (pid, rid), (times, values, first_line) in sorted(groups.items()):
        if len(times) > 1:
            dt = np.diff(times)
            if np.any(np.abs(dt - period) > SPACING_RTOL * period):
                bad = float(dt[np.argmax(np.abs(dt - period))])
                raise SchemaError(f"recording {pid}/{rid} (from line {first_line}) mixes sampling rates: "
                                  f"spacing {bad:g}s vs declared {period:g}s ({rate:g} Hz)")
        records.append(RawSignalRecord(descriptor.name, pid, modality, rate, values,
                                       start_time_s=times[0], recording_id=rid))
    return records


def _opt_float(row, idx, name, line, path):
    text = row[idx].strip()
    return None if text == "" else _float_cell(text, name, line, path)


def parse_annotation_file(stream, path: str | None = None) -> list[AnnotationRecord]:
    """Parse the long-format annotation file.

    Consecutive ``continuous`` rows of one (participant, task) form a single
    :class:`ContinuousRating`.
    """
    reader = _reader(stream, ANNOTATION_HEADER, path)
    out: list[AnnotationRecord] = []
    pending: dict[tuple[str, str], dict] = {}
    order: list[tuple[str, str]] = []
    for line, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(ANNOTATION_HEADER):
            raise ParseError(f"expected {len(ANNOTATION_HEADER)} cells, got {len(row)}", line, path)
        pid, kind, task = row[0].strip(), row[1].strip().lower(), row[2].strip()
        start, end, t = (_opt_float(row, i, n, line, path) for i, n in ((3, "start_s"), (4, "end_s"), (5, "time_s")))
        a, v, lo, hi = (_opt_float(row, i, n, line, path)
                        for i, n in ((6, "arousal"), (7, "valence"), (8, "scale_min"), (9, "scale_max")))
        tags = tuple(x for x in row[10].strip().split(";") if x)
        try:
            if kind == "task":
                if start is None or end is None or not task:
                    raise ParseError("task rows need task, start_s and end_s", line, path)
                out.append(TaskInterval(pid, task, start, end))
            elif kind == "discrete":
                if None in (a, v, lo, hi) or (t is None and not task):
                    raise ParseError("discrete rows need arousal, valence, scale and a time or task", line, path)
                _check_scale(a, lo, hi, "arousal")
                _check_scale(v, lo, hi, "valence")
                out.append(DiscreteRating(pid, a, v, lo, hi, time_s=t, task=task or None))
            elif kind == "continuous":
                if None in (a, v, lo, hi, t):
                    raise ParseError("continuous rows need time_s, arousal, valence and scale", line, path)
                key = (pid, task)
                if key not in pending:
                    pending[key] = {"t": [], "a": [], "v": [], "lo": lo, "hi": hi, "line": line}
                    order.append(key)
                acc = pending[key]
                if acc["t"] and t < acc["t"][-1]:
                    raise ParseError("continuous rating times must be nondecreasing", line, path)
                acc["t"].append(t)
                acc["a"].append(a)
                acc["v"].append(v)
            elif kind == "event":
                if t is None:
                    raise ParseError("event rows need time_s", line, path)
                out.append(EventFlag(pid, t, tags))
            else:
                raise ParseError(f"unknown annotation kind {kind!r}", line, path)
        except ValueError as exc:
            if isinstance(exc, ParseError):
                raise
            raise ParseError(str(exc), line, path) from None
    for key in order:
        acc = pending[key]
        try:
            out.append(ContinuousRating(key[0], key[1], tuple(acc["t"]), tuple(acc["a"]), tuple(acc["v"]),
                                        acc["lo"], acc["hi"]))
        except ValueError as exc:
            raise ParseError(str(exc), acc["line"], path) from None
    return out


def write_signal_file(stream, records: Iterable[RawSignalRecord]) -> None:
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(SIGNAL_HEADER)
    for rec in records:
        t0, rate = rec.start_time_s, rec.sampling_rate_hz
        for i, v in enumerate(rec.samples):
            w.writerow((rec.participant_id, rec.recording_id, f"{t0 + i / rate:.6f}", f"{v:.9g}"))


def _fmt(x):
    return "" if x is None else f"{x:.9g}"


def write_annotation_file(stream, annotations: Iterable[AnnotationRecord]) -> None:
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(ANNOTATION_HEADER)
    for a in annotations:
        if isinstance(a, TaskInterval):
            w.writerow((a.participant_id, "task", a.name, _fmt(a.start_s), _fmt(a.end_s), "", "", "", "", "", ""))
        elif isinstance(a, DiscreteRating):
            w.writerow((a.participant_id, "discrete", a.task or "", "", "", _fmt(a.time_s),
                        _fmt(a.arousal_value), _fmt(a.valence_value), _fmt(a.scale_min), _fmt(a.scale_max), ""))
        elif isinstance(a, ContinuousRating):
            for t, ar, va in zip(a.times_s, a.arousal_values, a.valence_values):
                w.writerow((a.participant_id, "continuous", a.task, "", "", _fmt(t), _fmt(ar), _fmt(va),
                            _fmt(a.scale_min), _fmt(a.scale_max), ""))
        elif isinstance(a, EventFlag):
            w.writerow((a.participant_id, "event", "", "", "", _fmt(a.time_s), "", "", "", "", ";".join(a.tags)))
        else:
            raise TypeError(f"not an annotation record: {a!r}")


# ---------------------------------------------------------------------------
# segmentation

def _index_at(record: RawSignalRecord, t: float) -> int:
    """First sample index whose timestamp is >= t, clipped to [0, L]."""
    i = math.ceil((t - record.start_time_s) * record.sampling_rate_hz - 1e-9)
    return min(max(i, 0), len(record.samples))


def _slice_segment(record, segment_id, provenance, i0, i1) -> Segment:
    sl = SignalSlice(record.samples[i0:i1], record.sampling_rate_hz, i0, record.recording_id)
    return Segment(segment_id, record.dataset_id, record.participant_id, {record.modality: sl}, provenance)


def segment_by_task(record: RawSignalRecord, annotations: Iterable[AnnotationRecord]) -> list[Segment]:
    """One segment per task interval of the record's participant.

    Samples are the half-open slice [start_s, end_s). Intervals reaching past
    the recording are clipped; intervals with no samples inside are skipped.
    Both cases emit a :class:`SegmentationWarning`.
    """
    seen: dict[str, int] = {}
    out = []
    for ann in annotations:
        if not isinstance(ann, TaskInterval) or ann.participant_id != record.participant_id:
            continue
        i0, i1 = _index_at(record, ann.start_s), _index_at(record, ann.end_s)
        n = seen.get(ann.name, 0)
        seen[ann.name] = n + 1
        if i1 <= i0:
            warnings.warn(f"{record.participant_id}: task {ann.name!r} [{ann.start_s}, {ann.end_s}) "
                          f"outside recorded range [{record.start_time_s}, {record.end_time_s}); skipped",
                          SegmentationWarning, stacklevel=2)
            continue
        if ann.start_s < record.start_time_s - 1e-9 or ann.end_s > record.end_time_s + 1e-9:
            warnings.warn(f"{record.participant_id}: task {ann.name!r} clipped to the recorded range",
                          SegmentationWarning, stacklevel=2)
        sid = f"{record.participant_id}:task:{ann.name}" + (f"#{n + 1}" if n else "")
        out.append(_slice_segment(record, sid, Provenance(ProvenanceKind.TASK, ann.name), i0, i1))
    return out


def segment_hourly(record: RawSignalRecord) -> list[Segment]:
    """Consecutive one-hour slices; a trailing remainder is kept iff >= 300 s."""
    rate = record.sampling_rate_hz
    per_hour = int(round(HOUR_S * rate))
    min_partial = int(math.ceil(MIN_PARTIAL_HOUR_S * rate - 1e-9))
    n = len(record.samples)
    out = []
    for k, i0 in enumerate(range(0, n, per_hour)):
        i1 = min(i0 + per_hour, n)
        if i1 - i0 < per_hour and i1 - i0 < min_partial:
            break
        sid = f"{record.participant_id}:{record.recording_id}:hour:{k}"
        out.append(_slice_segment(record, sid, Provenance(ProvenanceKind.HOUR, k), i0, i1))
    return out


def segment_around_prompt(record: RawSignalRecord, prompt_time_s: float,
                          before_s: float = PROMPT_BEFORE_S, after_s: float = PROMPT_AFTER_S) -> Segment:
    """Slice [prompt - 2 h, prompt + 15 min) clipped to the recording."""
    if not record.start_time_s <= prompt_time_s < record.end_time_s:
        raise ValueError(f"prompt outside recording: t={prompt_time_s} not in "
                         f"[{record.start_time_s}, {record.end_time_s})")
    i0 = _index_at(record, prompt_time_s - before_s)
    i1 = _index_at(record, prompt_time_s + after_s)
    if i1 <= i0:
        raise ValueError("prompt outside recording: empty window")
    sid = f"{record.participant_id}:{record.recording_id}:prompt:{prompt_time_s:g}"
    return _slice_segment(record, sid, Provenance(ProvenanceKind.PROMPT, prompt_time_s), i0, i1)


# ---------------------------------------------------------------------------
# corpus-level assembly

def _record_covering(records, t):
    for r in records:
        if r.start_time_s <= t < r.end_time_s:
            return r
    return None


def _label_hour_or_prompt(seg_start, seg_end, pid, scheme, by_kind):
    """Labels for a time-anchored segment from ratings or event tags inside it."""
    if scheme.labels_from == "discrete":
        ratings = [r for r in by_kind["discrete"] if r.participant_id == pid and r.time_s is not None
                   and seg_start <= r.time_s < seg_end]
        if not ratings:
            return None
        merged = DiscreteRating(pid, float(np.mean([r.arousal_value for r in ratings])),
                                float(np.mean([r.valence_value for r in ratings])),
                                ratings[0].scale_min, ratings[0].scale_max)
        return bin_discrete_rating(merged, scheme)
    if scheme.labels_from == "event":
        events = [e for e in by_kind["event"] if e.participant_id == pid and seg_start <= e.time_s < seg_end]
        name = ";".join(sorted({t for e in events for t in e.tags})) or "none"
        return bin_task_label(name, scheme)
    raise SchemaError(f"scheme {scheme.name!r}: labels_from={scheme.labels_from!r} "
                      "is not usable with time-anchored segments")


def build_segments(records: Iterable[RawSignalRecord], annotations: Iterable[AnnotationRecord],
                   descriptor: DatasetDescriptor) -> list[Segment]:
    """Segment every record per the descriptor and attach binned labels.

    Slices of different modalities that share a segment id are merged into
    one multimodal segment. Unlabelable segments are dropped with a warning.
    Output is sorted by segment id.
    """
    scheme = descriptor.binning
    if scheme is None:
        raise SchemaError(f"descriptor {descriptor.name!r} has no binning scheme")
    annotations = list(annotations)
    by_kind = {k: [a for a in annotations if isinstance(a, c)] for k, c in
               (("task", TaskInterval), ("discrete", DiscreteRating),
                ("continuous", ContinuousRating), ("event", EventFlag))}
    records = sorted(records, key=lambda r: (r.participant_id, r.modality.value, r.start_time_s, r.recording_id))
    mode = descriptor.segmentation

    pieces: dict[str, list[Segment]] = {}
    labels: dict[str, LabelSet | None] = {}
    for rec in records:
        if mode == "task":
            own = [a for a in by_kind["task"] if a.participant_id == rec.participant_id
                   and a.end_s > rec.start_time_s and a.start_s < rec.end_time_s]
            segs = segment_by_task(rec, own)
        elif mode == "hourly":
            segs = segment_hourly(rec)
        elif mode == "prompt":
            anchors = by_kind["discrete"] if scheme.labels_from == "discrete" else by_kind["event"]
            segs = []
            for a in anchors:
                if a.participant_id == rec.participant_id and a.time_s is not None \
                        and rec.start_time_s <= a.time_s < rec.end_time_s:
                    segs.append(segment_around_prompt(rec, a.time_s))
        else:
            raise SchemaError(f"unknown segmentation mode {mode!r}")
        for seg in segs:
            pieces.setdefault(seg.segment_id, []).append(seg)
            if seg.segment_id in labels:
                continue
            labels[seg.segment_id] = _label_for(seg, rec, scheme, by_kind)

    out = []
    for sid in sorted(pieces):
        parts = pieces[sid]
        lab = labels[sid]
        if lab is None:
            warnings.warn(f"segment {sid}: no annotation provides labels; dropped", SegmentationWarning, stacklevel=2)
            continue
        signals = {}
        for p in parts:
            signals.update(p.signals)
        first = parts[0]
        out.append(Segment(sid, first.dataset_id, first.participant_id, signals, first.provenance, lab))
    return out


def _label_for(seg: Segment, rec: RawSignalRecord, scheme: BinningScheme, by_kind) -> LabelSet | None:
    pid = seg.participant_id
    sl = next(iter(seg.signals.values()))
    seg_start = rec.start_time_s + sl.start_sample / rec.sampling_rate_hz
    seg_end = seg_start + len(sl.samples) / rec.sampling_rate_hz
    if seg.provenance.kind is ProvenanceKind.TASK:
        task = str(seg.provenance.value)
        if scheme.labels_from == "task":
            return bin_task_label(task, scheme)
        if scheme.labels_from == "discrete":
            match = [r for r in by_kind["discrete"] if r.participant_id == pid and r.task == task]
            return bin_discrete_rating(match[-1], scheme) if match else None
        if scheme.labels_from == "continuous":
            traces = [t for t in by_kind["continuous"] if t.participant_id == pid]
            match = [t for t in traces if t.task == task]
            if not match:
                return None
            return bin_continuous_rating(match[0], scheme, participant_reference_mean(traces))
        return _label_hour_or_prompt(seg_start, seg_end, pid, scheme, by_kind)
    if seg.provenance.kind is ProvenanceKind.PROMPT:
        t = float(seg.provenance.value)
        return _label_hour_or_prompt(t, np.nextafter(t, math.inf), pid, scheme, by_kind)
    return _label_hour_or_prompt(seg_start, seg_end, pid, scheme, by_kind)
