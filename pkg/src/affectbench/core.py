"""Domain types shared by every stage of the benchmark engine.

All types are frozen dataclasses or enums. Arrays stored on them are made
read-only so that instances can be shared freely between worker processes
and threads.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np


class IngestError(ValueError):
    """Base class for malformed standardized input."""


class ParseError(IngestError):
    """A row of an input file could not be parsed."""

    def __init__(self, message: str, line: int | None = None, path: str | None = None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}:"
        if line is not None:
            where += f"line {line}: "
        elif where:
            where += " "
        super().__init__(f"{where}{message}")


class SchemaError(IngestError):
    """Input is well-formed row by row but violates the file schema."""


class _LowerEnum(str, enum.Enum):
    """Enum serialized as its lowercase value in config files."""

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            allowed = ", ".join(m.value for m in cls)
            raise ValueError(f"invalid {cls.__name__} {value!r}; expected one of: {allowed}") from None

    def __str__(self) -> str:
        return self.value


class Modality(_LowerEnum):
    EDA = "eda"
    PPG = "ppg"
    COMBINED = "combined"

    @property
    def is_raw(self) -> bool:
        return self is not Modality.COMBINED


class Arousal(_LowerEnum):
    LOW = "low"
    HIGH = "high"


class Valence(_LowerEnum):
    NEGATIVE = "negative"
    POSITIVE = "positive"


class Quadrant(_LowerEnum):
    HAPV = "hapv"
    HANV = "hanv"
    LAPV = "lapv"
    LANV = "lanv"

    def __str__(self) -> str:
        return self.name


class Task(_LowerEnum):
    AROUSAL = "arousal"
    VALENCE = "valence"
    QUADRANT = "quadrant"


class Setting(_LowerEnum):
    LAB = "lab"
    CONSTRAINT = "constraint"
    REAL = "real"
    LAB_REAL = "lab_real"


class Device(_LowerEnum):
    WEARABLE_E4 = "wearable_e4"
    LAB_DEVICE = "lab_device"
    CUSTOM_WEARABLE = "custom_wearable"


class Labeling(_LowerEnum):
    STIMULUS_LABEL = "stimulus_label"
    SELF_REPORT = "self_report"
    EXPERT_ANNOTATED = "expert_annotated"


class Gender(_LowerEnum):
    MALE = "male"
    FEMALE = "female"


class CohortDimension(_LowerEnum):
    SETTING = "setting"
    DEVICE = "device"
    LABELING = "labeling"
    GENDER = "gender"
    AGE = "age"

    @property
    def is_demographic(self) -> bool:
        return self in (CohortDimension.GENDER, CohortDimension.AGE)


_QUADRANTS = {
    (Arousal.HIGH, Valence.POSITIVE): Quadrant.HAPV,
    (Arousal.HIGH, Valence.NEGATIVE): Quadrant.HANV,
    (Arousal.LOW, Valence.POSITIVE): Quadrant.LAPV,
    (Arousal.LOW, Valence.NEGATIVE): Quadrant.LANV,
}

# Integer codes used in feature tables and by the classifiers.
AROUSAL_CODES = (Arousal.LOW, Arousal.HIGH)
VALENCE_CODES = (Valence.NEGATIVE, Valence.POSITIVE)
QUADRANT_CODES = (Quadrant.HAPV, Quadrant.HANV, Quadrant.LAPV, Quadrant.LANV)


def quadrant_of(arousal: Arousal, valence: Valence) -> Quadrant:
    return _QUADRANTS[(Arousal.parse(arousal), Valence.parse(valence))]


@dataclass(frozen=True)
class LabelSet:
    """Binary arousal and valence; the circumplex quadrant is derived."""

    arousal: Arousal
    valence: Valence

    def __post_init__(self):
        object.__setattr__(self, "arousal", Arousal.parse(self.arousal))
        object.__setattr__(self, "valence", Valence.parse(self.valence))

    @property
    def quadrant(self) -> Quadrant:
        return quadrant_of(self.arousal, self.valence)

    def code(self, task: Task | str) -> int:
        task = Task.parse(task)
        if task is Task.AROUSAL:
            return AROUSAL_CODES.index(self.arousal)
        if task is Task.VALENCE:
            return VALENCE_CODES.index(self.valence)
        return QUADRANT_CODES.index(self.quadrant)


def _frozen_array(values) -> np.ndarray:
    arr = np.array(values, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class RawSignalRecord:
    """One participant's continuous EDA or PPG stream.

    Construction does not validate; use :func:`validate_corpus` to obtain a
    list of violations instead of an exception.
    """

    dataset_id: str
    participant_id: str
    modality: Modality
    sampling_rate_hz: float
    samples: np.ndarray
    start_time_s: float = 0.0
    recording_id: str = "0"

    def __post_init__(self):
        object.__setattr__(self, "modality", Modality.parse(self.modality))
        object.__setattr__(self, "samples", _frozen_array(self.samples))
        object.__setattr__(self, "sampling_rate_hz", float(self.sampling_rate_hz))

    @property
    def duration_s(self) -> float:
        return len(self.samples) / self.sampling_rate_hz

    @property
    def end_time_s(self) -> float:
        return self.start_time_s + self.duration_s


@dataclass(frozen=True)
class SignalSlice:
    samples: np.ndarray
    sampling_rate_hz: float
    start_sample: int = 0
    recording_id: str = "0"

    def __post_init__(self):
        object.__setattr__(self, "samples", _frozen_array(self.samples))
        object.__setattr__(self, "sampling_rate_hz", float(self.sampling_rate_hz))


class ProvenanceKind(_LowerEnum):
    TASK = "task"
    HOUR = "hour"
    PROMPT = "prompt"


@dataclass(frozen=True)
class Provenance:
    kind: ProvenanceKind
    value: str | int | float

    def __str__(self) -> str:
        return f"{self.kind.value}({self.value})"


@dataclass(frozen=True)
class Segment:
    segment_id: str
    dataset_id: str
    participant_id: str
    signals: Mapping[Modality, SignalSlice]
    provenance: Provenance
    labels: LabelSet | None = None

    def __post_init__(self):
        if not self.signals:
            raise ValueError(f"segment {self.segment_id} carries no modality")
        for modality, sl in self.signals.items():
            if not Modality.parse(modality).is_raw:
                raise ValueError("combined modality cannot carry raw samples")
            if len(sl.samples) < 1:
                raise ValueError(f"segment {self.segment_id}: empty {modality} slice")

    def with_labels(self, labels: LabelSet) -> "Segment":
        return Segment(self.segment_id, self.dataset_id, self.participant_id,
                       dict(self.signals), self.provenance, labels)


@dataclass(frozen=True)
class Demographics:
    gender: Gender | None = None
    age_years: int | None = None

    def __post_init__(self):
        if self.gender is not None:
            object.__setattr__(self, "gender", Gender.parse(self.gender))
        if self.age_years is not None:
            if int(self.age_years) <= 0:
                raise ValueError(f"age must be positive, got {self.age_years}")
            object.__setattr__(self, "age_years", int(self.age_years))


@dataclass(frozen=True)
class DatasetDescriptor:
    """Categorization and participant roster of one dataset.

    ``binning`` holds the dataset's :class:`affectbench.ingest.BinningScheme`
    (kept untyped here to avoid an import cycle).
    """

    name: str
    setting: Setting
    device: Device
    labeling: Labeling
    sampling_rates: Mapping[Modality, float] = field(default_factory=dict)
    participants: Mapping[str, Demographics] = field(default_factory=dict)
    binning: object | None = None
    segmentation: str = "task"

    def __post_init__(self):
        object.__setattr__(self, "setting", Setting.parse(self.setting))
        object.__setattr__(self, "device", Device.parse(self.device))
        object.__setattr__(self, "labeling", Labeling.parse(self.labeling))
        object.__setattr__(self, "sampling_rates",
                           {Modality.parse(k): float(v) for k, v in self.sampling_rates.items()})
        object.__setattr__(self, "participants",
                           {str(k): (v if isinstance(v, Demographics) else Demographics(**(v or {})))
                            for k, v in self.participants.items()})

    def rate(self, modality: Modality | str) -> float:
        modality = Modality.parse(modality)
        try:
            return self.sampling_rates[modality]
        except KeyError:
            raise SchemaError(f"descriptor {self.name!r} declares no sampling rate for {modality}") from None

    def category(self, dimension: CohortDimension | str) -> str:
        dimension = CohortDimension.parse(dimension)
        if dimension is CohortDimension.SETTING:
            return self.setting.value
        if dimension is CohortDimension.DEVICE:
            return self.device.value
        if dimension is CohortDimension.LABELING:
            return self.labeling.value
        raise ValueError(f"{dimension} is a participant-level dimension")


YOUNG_MAX_AGE = 25


def age_group(age_years: int) -> str:
    """Young is 18-25 inclusive, Old is above 25."""
    return "young" if age_years <= YOUNG_MAX_AGE else "old"


@dataclass(frozen=True)
class CohortGroup:
    """A set of datasets, or of (dataset, participant) pairs for demographics."""

    dimension: CohortDimension
    value: str
    datasets: frozenset[str]
    participants: frozenset[tuple[str, str]] | None = None

    def __post_init__(self):
        object.__setattr__(self, "dimension", CohortDimension.parse(self.dimension))
        object.__setattr__(self, "datasets", frozenset(self.datasets))
        if self.participants is not None:
            object.__setattr__(self, "participants", frozenset(tuple(p) for p in self.participants))

    @property
    def label(self) -> str:
        return f"{self.dimension.value}:{self.value}"

    def contains(self, dataset_id: str, participant_id: str) -> bool:
        if self.participants is not None:
            return (dataset_id, participant_id) in self.participants
        return dataset_id in self.datasets


def cohort_groups(descriptors, dimension: CohortDimension | str) -> list[CohortGroup]:
    """Group datasets (or participants) along one harmonizing dimension.

    Participants without the demographic attribute are skipped.
    """
    dimension = CohortDimension.parse(dimension)
    buckets: dict[str, set] = {}
    if not dimension.is_demographic:
        for d in descriptors:
            buckets.setdefault(d.category(dimension), set()).add(d.name)
        return [CohortGroup(dimension, v, frozenset(s)) for v, s in sorted(buckets.items())]
    for d in descriptors:
        for pid, demo in d.participants.items():
            if dimension is CohortDimension.GENDER and demo.gender is not None:
                key = demo.gender.value
            elif dimension is CohortDimension.AGE and demo.age_years is not None:
                key = age_group(demo.age_years)
            else:
                continue
            buckets.setdefault(key, set()).add((d.name, pid))
    return [CohortGroup(dimension, v, frozenset(ds for ds, _ in s), frozenset(s))
            for v, s in sorted(buckets.items())]


@dataclass(frozen=True)
class Violation:
    kind: str
    detail: str


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def kinds(self) -> list[str]:
        return [v.kind for v in self.violations]


def validate_corpus(records, descriptor: DatasetDescriptor) -> ValidationReport:
    """Check raw records against their descriptor without raising."""
    found = []
    for rec in records:
        where = f"{rec.dataset_id}/{rec.participant_id}/{rec.modality}/{rec.recording_id}"
        if rec.dataset_id != descriptor.name:
            found.append(Violation("dataset mismatch", f"{where}: descriptor is {descriptor.name!r}"))
        if rec.participant_id not in descriptor.participants:
            found.append(Violation("unknown participant", where))
        if not rec.modality.is_raw:
            found.append(Violation("combined raw stream", where))
        rate = rec.sampling_rate_hz
        if not (math.isfinite(rate) and rate > 0):
            found.append(Violation("nonpositive rate", f"{where}: {rate}"))
        if len(rec.samples) == 0:
            found.append(Violation("empty stream", where))
        elif not np.all(np.isfinite(rec.samples)):
            n_bad = int(np.count_nonzero(~np.isfinite(rec.samples)))
            found.append(Violation("non-finite sample", f"{where}: {n_bad} sample(s)"))
    return ValidationReport(tuple(found))
