"""Synthetic EDA/PPG corpora with a planted arousal/valence structure.

Arousal drives the SCR rate and heart rate; valence drives the sign of the
tonic drift and, weakly, beat-to-beat jitter. The output goes through the
same files and parsers as real standardized data.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .core import QUADRANT_CODES, Arousal, DatasetDescriptor, Modality, Quadrant, RawSignalRecord, Valence
from .ingest import (BinningScheme, TaskInterval, TaskRule, descriptor_to_dict, write_annotation_file,
                     write_signal_file)

SIGNAL_FILES = {Modality.EDA: "eda.csv", Modality.PPG: "ppg.csv"}
ANNOTATION_FILE = "annotations.csv"
DESCRIPTOR_FILE = "descriptor.yaml"

SCR_RISE_S = 0.75
SCR_DECAY_S = 3.0
PULSE_WIDTH_S = 0.08


@dataclass(frozen=True)
class SynthSpec:
    """Parameters of a synthetic dataset.

    Pairs are ``(low, high)`` arousal or ``(negative, positive)`` valence
    values.
    """

    n_participants: int = 10
    segments_per_quadrant: int = 4
    segment_s: float = 120.0
    gap_s: float = 5.0
    eda_rate_hz: float = 4.0
    ppg_rate_hz: float = 64.0
    scr_rate_per_min: tuple[float, float] = (0.5, 6.0)
    scr_refractory_s: float = 5.0
    scr_amplitude_uS: tuple[float, float] = (0.02, 0.1)
    hr_bpm: tuple[float, float] = (65.0, 90.0)
    hr_participant_sd: float = 3.0
    hr_jitter: tuple[float, float] = (0.02, 0.05)
    tonic_baseline_uS: tuple[float, float] = (6.0, 10.0)
    tonic_slope_uS_per_s: float = 0.005
    eda_noise_uS: float = 0.001
    ppg_noise: float = 0.05
    seed: int = 42
    dataset_id: str = "SYNTH"
    setting: str = "lab"
    device: str = "wearable_e4"
    labeling: str = "stimulus_label"

    def __post_init__(self):
        if self.scr_rate_per_min[1] <= self.scr_rate_per_min[0]:
            raise ValueError("high-arousal SCR rate must exceed the low-arousal rate")
        if self.hr_bpm[1] <= self.hr_bpm[0]:
            raise ValueError("high-arousal heart rate must exceed the low-arousal rate")
        if min(self.scr_rate_per_min + self.hr_bpm) <= 0 or self.eda_rate_hz <= 0 or self.ppg_rate_hz <= 0:
            raise ValueError("rates must be positive")
        if self.n_participants < 1 or self.segments_per_quadrant < 1:
            raise ValueError("need at least one participant and one segment per quadrant")

    @property
    def segments_per_participant(self) -> int:
        return 4 * self.segments_per_quadrant


def _levels(q: Quadrant) -> tuple[int, int]:
    """(arousal_high, valence_positive) as 0/1 for a quadrant."""
    name = str(q)
    return int(name[0] == "H"), int(name[2] == "P")


def synth_binning(name: str) -> BinningScheme:
    rules = []
    for q in QUADRANT_CODES:
        a, v = _levels(q)
        rules.append(TaskRule(str(q).lower(), "prefix",
                              Arousal.HIGH if a else Arousal.LOW,
                              Valence.POSITIVE if v else Valence.NEGATIVE))
    return BinningScheme(name, tuple(rules), "task", tuple(str(q).lower() for q in QUADRANT_CODES),
                         notes="task names start with the planted quadrant")


def scr_shape(t) -> np.ndarray:
    """Difference of exponentials scaled to a unit peak; zero before onset."""
    t = np.asarray(t, dtype=float)
    t_peak = np.log(SCR_DECAY_S / SCR_RISE_S) / (1 / SCR_RISE_S - 1 / SCR_DECAY_S)
    peak = np.exp(-t_peak / SCR_DECAY_S) - np.exp(-t_peak / SCR_RISE_S)
    out = (np.exp(-t / SCR_DECAY_S) - np.exp(-t / SCR_RISE_S)) / peak
    return np.where(t > 0, out, 0.0)


def scr_onsets(rng, rate_per_min: float, length_s: float, refractory_s: float) -> np.ndarray:
    """Poisson events with a dead time; mean spacing ``60 / rate``, onsets in [1 s, L - 3 s]."""
    mean_gap = 60.0 / rate_per_min
    free = max(mean_gap - refractory_s, 0.1 * mean_gap)
    t = 1.0 + rng.exponential(mean_gap)
    out = []
    while t <= length_s - 3.0:
        out.append(t)
        t += refractory_s + rng.exponential(free)
    return np.array(out)


@dataclass
class _Participant:
    pid: str
    baseline: float
    hr_offset: float
    order: list


def _participant_plan(spec: SynthSpec, rng, index: int) -> _Participant:
    order = [q for q in QUADRANT_CODES for _ in range(spec.segments_per_quadrant)]
    order = [order[i] for i in rng.permutation(len(order))]
    return _Participant(f"P{index + 1:02d}", rng.uniform(*spec.tonic_baseline_uS),
                        rng.normal(0.0, spec.hr_participant_sd), order)


def _generate_participant(spec: SynthSpec, plan: _Participant, rng):
    L, gap = spec.segment_s, spec.gap_s
    total = len(plan.order) * (L + gap)
    fe, fp = spec.eda_rate_hz, spec.ppg_rate_hz
    te = np.arange(int(round(total * fe))) / fe
    tp = np.arange(int(round(total * fp))) / fp

    eda = np.empty_like(te)
    beats = []
    intervals = []
    level = plan.baseline
    planted = {}
    hr_rest = np.mean(spec.hr_bpm) + plan.hr_offset
    t0 = 0.0
    for k, q in enumerate(plan.order):
        a, v = _levels(q)
        name = f"{str(q).lower()}_{k + 1:02d}"
        intervals.append(TaskInterval(plan.pid, name, t0, t0 + L))
        # EDA: continuous piecewise-linear tonic plus SCR bumps inside the task
        slope = spec.tonic_slope_uS_per_s * (1 if v else -1)
        in_task = (te >= t0) & (te < t0 + L)
        eda[in_task] = level + slope * (te[in_task] - t0)
        onsets = scr_onsets(rng, spec.scr_rate_per_min[a], L, spec.scr_refractory_s)
        amps = rng.uniform(*spec.scr_amplitude_uS, size=len(onsets))
        for on, amp in zip(onsets, amps):
            eda[in_task] += amp * scr_shape(te[in_task] - t0 - on)
        planted[name] = len(onsets)
        level += slope * L
        rest = (te >= t0 + L) & (te < t0 + L + gap)
        eda[rest] = level
        # PPG beat times for task and the following rest
        hr = spec.hr_bpm[a] + plan.hr_offset
        jitter = spec.hr_jitter[v]
        t = t0 + rng.uniform(0, 60.0 / hr)
        while t < t0 + L:
            beats.append(t)
            t += 60.0 / hr * (1.0 + jitter * rng.standard_normal())
        t = max(t, t0 + L)
        while t < t0 + L + gap:
            beats.append(t)
            t += 60.0 / hr_rest
        t0 += L + gap
    eda += spec.eda_noise_uS * rng.standard_normal(len(te))

    ppg = np.zeros_like(tp)
    half = int(round(4 * PULSE_WIDTH_S * fp))
    for b in beats:
        c = int(round(b * fp))
        lo, hi = max(0, c - half), min(len(tp), c + half + 1)
        ppg[lo:hi] += np.exp(-0.5 * ((tp[lo:hi] - b) / PULSE_WIDTH_S) ** 2)
    ppg += spec.ppg_noise * rng.standard_normal(len(tp))
    return eda, ppg, intervals, planted


@dataclass
class SynthCorpus:
    records: list
    annotations: list
    descriptor: DatasetDescriptor
    planted_scr: dict = field(default_factory=dict)


def _demographics(rng):
    return {"gender": "female" if rng.random() < 0.5 else "male", "age_years": int(rng.integers(19, 41))}


def generate_corpus(spec: SynthSpec = SynthSpec()) -> SynthCorpus:
    """Records, task annotations and descriptor for one synthetic dataset.

    Each participant draws from its own seed stream, so adding participants
    never changes earlier ones. ``planted_scr`` maps (participant, task) to
    the number of SCR bumps placed in that task.
    """
    children = np.random.SeedSequence(spec.seed).spawn(spec.n_participants)
    records, annotations, planted, roster = [], [], {}, {}
    for i, child in enumerate(children):
        rng = np.random.default_rng(child)
        plan = _participant_plan(spec, rng, i)
        roster[plan.pid] = _demographics(rng)
        eda, ppg, intervals, scr = _generate_participant(spec, plan, rng)
        records.append(RawSignalRecord(spec.dataset_id, plan.pid, Modality.EDA, spec.eda_rate_hz, eda))
        records.append(RawSignalRecord(spec.dataset_id, plan.pid, Modality.PPG, spec.ppg_rate_hz, ppg))
        annotations.extend(intervals)
        planted.update({(plan.pid, k): n for k, n in scr.items()})
    descriptor = DatasetDescriptor(spec.dataset_id, spec.setting, spec.device, spec.labeling,
                                   {Modality.EDA: spec.eda_rate_hz, Modality.PPG: spec.ppg_rate_hz},
                                   roster, synth_binning(spec.dataset_id), "task")
    return SynthCorpus(records, annotations, descriptor, planted)


def multi_dataset_specs(base: SynthSpec | None = None) -> list[SynthSpec]:
    """Three small datasets that differ in setting, device and labeling."""
    base = base or SynthSpec(n_participants=4, segments_per_quadrant=2, segment_s=90.0)
    cats = [("SYNTH_A", "lab", "wearable_e4", "stimulus_label"),
            ("SYNTH_B", "constraint", "lab_device", "self_report"),
            ("SYNTH_C", "real", "wearable_e4", "self_report")]
    return [dataclasses.replace(base, dataset_id=n, setting=s, device=d, labeling=lab, seed=base.seed + i)
            for i, (n, s, d, lab) in enumerate(cats)]


def write_corpus(corpus: SynthCorpus, out_dir: str | Path) -> Path:
    """Write ``descriptor.yaml``, ``eda.csv``, ``ppg.csv`` and ``annotations.csv``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / DESCRIPTOR_FILE).write_text(yaml.safe_dump(descriptor_to_dict(corpus.descriptor), sort_keys=True))
    for modality, fname in SIGNAL_FILES.items():
        with open(out / fname, "w", newline="") as fh:
            write_signal_file(fh, [r for r in corpus.records if r.modality is modality])
    with open(out / ANNOTATION_FILE, "w", newline="") as fh:
        write_annotation_file(fh, corpus.annotations)
    return out
