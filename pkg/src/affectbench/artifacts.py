"""Signal-quality screening for EDA and PPG recordings.

EDA windows are described by a 36-value vector (signal, difference and Haar
wavelet statistics plus SCR counts) and scored by a pluggable detector. PPG
detectors emit a per-sample artifact probability that is binarized and
averaged per window.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable, Iterable, Protocol, Sequence

import numpy as np
from scipy import stats

from .core import Modality, RawSignalRecord
from .features.eda import detect_scr_peaks
from .features.ppg import clean_ppg, detect_ppg_peaks

WINDOW = 60
EDA_RATE = 4.0
HAAR_LEVELS = 3
N_EDA_ARTIFACT_FEATURES = 36


class ArtifactWarning(UserWarning):
    pass


def haar_dwt(x, levels: int = HAAR_LEVELS) -> tuple[list[np.ndarray], np.ndarray]:
    """Orthonormal multilevel Haar transform.

    Odd-length stages are padded by repeating their last sample.

    Returns
    -------
    details : list of ndarray
        Detail coefficients, level 1 first.
    approx : ndarray
        Approximation at the deepest level.
    """
    a = np.asarray(x, dtype=float)
    details = []
    for _ in range(levels):
        if len(a) % 2:
            a = np.append(a, a[-1])
        even, odd = a[0::2], a[1::2]
        details.append((even - odd) / np.sqrt(2.0))
        a = (even + odd) / np.sqrt(2.0)
    return details, a


def _shape(x):
    if len(x) < 2 or np.ptp(x) == 0:
        return 0.0, 0.0
    return float(stats.skew(x, bias=True)), float(stats.kurtosis(x, bias=True))


def _diff_stats(d):
    sk, ku = _shape(d)
    return [float(d.mean()), float(d.std()), float(np.abs(d).max()), sk, ku]


EDA_ARTIFACT_FEATURES = (
    ["sig_mean", "sig_var", "sig_skew", "sig_kurt", "sig_dynrange", "sig_slope"]
    + [f"d1_{s}" for s in ("mean", "std", "maxabs", "skew", "kurt")]
    + [f"d2_{s}" for s in ("mean", "std", "maxabs", "skew", "kurt")]
    + [f"haar_d{lv}_{s}" for lv in range(1, 4) for s in ("meanabs", "std", "maxabs", "energy")]
    + ["haar_a3_mean", "haar_a3_std", "haar_a3_energy"]
    + ["scr_n", "scr_mean_amp", "scr_sum_amp", "scr_max_rise_slope", "scr_n_half_recovery"]
)


def eda_artifact_features(window, rate_hz: float = EDA_RATE) -> np.ndarray:
    """36-value description of one 60-sample EDA window (see ``EDA_ARTIFACT_FEATURES``)."""
    x = np.asarray(window, dtype=float)
    if x.shape != (WINDOW,):
        raise ValueError(f"EDA artifact window must have exactly {WINDOW} samples, got {x.shape}")
    t = np.arange(WINDOW) / rate_hz
    tc = t - t.mean()
    sk, ku = _shape(x)
    out = [x.mean(), x.var(), sk, ku, np.ptp(x), np.dot(tc, x - x.mean()) / np.dot(tc, tc)]
    out += _diff_stats(np.diff(x))
    out += _diff_stats(np.diff(x, 2))
    details, approx = haar_dwt(x)
    for d in details:
        out += [np.abs(d).mean(), d.std(), np.abs(d).max(), np.sum(d * d)]
    out += [approx.mean(), approx.std(), np.sum(approx * approx)]
    events = detect_scr_peaks(x, rate_hz)
    amps = np.array([e.amplitude_uS for e in events])
    slopes = [e.amplitude_uS / e.rise_time_s for e in events]
    out += [len(events), amps.mean() if amps.size else 0.0, amps.sum(),
            max(slopes, default=0.0), sum(e.half_recovery_time_s is not None for e in events)]
    return np.asarray(out, dtype=float)


class EDADetector(Protocol):
    def score(self, features: np.ndarray, window: np.ndarray) -> float:
        """Artifact probability in [0, 1] for one window."""


@dataclass(frozen=True)
class RuleBasedEDADetector:
    """Threshold rules standing in for a trained window classifier.

    A window scores 1 when its largest sample-to-sample jump exceeds
    ``max_abs_diff``, when any sample leaves ``valid_range``, or when the
    level-1 Haar detail energy exceeds ``energy_ratio`` times the level-3
    approximation energy; otherwise 0.
    """

    max_abs_diff: float = 0.5
    valid_range: tuple[float, float] = (0.01, 100.0)
    energy_ratio: float = 10.0

    def score(self, features, window) -> float:
        f = dict(zip(EDA_ARTIFACT_FEATURES, features))
        w = np.asarray(window, dtype=float)
        if f["d1_maxabs"] > self.max_abs_diff:
            return 1.0
        if w.min() < self.valid_range[0] or w.max() > self.valid_range[1]:
            return 1.0
        if f["haar_d1_energy"] > self.energy_ratio * f["haar_a3_energy"]:
            return 1.0
        return 0.0


@dataclass(frozen=True)
class ArtifactFlagSeries:
    dataset_id: str
    participant_id: str
    modality: Modality
    flags: np.ndarray
    window_size: int = WINDOW

    def __post_init__(self):
        f = np.asarray(self.flags, dtype=bool).copy()
        f.setflags(write=False)
        object.__setattr__(self, "flags", f)

    @property
    def n_windows(self) -> int:
        return len(self.flags)

    @property
    def fraction(self) -> float:
        return float(self.flags.mean()) if len(self.flags) else float("nan")


def resample_eda(samples, rate_hz: float, target_hz: float = EDA_RATE) -> np.ndarray:
    """Bring EDA to ``target_hz``: block means for integer ratios, else linear interpolation."""
    x = np.asarray(samples, dtype=float)
    if rate_hz == target_hz:
        return x
    ratio = rate_hz / target_hz
    if ratio > 1 and abs(ratio - round(ratio)) < 1e-9:
        r = int(round(ratio))
        n = len(x) // r
        return x[:n * r].reshape(n, r).mean(axis=1)
    t = np.arange(len(x)) / rate_hz
    grid = np.arange(0.0, t[-1] + 1e-12, 1.0 / target_hz)
    return np.interp(grid, t, x)


def _windows(x, size):
    n = len(x) // size
    return x[:n * size].reshape(n, size)


def detect_eda_artifacts(record: RawSignalRecord, detector: EDADetector | None = None,
                         threshold: float = 0.5) -> ArtifactFlagSeries:
    """Score non-overlapping 60-sample windows of a (4 Hz resampled) EDA record."""
    if record.modality is not Modality.EDA:
        raise ValueError("detect_eda_artifacts needs an EDA record")
    detector = detector or RuleBasedEDADetector()
    x = resample_eda(record.samples, record.sampling_rate_hz)
    wins = _windows(x, WINDOW)
    if not len(wins):
        warnings.warn(f"{record.participant_id}: EDA record shorter than one window", ArtifactWarning, stacklevel=2)
    flags = [detector.score(eda_artifact_features(w), w) > threshold for w in wins]
    return ArtifactFlagSeries(record.dataset_id, record.participant_id, Modality.EDA, flags)


# ---------------------------------------------------------------------------
# PPG

PPGDetector = Callable[[np.ndarray, float], np.ndarray]


def spectral_flatness(block) -> float:
    """Geometric over arithmetic mean of the power spectrum (DC excluded)."""
    p = np.abs(np.fft.rfft(np.asarray(block, dtype=float)))[1:] ** 2
    if p.size == 0 or p.mean() == 0:
        return 1.0
    p = np.maximum(p, 1e-300)
    return float(np.exp(np.mean(np.log(p))) / p.mean())


@dataclass(frozen=True)
class RuleBasedPPGDetector:
    """Per-sample mask from local spectral flatness and pulse presence.

    A sample is flagged when the 1 s block containing it has spectral
    flatness above ``flatness_threshold``, or when no pulse peak falls
    within ``pulse_window_s`` centered on it.
    """

    flatness_threshold: float = 0.6
    flatness_window_s: float = 1.0
    pulse_window_s: float = 2.0

    def __call__(self, samples, rate_hz: float) -> np.ndarray:
        x = np.asarray(samples, dtype=float)
        n = len(x)
        if n < 3:
            return np.ones(n)
        cleaned = clean_ppg(x, rate_hz)
        mask = np.zeros(n)
        block = max(2, int(round(self.flatness_window_s * rate_hz)))
        for start in range(0, n, block):
            seg = cleaned[start:start + block]
            if len(seg) >= 2 and spectral_flatness(seg) > self.flatness_threshold:
                mask[start:start + block] = 1.0
        has_pulse = np.zeros(n)
        has_pulse[detect_ppg_peaks(cleaned, rate_hz)] = 1.0
        half = int(round(self.pulse_window_s * rate_hz / 2))
        near = np.convolve(has_pulse, np.ones(2 * half + 1), mode="same")
        mask[near == 0] = 1.0
        return mask


@dataclass(frozen=True)
class WindowwiseMask:
    """Adapt a per-window mask function ``f(window, rate) -> mask`` to a whole-record detector."""

    fn: Callable[[np.ndarray, float], np.ndarray]
    window: int = WINDOW

    def __call__(self, samples, rate_hz: float) -> np.ndarray:
        x = np.asarray(samples, dtype=float)
        out = np.zeros(len(x))
        for start in range(0, len(x) - self.window + 1, self.window):
            out[start:start + self.window] = self.fn(x[start:start + self.window], rate_hz)
        return out


def window_flags_from_mask(mask, window: int = WINDOW, threshold: float = 0.5) -> np.ndarray:
    """Binarize a probability mask at ``threshold`` and flag windows whose mean exceeds 0.5."""
    m = np.asarray(mask, dtype=float) > threshold
    return _windows(m.astype(float), window).mean(axis=1) > 0.5


def detect_ppg_artifacts(record: RawSignalRecord, detector: PPGDetector | None = None,
                         threshold: float = 0.5) -> ArtifactFlagSeries:
    if record.modality is not Modality.PPG:
        raise ValueError("detect_ppg_artifacts needs a PPG record")
    detector = detector or RuleBasedPPGDetector()
    x = np.asarray(record.samples, dtype=float)
    if len(x) < WINDOW:
        warnings.warn(f"{record.participant_id}: PPG record shorter than one window", ArtifactWarning, stacklevel=2)
        return ArtifactFlagSeries(record.dataset_id, record.participant_id, Modality.PPG, [])
    mask = np.asarray(detector(x, record.sampling_rate_hz), dtype=float)
    if mask.shape != x.shape:
        raise ValueError("PPG detector must return one probability per sample")
    return ArtifactFlagSeries(record.dataset_id, record.participant_id, Modality.PPG,
                              window_flags_from_mask(mask, WINDOW, threshold))


# ---------------------------------------------------------------------------
# aggregation

@dataclass(frozen=True)
class ArtifactReport:
    modality: Modality
    fractions: dict
    mean: float
    std: float

    @property
    def percent(self) -> tuple[float, float]:
        return 100.0 * self.mean, 100.0 * self.std


def artifact_report(series: Iterable[ArtifactFlagSeries]) -> ArtifactReport:
    """Participant-weighted artifact fraction: mean and population std over participants.

    Several series of one participant (e.g. multiple recordings) are pooled
    before the fraction is taken.
    """
    pooled: dict = {}
    modality = None
    for s in series:
        modality = modality or s.modality
        pooled.setdefault((s.dataset_id, s.participant_id), []).append(s.flags)
    fractions = {}
    for key, parts in pooled.items():
        flags = np.concatenate(parts)
        if len(flags):
            fractions[key] = float(flags.mean())
    if not fractions:
        raise ValueError("no artifact windows to aggregate")
    vals = np.array(list(fractions.values()))
    return ArtifactReport(modality, fractions, float(vals.mean()), float(vals.std()))


@dataclass(frozen=True)
class QualityRow:
    dataset: str
    arousal_counts: tuple[int, int]
    valence_counts: tuple[int, int]
    quadrant_counts: tuple[int, int, int, int]
    eda: ArtifactReport | None
    ppg: ArtifactReport | None


def _pct(rep):
    if rep is None:
        return "n/a"
    m, s = rep.percent
    return f"{m:.2f} ± {s:.2f}"


def format_quality_table(rows: Sequence[QualityRow]) -> str:
    """Markdown table: dataset, class counts, EDA and PPG artifact percentages."""
    head = ("| Dataset | Arousal L/H | Valence N/P | HAPV/HANV/LAPV/LANV | EDA artifact % | PPG artifact % |\n"
            "|---|---|---|---|---|---|")
    lines = [head]
    for r in rows:
        lines.append(f"| {r.dataset} | {r.arousal_counts[0]}/{r.arousal_counts[1]} "
                     f"| {r.valence_counts[0]}/{r.valence_counts[1]} "
                     f"| {'/'.join(map(str, r.quadrant_counts))} | {_pct(r.eda)} | {_pct(r.ppg)} |")
    return "\n".join(lines) + "\n"
