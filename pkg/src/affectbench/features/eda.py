"""Electrodermal activity: tonic/phasic split, SCR detection, window statistics."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import signal, stats

from ..core import Modality
from .registry import EDA_FEATURES, FeatureVector

HIGHPASS_HZ = 0.05
MIN_SCR_AMPLITUDE = 0.01   # uS
PRE_APEX_S = 3.0
HALF_RECOVERY_S = 10.0
MIN_DECOMPOSE_S = 2.0


@dataclass(frozen=True)
class SCREvent:
    onset_index: int
    peak_index: int
    amplitude_uS: float
    rise_time_s: float
    half_recovery_time_s: float | None = None

    def __post_init__(self):
        if not self.onset_index < self.peak_index:
            raise ValueError("onset must precede peak")


def decompose_eda(samples, rate_hz: float) -> tuple[np.ndarray, np.ndarray]:
    """Split skin conductance into tonic and phasic parts.

    The phasic part is a first-order Butterworth high-pass at 0.05 Hz run
    forward and backward (zero phase); the tonic part is the remainder, so
    ``tonic + phasic`` reproduces the input.

    Parameters
    ----------
    samples : array_like
        Skin conductance in microsiemens.
    rate_hz : float
        Sampling rate, at least 1 Hz.

    Returns
    -------
    tonic, phasic : ndarray
    """
    x = np.asarray(samples, dtype=float)
    if rate_hz < 1:
        raise ValueError("EDA rate must be >= 1 Hz")
    if len(x) < max(2, int(np.ceil(MIN_DECOMPOSE_S * rate_hz))):
        raise ValueError("insufficient samples for tonic/phasic decomposition")
    b, a = signal.butter(1, HIGHPASS_HZ, btype="highpass", fs=rate_hz)
    padlen = min(3 * max(len(a), len(b)), len(x) - 1)
    phasic = signal.filtfilt(b, a, x, padlen=padlen)
    return x - phasic, phasic


def detect_scr_peaks(phasic, rate_hz: float, min_amplitude: float = MIN_SCR_AMPLITUDE,
                     pre_apex_s: float = PRE_APEX_S, half_recovery_s: float = HALF_RECOVERY_S) -> list[SCREvent]:
    """Find skin conductance responses in a phasic trace.

    Every local maximum is a candidate apex. Its onset is the minimum of the
    trace in the ``pre_apex_s`` seconds before it (never reaching back past
    the previous accepted apex, and at least one sample earlier). Candidates
    rising less than ``min_amplitude`` from their onset are rejected.
    """
    x = np.asarray(phasic, dtype=float)
    if len(x) < 3:
        return []
    apexes, _ = signal.find_peaks(x)
    back = max(1, int(round(pre_apex_s * rate_hz)))
    ahead = int(round(half_recovery_s * rate_hz))
    events: list[SCREvent] = []
    last = 0
    for p in apexes:
        lo = max(p - back, last, 0)
        if lo >= p:
            continue
        onset = lo + int(np.argmin(x[lo:p]))
        amp = x[p] - x[onset]
        if amp < min_amplitude:
            continue
        half = x[p] - amp / 2
        tail = x[p + 1:p + 1 + ahead]
        below = np.flatnonzero(tail < half)
        recovery = float(below[0] + 1) / rate_hz if below.size else None
        events.append(SCREvent(onset, int(p), float(amp), (p - onset) / rate_hz, recovery))
        last = int(p)
    return events


def _shannon_bits(counts) -> float:
    p = np.asarray(counts, dtype=float)
    p = p[p > 0] / p.sum()
    return float(-(p * np.log2(p)).sum()) + 0.0


def _moments(x):
    if np.ptp(x) == 0:
        return 0.0, 0.0
    return float(stats.kurtosis(x, fisher=True, bias=True)), float(stats.skew(x, bias=True))


def _slope(x, rate_hz):
    if len(x) < 2:
        return 0.0
    t = np.arange(len(x)) / rate_hz
    tc = t - t.mean()
    return float(np.dot(tc, x - x.mean()) / np.dot(tc, tc))


def scr_summary(events: list[SCREvent]) -> dict[str, float]:
    amps = np.array([e.amplitude_uS for e in events])
    resp = np.array([e.half_recovery_time_s for e in events if e.half_recovery_time_s is not None])
    return {
        "nSCR": float(len(events)),
        "meanAmpSCR": float(amps.mean()) if amps.size else 0.0,
        "meanRespSCR": float(resp.mean()) if resp.size else 0.0,
        "sumAmpSCR": float(amps.sum()),
        "sumRespSCR": float(resp.sum()),
    }


def eda_features(samples, rate_hz: float, segment_id: str = "") -> FeatureVector:
    """The fifteen handcrafted EDA features of one window or segment.

    Windows shorter than two seconds skip the high-pass split: their phasic
    part is the mean-removed signal and no SCRs are counted.
    """
    x = np.asarray(samples, dtype=float)
    if x.size == 0:
        raise ValueError("empty EDA window")
    if not np.all(np.isfinite(x)):
        raise ValueError("non-finite EDA samples")
    try:
        _, phasic = decompose_eda(x, rate_hz)
        events = detect_scr_peaks(phasic, rate_hz)
    except ValueError:
        phasic = x - x.mean()
        events = []
    ku, sk = _moments(x)
    counts, _ = np.histogram(x, bins=10)
    out = {
        "ku_eda": ku,
        "sk_eda": sk,
        "dynrange": float(np.ptp(x)),
        "slope": _slope(x, rate_hz),
        "variance": float(np.var(x)),
        "entropy": _shannon_bits(counts),
        "insc": float(np.trapezoid(np.abs(x), dx=1.0 / rate_hz)),
        "first_derivative_mean": float(np.mean(np.diff(x)) * rate_hz) if len(x) > 1 else 0.0,
        "max_scr": float(phasic.max()),
        "min_scr": float(phasic.min()),
    }
    out.update(scr_summary(events))
    return FeatureVector(EDA_FEATURES, [out[n] for n in EDA_FEATURES], segment_id, Modality.EDA)
