"""PPG cleaning, pulse detection and heart-rate-variability features."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import signal
from scipy.ndimage import uniform_filter1d

from ..core import Modality
from .registry import DEFAULT_REGISTRY, HRV_FEATURES, FeatureRegistry, FeatureVector

MIN_PPG_RATE = 16.0
PULSE_BAND_HZ = (0.5, 8.0)
THRESHOLD_WINDOW_S = 2.0
MIN_PEAK_DISTANCE_S = 0.33
NN_GATE_MS = (300.0, 2000.0)
HIST_BIN_MS = 7.8125
RESAMPLE_HZ = 4.0
MIN_INTERVALS = 8
MIN_SPECTRAL_SPAN_S = 60.0
BANDS = {"LF": (0.04, 0.15), "HF": (0.15, 0.4), "VHF": (0.4, 0.5)}


def _zero_phase(sos, x):
    # short inputs: shrink the edge padding instead of refusing
    ntaps = 2 * len(sos) + 1
    padlen = min(3 * ntaps, len(x) - 1)
    return signal.sosfiltfilt(sos, x, padlen=max(padlen, 0))


def clean_ppg(samples, rate_hz: float) -> np.ndarray:
    """Band-pass 0.5-8 Hz (3rd-order Butterworth, forward-backward).

    At rates where 8 Hz reaches Nyquist the upper edge is lowered to
    0.45 x rate.
    """
    if rate_hz < MIN_PPG_RATE:
        raise ValueError(f"rate too low for pulse band ({rate_hz} Hz < {MIN_PPG_RATE} Hz)")
    x = np.asarray(samples, dtype=float)
    if len(x) < 2:
        return x.copy()
    hi = min(PULSE_BAND_HZ[1], 0.45 * rate_hz)
    sos = signal.butter(3, [PULSE_BAND_HZ[0], hi], btype="bandpass", fs=rate_hz, output="sos")
    return _zero_phase(sos, x)


def detect_ppg_peaks(cleaned, rate_hz: float) -> np.ndarray:
    """Pulse peaks: local maxima above a 2 s centered moving mean, >= 0.33 s apart."""
    x = np.asarray(cleaned, dtype=float)
    if len(x) < 3:
        return np.empty(0, dtype=int)
    size = max(1, int(round(THRESHOLD_WINDOW_S * rate_hz)))
    floor = uniform_filter1d(x, size=size, mode="nearest")
    distance = max(1, int(round(MIN_PEAK_DISTANCE_S * rate_hz)))
    peaks, _ = signal.find_peaks(x, height=floor, distance=distance)
    return peaks.astype(int)


@dataclass(frozen=True)
class IBISeries:
    """Gated inter-beat intervals.

    ``times_s`` holds the time of the beat closing each interval, so the
    series keeps its place on the clock when intervals are dropped.
    """

    nn_intervals_ms: np.ndarray
    times_s: np.ndarray = field(default=None)

    def __post_init__(self):
        nn = np.asarray(self.nn_intervals_ms, dtype=float)
        t = np.cumsum(nn) / 1000.0 if self.times_s is None else np.asarray(self.times_s, dtype=float)
        if len(t) != len(nn):
            raise ValueError("times and intervals differ in length")
        object.__setattr__(self, "nn_intervals_ms", nn)
        object.__setattr__(self, "times_s", t)

    def __len__(self):
        return len(self.nn_intervals_ms)

    @property
    def span_s(self) -> float:
        """Time from the first to the last beat."""
        if not len(self):
            return 0.0
        return float(self.times_s[-1] - self.times_s[0] + self.nn_intervals_ms[0] / 1000.0)


def ibi_series(peaks, rate_hz: float) -> IBISeries:
    p = np.asarray(peaks, dtype=float)
    if len(p) < 2:
        raise ValueError("insufficient NN intervals: fewer than 2 peaks")
    nn = 1000.0 * np.diff(p) / rate_hz
    keep = (nn >= NN_GATE_MS[0]) & (nn <= NN_GATE_MS[1])
    if keep.sum() < 2:
        raise ValueError("insufficient NN intervals after physiological gating")
    return IBISeries(nn[keep], p[1:][keep] / rate_hz)


# ---------------------------------------------------------------------------
# feature groups

def _histogram(nn):
    idx = np.floor(nn / HIST_BIN_MS).astype(int)
    return np.bincount(idx - idx.min())


def _tinn(counts) -> float:
    """Base width of the least-squares triangle fitted to the NN histogram.

    The triangle peaks at the histogram mode and falls to zero at bins
    ``m < mode < n``; one empty bin is padded on each side so the base can
    extend past the occupied range.
    """
    d = np.concatenate([[0.0], counts.astype(float), [0.0]])
    x = int(np.argmax(d))
    peak = d[x]
    k = np.arange(len(d))
    best, width = np.inf, 0
    for m in range(0, x):
        left = np.where((k > m) & (k <= x), peak * (k - m) / (x - m), 0.0)
        for n in range(x + 1, len(d)):
            q = left + np.where((k > x) & (k < n), peak * (n - k) / (n - x), 0.0)
            err = float(np.sum((d - q) ** 2))
            if err < best:
                best, width = err, n - m
    return width * HIST_BIN_MS


def _apen(x, m=2, r=None) -> float:
    x = np.asarray(x, dtype=float)
    n = len(x)
    if r is None:
        r = 0.2 * np.std(x)

    def phi(mm):
        emb = np.lib.stride_tricks.sliding_window_view(x, mm)
        dist = np.abs(emb[:, None, :] - emb[None, :, :]).max(axis=-1)
        c = (dist <= r).mean(axis=1)
        return float(np.mean(np.log(c)))

    if n < m + 2:
        return np.nan
    return phi(m) - phi(m + 1)


def _time_domain(nn):
    return {
        "BPM": 60000.0 / nn.mean(),
        "PPG_Rate_Mean": float(np.mean(60000.0 / nn)),
        "HRV_MedianNN": float(np.median(nn)),
        "HRV_Prc20NN": float(np.percentile(nn, 20)),
        "HRV_MinNN": float(nn.min()),
    }


def _geometric(nn):
    counts = _histogram(nn)
    return {"HRV_HTI": len(nn) / counts.max(), "HRV_TINN": _tinn(counts)}


def _poincare(nn):
    # spread across and along the identity line of the (NN_i, NN_i+1) plot
    sd1 = np.std(np.diff(nn)) / np.sqrt(2.0)
    sd2 = np.std(nn[1:] + nn[:-1]) / np.sqrt(2.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        return {
            "HRV_SD1": float(sd1),
            "HRV_SD2": float(sd2),
            "HRV_SD1SD2": float(sd1 / sd2) if sd2 > 0 else np.nan,
            "HRV_CVI": float(np.log10((4 * sd1) * (4 * sd2))) if sd1 * sd2 > 0 else np.nan,
        }


def _entropy(nn):
    counts = _histogram(nn)
    p = counts[counts > 0] / counts.sum()
    return {"HRV_ApEn": _apen(nn), "HRV_ShanEn": float(-(p * np.log2(p)).sum()) + 0.0}


def band_powers(ibi: IBISeries) -> dict[str, float]:
    """LF/HF/VHF power (ms^2) from a Welch PSD of the 4 Hz resampled NN series."""
    t = ibi.times_s
    grid = np.arange(t[0], t[-1] + 1e-9, 1.0 / RESAMPLE_HZ)
    series = np.interp(grid, t, ibi.nn_intervals_ms)
    nperseg = min(256, len(series))
    freqs, psd = signal.welch(series, fs=RESAMPLE_HZ, window="hann", nperseg=nperseg,
                              noverlap=nperseg // 2, detrend="constant")
    df = freqs[1] - freqs[0]
    out = {}
    for name, (lo, hi) in BANDS.items():
        mask = (freqs >= lo) & ((freqs < hi) if name != "VHF" else (freqs <= hi))
        out[name] = float(psd[mask].sum() * df)
    return out


def _frequency(ibi):
    p = band_powers(ibi)
    lf, hf = p["LF"], p["HF"]
    total = lf + hf
    return {
        "HRV_LF": lf,
        "HRV_HF": hf,
        "HRV_VHF": p["VHF"],
        "HRV_LFn": lf / total if total > 0 else np.nan,
        "HRV_HFn": hf / total if total > 0 else np.nan,
        "HRV_LnHF": float(np.log(hf)) if hf > 0 else np.nan,
    }


def hrv_features(ibi: IBISeries, segment_id: str = "") -> FeatureVector:
    """Time, geometric, Poincare, entropy and frequency HRV features.

    A group whose precondition fails (fewer than 8 intervals; less than
    60 s of beats for the frequency group) yields NaN entries and a flag
    instead of raising, so the row can be imputed.
    """
    nn = ibi.nn_intervals_ms
    values = dict.fromkeys(HRV_FEATURES, np.nan)
    flags = []
    groups = [("time", _time_domain, nn), ("geometric", _geometric, nn),
              ("poincare", _poincare, nn), ("entropy", _entropy, nn)]
    for name, fn, arg in groups:
        if len(nn) < MIN_INTERVALS:
            flags.append(f"{name}: fewer than {MIN_INTERVALS} intervals")
            continue
        values.update(fn(arg))
    if ibi.span_s < MIN_SPECTRAL_SPAN_S or len(nn) < 2:
        flags.append(f"frequency: span {ibi.span_s:.1f} s < {MIN_SPECTRAL_SPAN_S:g} s")
    else:
        values.update(_frequency(ibi))
    return FeatureVector(HRV_FEATURES, [values[k] for k in HRV_FEATURES], segment_id, Modality.PPG, tuple(flags))


def ppg_features(samples, rate_hz: float, segment_id: str = "",
                 registry: FeatureRegistry = DEFAULT_REGISTRY) -> FeatureVector:
    """Full PPG column set for one segment: clean, detect, gate, summarize.

    Reserved names are filled by the registry's extractors when present,
    otherwise left NaN.
    """
    try:
        ibi = ibi_series(detect_ppg_peaks(clean_ppg(samples, rate_hz), rate_hz), rate_hz)
    except ValueError as exc:
        return FeatureVector(registry.ppg, np.full(len(registry.ppg), np.nan), segment_id,
                             Modality.PPG, (f"all: {exc}",))
    fv = hrv_features(ibi, segment_id)
    vals = fv.as_dict()
    for name in registry.stubs:
        fn = registry.extractors.get(name)
        vals[name] = float(fn(ibi.nn_intervals_ms)) if fn is not None else np.nan
    return FeatureVector(registry.ppg, [vals.get(n, np.nan) for n in registry.ppg], segment_id,
                         Modality.PPG, fv.flags)
