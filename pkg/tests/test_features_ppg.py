import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from affectbench.core import Modality
from affectbench.features import (DEFAULT_REGISTRY, EDA_FEATURES, HRV_FEATURES, HRV_STUBS, FeatureRegistry,
                                  FeatureVector, IBISeries, band_powers, clean_ppg, combine_features,
                                  detect_ppg_peaks, hrv_features, ibi_series, ppg_features)

FS = 64.0


def _gain(freq, seconds=60.0):
    t = np.arange(int(seconds * FS)) / FS
    x = np.sin(2 * np.pi * freq * t)
    y = clean_ppg(x, FS)
    mid = slice(len(t) // 4, 3 * len(t) // 4)
    return np.sqrt(np.mean(y[mid] ** 2) / np.mean(x[mid] ** 2))


def test_in_band_gain():
    assert abs(_gain(1.2) - 1) < 0.05


def test_drift_attenuated():
    assert 20 * np.log10(_gain(0.05, seconds=200.0)) < -20


def test_zero_input_and_low_rate():
    assert np.all(clean_ppg(np.zeros(500), FS) == 0)
    with pytest.raises(ValueError, match="rate too low"):
        clean_ppg(np.zeros(500), 8.0)


def test_sinusoid_peak_count():
    t = np.arange(int(60 * FS)) / FS
    peaks = detect_ppg_peaks(clean_ppg(np.sin(2 * np.pi * t), FS), FS)
    assert abs(len(peaks) - 60) <= 1


def test_flat_signal_no_peaks():
    assert len(detect_ppg_peaks(np.zeros(640), FS)) == 0


def test_close_maxima_keep_larger():
    t = np.arange(int(4 * FS)) / FS
    x = np.exp(-0.5 * ((t - 2.0) / 0.03) ** 2) + 0.6 * np.exp(-0.5 * ((t - 2.2) / 0.03) ** 2)
    peaks = detect_ppg_peaks(x, FS)
    assert peaks.tolist() == [int(round(2.0 * FS))]


def test_ibi_examples():
    assert np.all(ibi_series(np.arange(0, 640, 64), FS).nn_intervals_ms == 1000.0)
    beats = np.cumsum([0] + [800] * 5 + [2500] + [800] * 5) / 1000 * FS
    nn = ibi_series(np.round(beats).astype(int), FS).nn_intervals_ms
    assert len(nn) == 10 and np.all(np.abs(nn - 800) < 16)
    with pytest.raises(ValueError, match="insufficient NN"):
        ibi_series([10], FS)


def test_constant_nn_features():
    fv = hrv_features(IBISeries(np.full(100, 800.0)))
    assert fv["BPM"] == 75 and fv["HRV_MedianNN"] == 800 and fv["HRV_SD1"] == 0
    # every interval falls in one histogram bin, so the index is N divided by that bin's count
    assert fv["HRV_HTI"] == 1.0


def test_lf_modulation_dominates():
    times, nn, t = [], [], 0.0
    while t < 300:
        v = 1000.0 + 50.0 * np.sin(2 * np.pi * 0.1 * t)
        t += v / 1000
        nn.append(v)
        times.append(t)
    fv = hrv_features(IBISeries(np.array(nn), np.array(times)))
    assert fv["HRV_LFn"] > 0.8 and fv["HRV_LFn"] + fv["HRV_HFn"] == pytest.approx(1.0)


def test_hf_modulation_dominates():
    times, nn, t = [], [], 0.0
    while t < 300:
        v = 900.0 + 40.0 * np.sin(2 * np.pi * 0.25 * t)
        t += v / 1000
        nn.append(v)
        times.append(t)
    p = band_powers(IBISeries(np.array(nn), np.array(times)))
    assert p["HF"] > 4 * p["LF"]


@settings(max_examples=60, deadline=None)
@given(n=st.integers(8, 200), mean=st.floats(400, 1500), sd=st.floats(0, 80), seed=st.integers(0, 2 ** 32 - 1))
def test_hrv_invariants(n, mean, sd, seed):
    nn = np.clip(np.random.default_rng(seed).normal(mean, sd, n), 300, 2000)
    fv = hrv_features(IBISeries(nn))
    assert fv["BPM"] * nn.mean() == pytest.approx(60000, rel=1e-12)
    assert fv["HRV_SD1"] >= 0 and fv["HRV_SD2"] >= 0
    if np.isfinite(fv["HRV_LF"]):
        assert fv["HRV_LF"] >= 0 and fv["HRV_HF"] >= 0 and fv["HRV_VHF"] >= 0
        if fv["HRV_LF"] + fv["HRV_HF"] > 0:
            assert fv["HRV_LFn"] + fv["HRV_HFn"] == pytest.approx(1.0)


def test_short_series_flags_instead_of_raising():
    fv = hrv_features(IBISeries(np.full(5, 800.0)))
    assert np.all(np.isnan(fv.values)) and any("fewer than" in f for f in fv.flags)
    fv = hrv_features(IBISeries(np.full(40, 800.0)))
    assert np.isnan(fv["HRV_LF"]) and np.isfinite(fv["BPM"])
    assert any(f.startswith("frequency") for f in fv.flags)


def test_ppg_features_on_pulse_train():
    t = np.arange(int(120 * FS)) / FS
    beats = np.arange(0.3, 120, 60 / 72)
    x = sum(np.exp(-0.5 * ((t - b) / 0.08) ** 2) for b in beats)
    fv = ppg_features(x, FS, "s")
    assert fv.names == DEFAULT_REGISTRY.ppg and len(fv) == 39
    assert fv["BPM"] == pytest.approx(72, abs=0.5)
    assert all(np.isnan(fv[n]) for n in HRV_STUBS)


def test_ppg_features_failure_is_nan_row():
    fv = ppg_features(np.zeros(640), FS, "s")
    assert np.all(np.isnan(fv.values)) and fv.flags[0].startswith("all:")


def test_registry_extractor_fills_stub():
    reg = FeatureRegistry(extractors={"HRV_PI": lambda nn: float(len(nn))})
    t = np.arange(int(90 * FS)) / FS
    x = np.sin(2 * np.pi * 1.1 * t)
    fv = ppg_features(x, FS, registry=reg)
    assert fv["HRV_PI"] > 80
    with pytest.raises(ValueError):
        FeatureRegistry(extractors={"BPM": len})


def test_registry_layout():
    assert len(EDA_FEATURES) == 15 and len(HRV_FEATURES) == 19 and len(HRV_STUBS) == 20
    assert len(DEFAULT_REGISTRY.columns("combined")) == 54
    assert DEFAULT_REGISTRY.columns("combined") == EDA_FEATURES + HRV_FEATURES + HRV_STUBS


def _fv(names, seg="s", modality=Modality.EDA, values=None, flags=()):
    return FeatureVector(tuple(names), values if values is not None else np.arange(len(names), dtype=float),
                         seg, modality, flags)


def test_combine_lengths_add():
    eda = _fv([f"e{i}" for i in range(15)])
    ppg = _fv([f"p{i}" for i in range(22)], modality=Modality.PPG)
    combined = combine_features(eda, ppg)
    assert len(combined) == 37 and combined.modality is Modality.COMBINED


def test_combine_errors_and_pass_through():
    eda = _fv(["a", "b"])
    with pytest.raises(ValueError):
        combine_features(eda, _fv(["c"], seg="other", modality=Modality.PPG))
    with pytest.raises(ValueError):
        combine_features(eda, _fv(["a"], modality=Modality.PPG))
    empty = _fv(["c", "d"], modality=Modality.PPG, values=np.full(2, np.nan), flags=("all: no peaks",))
    combined = combine_features(eda, empty)
    assert len(combined) == 4 and combined.flags == ("ppg/all: no peaks",)


def test_feature_vector_is_read_only_and_sanitized():
    fv = _fv(["a", "b"], values=np.array([1.0, np.inf]))
    assert np.isnan(fv["b"])
    with pytest.raises(ValueError):
        fv.values[0] = 3
    assert fv.reindex(["b", "z", "a"]).values[2] == 1.0
