import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from affectbench.artifacts import (EDA_ARTIFACT_FEATURES, ArtifactFlagSeries, ArtifactWarning, QualityRow,
                                   RuleBasedEDADetector, RuleBasedPPGDetector, artifact_report,
                                   detect_eda_artifacts, detect_ppg_artifacts, eda_artifact_features,
                                   format_quality_table, haar_dwt, resample_eda, spectral_flatness,
                                   window_flags_from_mask)
from affectbench.core import Modality, RawSignalRecord
from affectbench.synth import SynthSpec, generate_corpus


def _eda(x, rate=4.0, pid="p"):
    return RawSignalRecord("D", pid, Modality.EDA, rate, np.asarray(x, dtype=float))


def _ppg(x, rate=64.0, pid="p"):
    return RawSignalRecord("D", pid, Modality.PPG, rate, np.asarray(x, dtype=float))


def _series(flags, pid="p", modality=Modality.EDA):
    return ArtifactFlagSeries("D", pid, modality, flags)


# ---------------------------------------------------------------------------
# Haar transform

def test_haar_constant_has_zero_details():
    details, approx = haar_dwt(np.full(60, 4.2))
    assert all(np.all(d == 0) for d in details)
    assert len(approx) == 8


def test_haar_preserves_energy_for_power_of_two():
    x = np.random.default_rng(0).normal(size=64)
    details, approx = haar_dwt(x)
    energy = sum(np.sum(d * d) for d in details) + np.sum(approx * approx)
    assert energy == pytest.approx(np.sum(x * x), rel=1e-12)


def test_haar_step_concentrates_in_level_one():
    x = np.r_[np.zeros(31), np.ones(29)]
    details, _ = haar_dwt(x)
    assert np.abs(details[0]).max() > np.abs(details[2]).max()


# ---------------------------------------------------------------------------
# EDA

@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), scale=st.floats(0.01, 10))
def test_eda_feature_vector_shape(seed, scale):
    w = 5 + scale * np.random.default_rng(seed).normal(size=60)
    f = eda_artifact_features(w)
    assert f.shape == (36,) == (len(EDA_ARTIFACT_FEATURES),) and np.all(np.isfinite(f))


def test_eda_feature_window_length_enforced():
    with pytest.raises(ValueError):
        eda_artifact_features(np.ones(59))


def test_rule_detector_jump_and_smooth():
    det = RuleBasedEDADetector()
    jump = np.r_[np.full(30, 2.0), np.full(30, 2.8)]
    smooth = np.linspace(2.0, 2.3, 60)
    assert det.score(eda_artifact_features(jump), jump) == 1.0
    assert det.score(eda_artifact_features(smooth), smooth) == 0.0


def test_rule_detector_out_of_range():
    w = np.full(60, 0.001)
    assert RuleBasedEDADetector().score(eda_artifact_features(w), w) == 1.0


class _Constant:
    def __init__(self, p):
        self.p = p

    def score(self, features, window):
        return self.p


@pytest.mark.parametrize("length", [59, 60, 61, 179, 180, 1000])
def test_flag_count_is_floor(length):
    rec = _eda(np.linspace(3, 4, length))
    if length < 60:
        with pytest.warns(ArtifactWarning):
            s = detect_eda_artifacts(rec, _Constant(0.0))
    else:
        s = detect_eda_artifacts(rec, _Constant(0.0))
    assert s.n_windows == length // 60 and not s.flags.any()


def test_constant_detectors():
    rec = _eda(np.linspace(3, 4, 600))
    assert detect_eda_artifacts(rec, _Constant(1.0)).fraction == 1.0
    assert detect_eda_artifacts(rec, _Constant(0.5)).fraction == 0.0


def test_resample_block_means():
    assert resample_eda(np.arange(8.0), 8.0).tolist() == [0.5, 2.5, 4.5, 6.5]
    assert len(resample_eda(np.arange(40.0), 10.0)) == 16
    x = np.arange(5.0)
    assert resample_eda(x, 4.0) is x


def test_detectors_reject_wrong_modality():
    with pytest.raises(ValueError):
        detect_eda_artifacts(_ppg(np.zeros(600)))
    with pytest.raises(ValueError):
        detect_ppg_artifacts(_eda(np.zeros(600)))


def test_injected_steps_raise_eda_artifact_rate():
    spec = SynthSpec(n_participants=2, segments_per_quadrant=1)
    eda = [r for r in generate_corpus(spec).records if r.modality is Modality.EDA]
    clean = artifact_report(detect_eda_artifacts(r) for r in eda)
    noisy = []
    for r in eda:
        x = r.samples.copy()
        x[::90] += 2.0
        noisy.append(detect_eda_artifacts(_eda(x, r.sampling_rate_hz, r.participant_id)))
    assert clean.mean < 0.02
    assert artifact_report(noisy).mean > 0.5


# ---------------------------------------------------------------------------
# PPG

def test_mask_majority_rule():
    m = np.zeros(60)
    m[:31] = 1
    assert window_flags_from_mask(m).tolist() == [True]
    m[30] = 0
    assert window_flags_from_mask(m).tolist() == [False]


def test_mask_binarized_before_averaging():
    assert window_flags_from_mask(np.full(60, 0.6)).tolist() == [True]
    assert window_flags_from_mask(np.full(60, 0.4)).tolist() == [False]


def test_ppg_detector_output_shape_checked():
    with pytest.raises(ValueError):
        detect_ppg_artifacts(_ppg(np.zeros(600)), lambda x, fs: np.zeros(10))


def test_ppg_short_record_warns():
    with pytest.warns(ArtifactWarning):
        assert detect_ppg_artifacts(_ppg(np.zeros(30))).n_windows == 0


def test_spectral_flatness_extremes():
    t = np.arange(64) / 64
    assert spectral_flatness(np.sin(2 * np.pi * 4 * t)) < 0.01
    assert spectral_flatness(np.zeros(64)) == 1.0
    noise = np.random.default_rng(0).normal(size=4096)
    assert spectral_flatness(noise) > 0.5


def test_rule_ppg_detector_clean_vs_flat():
    spec = SynthSpec(n_participants=1, segments_per_quadrant=1, ppg_noise=0.01)
    ppg = next(r for r in generate_corpus(spec).records if r.modality is Modality.PPG)
    assert detect_ppg_artifacts(ppg).fraction < 0.05
    flat = detect_ppg_artifacts(_ppg(np.zeros(64 * 30)))
    assert flat.fraction == 1.0
    assert RuleBasedPPGDetector()(np.zeros(2), 64.0).tolist() == [1.0, 1.0]


# ---------------------------------------------------------------------------
# aggregation

def test_report_mean_and_population_std():
    rep = artifact_report([_series([1, 0, 0, 0, 0], "a"), _series([1, 1, 0, 0, 0], "b")])
    assert rep.mean == pytest.approx(0.3) and rep.std == pytest.approx(0.1)
    assert rep.percent == pytest.approx((30.0, 10.0))


def test_report_single_clean_participant():
    rep = artifact_report([_series([0, 0, 0])])
    assert (rep.mean, rep.std) == (0.0, 0.0)


def test_report_pools_recordings_of_one_participant():
    rep = artifact_report([_series([1, 0]), _series([0, 0])])
    assert rep.fractions == {("D", "p"): 0.25}


def test_report_without_windows_raises():
    with pytest.raises(ValueError):
        artifact_report([_series([])])
    with pytest.raises(ValueError):
        artifact_report([])


def test_quality_table_format():
    rep = artifact_report([_series([1, 0, 0, 0])])
    table = format_quality_table([QualityRow("X", (3, 5), (4, 4), (1, 2, 3, 2), rep, None)])
    lines = table.splitlines()
    assert len(lines) == 3 and lines[2] == "| X | 3/5 | 4/4 | 1/2/3/2 | 25.00 ± 0.00 | n/a |"
