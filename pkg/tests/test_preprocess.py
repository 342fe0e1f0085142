import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from affectbench.preprocess import (FeatureTable, RebalanceWarning, ceil_fraction, imbalance_exceeds_one_third,
                                    impute_per_participant, minmax_normalize, oversample_indices,
                                    random_oversample, rebalance, shuffle_labels, smote, smote_samples,
                                    window_signal, zscore_by_participant, zscore_normalize)


def _table(X, pids=None, a=None, v=None):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    n = len(X)
    pids = pids if pids is not None else ["p"] * n
    return FeatureTable(["D"] * n, pids, [f"s{i}" for i in range(n)], tuple(f"f{j}" for j in range(X.shape[1])),
                        X, a if a is not None else [i % 2 for i in range(n)], v if v is not None else [0] * n)


# ---------------------------------------------------------------------------
# windowing

def test_window_l120():
    wins = window_signal(np.arange(120.0))
    assert [w.start_sample for w in wins] == [0, 30, 60] and not any(w.padded for w in wins)


def test_window_exact_fit():
    wins = window_signal(np.ones(60))
    assert len(wins) == 1 and not wins[0].padded


def test_window_short_input():
    wins = window_signal(np.ones(45))
    assert len(wins) == 1 and wins[0].padded
    assert np.all(wins[0].samples[45:] == 0) and np.all(wins[0].samples[:45] == 1)


def test_window_remainder_is_padded():
    wins = window_signal(np.arange(100.0))
    assert [(w.start_sample, w.padded) for w in wins] == [(0, False), (30, False), (60, True)]
    assert wins[-1].samples[:40].tolist() == list(range(60, 100)) and np.all(wins[-1].samples[40:] == 0)


@settings(max_examples=100, deadline=None)
@given(n=st.integers(60, 3000), size=st.sampled_from([20, 60, 64]), overlap=st.sampled_from([0.0, 0.25, 0.5]))
def test_window_overlap_property(n, size, overlap):
    wins = [w for w in window_signal(np.arange(float(n)), size, overlap) if not w.padded]
    stride = round(size * (1 - overlap))
    assert all(b.start_sample - a.start_sample == stride for a, b in zip(wins, wins[1:]))
    for a, b in zip(wins, wins[1:]):
        assert len(np.intersect1d(a.samples, b.samples)) == size - stride


# ---------------------------------------------------------------------------
# normalization

def test_minmax_examples():
    assert minmax_normalize(_table([2, 4, 6])).X[:, 0].tolist() == [0, 0.5, 1]
    assert minmax_normalize(_table([3, 3, 3])).X[:, 0].tolist() == [0, 0, 0]


def test_minmax_per_participant_oracle():
    rng = np.random.default_rng(0)
    X = np.vstack([rng.uniform(0, 1, (5, 3)), rng.uniform(100, 200, (7, 3))])
    pids = ["a"] * 5 + ["b"] * 7
    out = minmax_normalize(_table(X, pids)).X
    for sl in (slice(0, 5), slice(5, 12)):
        block = X[sl]
        expect = (block - block.min(0)) / (block.max(0) - block.min(0))
        assert np.allclose(out[sl], expect, atol=1e-12)


def test_minmax_rejects_nan():
    with pytest.raises(ValueError):
        minmax_normalize(_table([1.0, np.nan]))


def test_zscore_examples():
    assert np.allclose(zscore_normalize([1, 2, 3]), [-1.224744871391589, 0, 1.224744871391589], atol=1e-12)
    assert zscore_normalize([5, 5, 5]).tolist() == [0, 0, 0]
    z = zscore_normalize(np.random.default_rng(1).normal(size=500))
    assert np.allclose(zscore_normalize(z), z, atol=1e-9)


def test_zscore_by_participant():
    out = zscore_by_participant({"a": [1, 2, 3], "b": [10, 10, 40]})
    assert set(out) == {"a", "b"} and abs(out["b"].mean()) < 1e-12


def test_normalizers_preserve_labels_and_order():
    t = _table(np.arange(12.0).reshape(6, 2), ["a", "b"] * 3, [1, 0, 1, 1, 0, 0], [0, 0, 1, 1, 0, 1])
    out = minmax_normalize(t)
    assert out.segment_ids.tolist() == t.segment_ids.tolist()
    assert np.array_equal(out.arousal, t.arousal) and np.array_equal(out.valence, t.valence)


def test_impute_median_then_zero():
    X = np.array([[1.0, np.nan], [np.nan, np.nan], [3.0, np.inf], [np.nan, 5.0]])
    out, counts = impute_per_participant(_table(X, ["a", "a", "a", "b"]))
    assert out.X.tolist() == [[1, 0], [2, 0], [3, 0], [0, 5]]
    assert counts == {"f0": 2, "f1": 3}


# ---------------------------------------------------------------------------
# table I/O

def test_feature_table_csv_roundtrip():
    rng = np.random.default_rng(2)
    t = _table(rng.normal(size=(5, 3)), ["a", "a", "b", "b", "b"], [1, 0, 1, 0, 1], [0, 0, 1, 1, 1])
    buf = io.StringIO()
    t.write_csv(buf)
    header = buf.getvalue().splitlines()[0]
    assert header == "dataset_id,participant_id,segment_id,f0,f1,f2,arousal,valence,quadrant"
    back = FeatureTable.read_csv(io.StringIO(buf.getvalue()))
    assert np.array_equal(back.X, t.X) and np.array_equal(back.quadrant, t.quadrant)
    assert back.participant_ids.tolist() == t.participant_ids.tolist()


def test_quadrant_codes():
    t = _table(np.zeros(4), a=[1, 1, 0, 0], v=[1, 0, 1, 0])
    assert t.quadrant.tolist() == [0, 1, 2, 3]


# ---------------------------------------------------------------------------
# rebalancing

@pytest.mark.parametrize("counts,expected", [((90, 60), False), ((100, 50), True), ((50, 50), False)])
def test_one_third_rule(counts, expected):
    y = [0] * counts[0] + [1] * counts[1]
    assert imbalance_exceeds_one_third(y) is expected


def test_one_third_rule_total_denominator():
    y = [0] * 100 + [1] * 50
    assert imbalance_exceeds_one_third(y, denominator="total") is False


def test_one_third_rule_degenerate():
    with pytest.raises(ValueError, match="degenerate"):
        imbalance_exceeds_one_third([1, 1, 1])


def test_random_oversample_10_4():
    X = np.arange(14.0)
    t = _table(X, a=[0] * 10 + [1] * 4)
    out = random_oversample(t, "arousal", seed=7)
    assert np.bincount(out.arousal).tolist() == [10, 10]
    extra = out.X[14:, 0]
    assert len(extra) == 6 and set(extra) <= set(X[10:])


def test_random_oversample_balanced_and_deterministic():
    t = _table(np.arange(6.0), a=[0, 1] * 3)
    assert random_oversample(t, "arousal") is t
    u = _table(np.arange(9.0), a=[0] * 6 + [1] * 3)
    assert np.array_equal(random_oversample(u, seed=1).X, random_oversample(u, seed=1).X)


def test_oversample_indices_keeps_originals_first():
    idx = oversample_indices(np.array([0, 0, 0, 1]), np.random.default_rng(0))
    assert idx[:4].tolist() == [0, 1, 2, 3] and set(idx[4:]) == {3}


def test_smote_two_point_minority():
    X = np.array([[5.0, 5.0], [6.0, 5.0], [5.0, 6.0], [0.0, 0.0], [1.0, 1.0]])
    y = np.array([0, 0, 0, 1, 1])
    Xn, yn, _ = smote_samples(X, y, k=5, rng=np.random.default_rng(0))
    assert len(Xn) == 1 and yn.tolist() == [1]
    p = Xn[0]
    assert abs(p[0] - p[1]) < 1e-9 and 0 <= p[0] <= 1


def test_smote_balanced_noop_and_clamp():
    t = _table(np.arange(4.0), a=[0, 1, 0, 1])
    assert smote(t, "arousal") is t
    X = np.random.default_rng(3).normal(size=(13, 2))
    y = np.array([0] * 10 + [1] * 3)
    Xn, yn, _ = smote_samples(X, y, k=5)
    assert len(yn) == 7


def test_smote_single_row_falls_back():
    X = np.arange(5.0)[:, None]
    with pytest.warns(RebalanceWarning):
        Xn, yn, src = smote_samples(X, np.array([0, 0, 0, 0, 1]))
    assert np.all(Xn == 4.0) and np.all(src == 4)


def test_rebalance_policies():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(40, 3))
    y = np.array([0] * 30 + [1] * 10)
    Xp, yp, notes = rebalance(X, y, "paper", np.random.default_rng(1))
    assert "smote" in notes and np.bincount(yp).tolist() == [30, 30]
    # SMOTE rows are new points, not duplicates
    assert len(np.unique(Xp, axis=0)) > 40
    Xo, yo, notes = rebalance(X, y, "oversample", np.random.default_rng(1))
    assert notes == ["oversample"] and len(np.unique(Xo, axis=0)) == 40
    Xn, yn, _ = rebalance(X, y, "none", np.random.default_rng(1))
    assert Xn is X or np.array_equal(Xn, X)
    with pytest.raises(ValueError):
        rebalance(X, y, "bogus", np.random.default_rng(1))


def test_rebalance_mild_imbalance_only_oversamples():
    y = np.array([0] * 12 + [1] * 10)
    _, yp, notes = rebalance(np.zeros((22, 1)), y, "paper", np.random.default_rng(0))
    assert notes == ["oversample"] and np.bincount(yp).tolist() == [12, 12]


def test_shuffle_labels_keeps_features_and_label_multiset():
    t = _table(np.arange(20.0), a=[1] * 5 + [0] * 15, v=[0, 1] * 10)
    s = shuffle_labels(t, 3)
    assert np.array_equal(s.X, t.X)
    assert sorted(zip(s.arousal, s.valence)) == sorted(zip(t.arousal, t.valence))


def test_ceil_fraction():
    assert (ceil_fraction(0.05, 100), ceil_fraction(0.05, 3), ceil_fraction(0.05, 200)) == (5, 1, 10)
