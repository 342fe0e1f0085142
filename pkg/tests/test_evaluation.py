import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import affectbench.evaluation.bench as bench_mod
from affectbench.core import CohortGroup
from affectbench.evaluation import (EvalResult, FoldResult, accuracy, confusion_matrix, cross_cohort_eval,
                                    derive_seed, f1_score, format_best_model_table, format_cohort_matrix,
                                    format_ranking_table, lodo_eval, loso_folds, per_class_f1, rank_results,
                                    read_results, run_benchmark, split_swap_folds, subsample_regime,
                                    write_results)
from affectbench.models import ModelSpec
from affectbench.preprocess import FeatureTable

LDA = ModelSpec("lda")


def _table(n_participants=6, per=8, datasets=("D",), seed=0, sep=3.0):
    rng = np.random.default_rng(seed)
    ds, pids, segs, X, a, v = [], [], [], [], [], []
    for d in datasets:
        for p in range(n_participants):
            for s in range(per):
                ai, vi = s % 2, (s // 2) % 2
                ds.append(d)
                pids.append(f"P{p}")
                segs.append(f"{d}:{p}:{s}")
                X.append([sep * ai + rng.normal(), sep * vi + rng.normal(), rng.normal()])
                a.append(ai)
                v.append(vi)
    return FeatureTable(ds, pids, segs, ("f0", "f1", "f2"), np.array(X), a, v)


# ---------------------------------------------------------------------------
# metrics

def test_metric_examples():
    assert accuracy([0, 1, 0, 1], [0, 1, 1, 0]) == 0.5
    assert f1_score([0, 1, 0, 1], [0, 1, 1, 0]) == 0.5
    # predicting class 0 everywhere on a 1:1 split: F1 = 2/3 and 0, macro 1/3
    assert f1_score([0, 0, 1, 1], [0, 0, 0, 0]) == pytest.approx(1 / 3)


def test_confusion_layout_and_weighted():
    cm = confusion_matrix([0, 0, 1, 2], [0, 1, 1, 2], labels=[0, 1, 2])
    assert cm.tolist() == [[1, 1, 0], [0, 1, 0], [0, 0, 1]]
    assert per_class_f1(cm).tolist() == pytest.approx([2 / 3, 2 / 3, 1.0])
    assert f1_score([0, 0, 1, 2], [0, 1, 1, 2], "weighted") == pytest.approx((2 / 3 * 2 + 2 / 3 + 1) / 4)
    with pytest.raises(ValueError):
        confusion_matrix([0, 5], [0, 1], labels=[0, 1])
    with pytest.raises(ValueError):
        f1_score([], [])


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 3), st.integers(0, 3)), min_size=1, max_size=60))
def test_metrics_match_direct_oracle(pairs):
    t, p = map(np.array, zip(*pairs))
    assert accuracy(t, p) == pytest.approx(np.mean(t == p))
    classes = np.union1d(t, p)
    f1s = []
    for c in classes:
        tp = np.sum((t == c) & (p == c))
        fp = np.sum((t != c) & (p == c))
        fn = np.sum((t == c) & (p != c))
        f1s.append(2 * tp / (2 * tp + fp + fn))
    assert f1_score(t, p) == pytest.approx(np.mean(f1s))
    assert 0 <= f1_score(t, p) <= 1


def test_accuracy_equals_f1_on_symmetric_binary():
    # balanced classes with equal off-diagonals: precision equals recall for both classes
    t = [0] * 10 + [1] * 10
    p = [0] * 7 + [1] * 3 + [1] * 7 + [0] * 3
    assert accuracy(t, p) == pytest.approx(f1_score(t, p))


# ---------------------------------------------------------------------------
# protocols

def test_loso_folds():
    folds = loso_folds([f"P{i}" for i in range(15)] * 3)
    assert len(folds) == 15
    assert all(len(f.test) == 1 and len(f.train) == 14 for f in folds)
    assert set().union(*(f.test for f in folds)) == {f"P{i}" for i in range(15)}
    assert len(loso_folds(["a", "b"])) == 2
    with pytest.raises(ValueError):
        loso_folds(["a", "a"])


@pytest.mark.parametrize("n,sizes", [(10, (5, 5)), (11, (6, 5))])
def test_split_swap(n, sizes):
    f0, f1 = split_swap_folds([f"P{i}" for i in range(n)], seed=3)
    assert (len(f0.train), len(f0.test)) == sizes
    assert f0.train == f1.test and f0.test == f1.train
    assert split_swap_folds(range(n), 3) == split_swap_folds(range(n), 3)


def test_subsample_ceil_per_class():
    y = np.array([0] * 5 + [1] * 5)
    assert np.bincount(y[subsample_regime(y, 0.5)]).tolist() == [3, 3]
    y = np.array([0] + [1] * 10)
    assert np.bincount(y[subsample_regime(y, 0.05)]).tolist() == [1, 1]
    assert subsample_regime(y, 1.0).tolist() == list(range(11))
    with pytest.raises(ValueError):
        subsample_regime(y, 0.0)
    with pytest.raises(ValueError, match="missing"):
        subsample_regime(y, 0.5, classes=[0, 1, 2])


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(0, 3), min_size=1, max_size=80), st.floats(0.01, 1.0), st.integers(0, 1000))
def test_subsample_counts_property(labels, frac, seed):
    y = np.array(labels)
    idx = subsample_regime(y, frac, seed)
    assert np.all(np.diff(idx) > 0)
    for c in np.unique(y):
        assert np.sum(y[idx] == c) == int(np.ceil(frac * np.sum(y == c) - 1e-12))


def test_derive_seed_depends_on_ids_only():
    assert derive_seed(42, "a", "b") == derive_seed(42, "a", "b")
    assert len({derive_seed(42, "a", "b"), derive_seed(42, "b", "a"), derive_seed(43, "a", "b")}) == 3


# ---------------------------------------------------------------------------
# runs

def test_loso_run_shape_and_aggregation():
    r = run_benchmark(_table(sep=5.0), "arousal", LDA, modality="eda")
    assert len(r.folds) == 6 and r.classes == ["low", "high"]
    accs = np.array([f.accuracy for f in r.folds])
    assert r.mean_accuracy == pytest.approx(accs.mean()) and r.std_accuracy == pytest.approx(accs.std())
    assert r.mean_accuracy > 0.9


def test_quadrant_run_uses_four_classes():
    r = run_benchmark(_table(), "quadrant", LDA)
    assert len(r.classes) == 4 and all(np.array(f.confusion).shape == (4, 4) for f in r.folds)


def test_unknown_protocol():
    with pytest.raises(ValueError):
        run_benchmark(_table(), "arousal", LDA, protocol="kfold")


def _spy(monkeypatch):
    seen = []
    real = bench_mod._fit_and_score

    def spy(table, tr, te, *args):
        seen.append(table.segment_ids[te].tolist())
        return real(table, tr, te, *args)

    monkeypatch.setattr(bench_mod, "_fit_and_score", spy)
    return seen


def test_rebalancing_never_touches_test_rows(monkeypatch):
    t = _table()
    keep = ~((t.arousal == 1) & (np.arange(len(t)) % 4 == 1))
    t = t.take(np.flatnonzero(keep))
    seen = _spy(monkeypatch)
    a = run_benchmark(t, "arousal", LDA, rebalance_policy="paper")
    b = run_benchmark(t, "arousal", LDA, rebalance_policy="none")
    half = len(seen) // 2
    assert seen[:half] == seen[half:]
    assert [f.n_test for f in a.folds] == [f.n_test for f in b.folds]
    assert all(f.n_train > f.n_train_raw for f in a.folds)


def test_train_fraction_shrinks_training_rows():
    r = run_benchmark(_table(), "arousal", LDA, train_fraction=0.25)
    assert r.metadata["train_fraction"] == 0.25
    assert all(f.n_train <= f.n_train_raw for f in r.folds)


def test_results_roundtrip(tmp_path):
    r = run_benchmark(_table(), "valence", LDA, protocol="split_swap", modality="ppg")
    write_results([r], tmp_path / "r.json")
    back = read_results(tmp_path / "r.json")[0]
    assert back.cell_id == r.cell_id and back.mean_f1 == r.mean_f1
    assert json.loads((tmp_path / "r.json").read_text())[0]["cell"] == "D|ppg|valence|LDA|split_swap"


# ---------------------------------------------------------------------------
# cohorts

def _multi():
    return _table(n_participants=3, per=8, datasets=("A", "B", "C"))


def test_cross_cohort_and_leakage():
    t = _multi()
    ga = CohortGroup("setting", "lab", {"A", "B"})
    gc = CohortGroup("setting", "real", {"C"})
    r = cross_cohort_eval(t, ga, gc, "arousal", LDA)
    assert r.metadata["transfer"] == "setting:lab->setting:real" and len(r.folds) == 1
    assert r.folds[0].n_test == 24
    with pytest.raises(ValueError, match="leakage"):
        cross_cohort_eval(t, ga, CohortGroup("setting", "x", {"B", "C"}), "arousal", LDA)


def test_demographic_cohorts_check_participants():
    t = _multi()
    young = CohortGroup("age", "young", {"A"}, {("A", "P0"), ("A", "P1")})
    old = CohortGroup("age", "old", {"A"}, {("A", "P2")})
    r = cross_cohort_eval(t, young, old, "arousal", LDA)
    assert r.folds[0].test_participants == ["A/P2"]
    with pytest.raises(ValueError, match="leakage"):
        cross_cohort_eval(t, young, CohortGroup("age", "o", {"A"}, {("A", "P1")}), "arousal", LDA)


def test_lodo_three_datasets():
    t = _multi()
    out = lodo_eval(t, CohortGroup("device", "e4", {"A", "B", "C"}), "arousal", LDA)
    assert [r.metadata["held_out"] for r in out] == ["A", "B", "C"]
    assert all(r.folds[0].n_train_raw == 48 and r.folds[0].n_test == 24 for r in out)
    with pytest.raises(ValueError):
        lodo_eval(t, CohortGroup("device", "x", {"A"}), "arousal", LDA)


# ---------------------------------------------------------------------------
# reports

def _result(ds, model, f1s, task="arousal", modality="eda", **meta):
    folds = [FoldResult(f"loso:{i}", [f"p{i}"], 10, 10, 5, f, f, [[1, 0], [0, 1]]) for i, f in enumerate(f1s)]
    return EvalResult((ds,), modality, task, model, "loso", ["low", "high"], folds, meta)


def test_ranking_argmax_and_ties():
    results = [_result("A", "RF", [0.5, 1.0]), _result("A", "LDA", [0.75, 0.75]), _result("A", "MLP", [0.5]),
               _result("B", "RF", [0.625]), _result("C", "MLP", [0.625]),
               _result("A", "RF", [1.0], control="shuffled_labels")]
    (table,) = rank_results(results)
    # RF and LDA tie at 0.75 on A; the first model name wins
    assert [(b.dataset, b.model) for b in table.rows] == [("A", "LDA"), ("B", "RF"), ("C", "MLP")]
    assert table.summary["MAX"] == pytest.approx(0.75) and table.summary["MIN"] == pytest.approx(0.625)
    text = format_ranking_table(table)
    assert "| 1 | A | LDA | 0.7500 ± 0.0000 |" in text and "| AVG |" in text
    assert "| A | LDA 0.7500 |" in format_best_model_table([table], "arousal")
    assert format_best_model_table([table], "valence") == ""


def test_cohort_matrix_rows():
    r = _result("A", "RF", [0.6])
    r.protocol = "cross"
    r.metadata.update(train_cohort="setting:lab", test_cohort="setting:real")
    text = format_cohort_matrix([r, _result("B", "RF", [0.5])])
    assert text.splitlines()[2] == "| eda | arousal | RF | setting:lab | setting:real | 0.6000 |"
    assert len(text.splitlines()) == 3
