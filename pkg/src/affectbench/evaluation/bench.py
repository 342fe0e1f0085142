"""Subject-independent and cross-cohort evaluation runs."""
from __future__ import annotations

import json
import warnings
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..core import AROUSAL_CODES, QUADRANT_CODES, VALENCE_CODES, CohortGroup, Task
from ..models import ModelSpec, predict, train
from ..preprocess import FeatureTable, minmax_normalize, rebalance
from .metrics import accuracy, confusion_matrix, f1_score
from .protocols import Fold, loso_folds, split_swap_folds, subsample_regime


class FoldSkippedWarning(UserWarning):
    pass


def task_classes(task: Task | str) -> list[str]:
    task = Task.parse(task)
    codes = {Task.AROUSAL: AROUSAL_CODES, Task.VALENCE: VALENCE_CODES, Task.QUADRANT: QUADRANT_CODES}[task]
    return [str(c) if task is Task.QUADRANT else c.value for c in codes]


def derive_seed(global_seed: int, *ids: str) -> int:
    """Seed for one job, fixed by the global seed and the job's identifiers.

    Independent of execution order, so results do not depend on scheduling.
    """
    key = tuple(zlib.crc32(str(i).encode()) for i in ids)
    return int(np.random.SeedSequence(int(global_seed), spawn_key=key).generate_state(1)[0])


def _show(key: str) -> str:
    return key.replace("\x1f", "/")


@dataclass
class FoldResult:
    fold_id: str
    test_participants: list[str]
    n_train_raw: int
    n_train: int
    n_test: int
    accuracy: float
    f1: float
    confusion: list[list[int]]
    rebalance: list[str] = field(default_factory=list)


@dataclass
class EvalResult:
    datasets: tuple[str, ...]
    modality: str
    task: str
    model: str
    protocol: str
    classes: list[str]
    folds: list[FoldResult]
    metadata: dict = field(default_factory=dict)

    def _stat(self, name, fn):
        vals = np.array([getattr(f, name) for f in self.folds], dtype=float)
        return float(fn(vals)) if vals.size else float("nan")

    @property
    def mean_accuracy(self) -> float:
        return self._stat("accuracy", np.mean)

    @property
    def std_accuracy(self) -> float:
        return self._stat("accuracy", np.std)

    @property
    def mean_f1(self) -> float:
        return self._stat("f1", np.mean)

    @property
    def std_f1(self) -> float:
        return self._stat("f1", np.std)

    @property
    def dataset_label(self) -> str:
        return "+".join(self.datasets)

    @property
    def cell_id(self) -> str:
        parts = [self.dataset_label, self.modality, self.task, self.model, self.protocol]
        for k in ("train_cohort", "test_cohort", "held_out", "control", "train_fraction"):
            if k in self.metadata:
                parts.append(f"{k}={self.metadata[k]}")
        return "|".join(parts)

    def to_dict(self) -> dict:
        return {
            "cell": self.cell_id,
            "datasets": list(self.datasets),
            "modality": self.modality,
            "task": self.task,
            "model": self.model,
            "protocol": self.protocol,
            "classes": self.classes,
            "folds": [vars(f) for f in self.folds],
            "mean_accuracy": self.mean_accuracy,
            "std_accuracy": self.std_accuracy,
            "mean_f1": self.mean_f1,
            "std_f1": self.std_f1,
            "metadata": self.metadata,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EvalResult":
        return cls(tuple(d["datasets"]), d["modality"], d["task"], d["model"], d["protocol"],
                   list(d["classes"]), [FoldResult(**f) for f in d["folds"]], dict(d.get("metadata", {})))


def _fit_and_score(table: FeatureTable, tr, te, task, spec, policy, rng, denominator):
    y = table.labels(task)
    Xb, yb, notes = rebalance(table.X[tr], y[tr], policy, rng, denominator=denominator)
    model = train(spec, Xb, yb)
    pred, _ = predict(model, table.X[te])
    n_classes = len(task_classes(task))
    cm = confusion_matrix(y[te], pred, labels=range(n_classes))
    return len(yb), accuracy(y[te], pred), f1_score(y[te], pred), cm, notes


def _assert_disjoint(keys, tr, te, what="participant"):
    shared = set(keys[tr].tolist()) & set(keys[te].tolist())
    if shared:
        raise AssertionError(f"{what} leakage: {sorted(map(_show, shared))[:5]} in train and test")


def run_benchmark(table: FeatureTable, task: Task | str, model_spec: ModelSpec, protocol: str = "loso",
                  rebalance_policy: str = "paper", seed: int = 42, modality: str = "",
                  train_fraction: float | None = None, smote_denominator: str = "max",
                  control: str | None = None) -> EvalResult:
    """Evaluate one (dataset, modality, task, model, protocol) cell.

    Training rows of every fold are rebalanced; test rows never are. Folds
    whose training rows hold a single class are skipped with a warning.

    Parameters
    ----------
    table : FeatureTable
        Extracted, imputed and normalized features of the cell's data.
    protocol : {"loso", "split_swap"}
    rebalance_policy : {"paper", "oversample", "none"}
        ``paper`` oversamples always and adds SMOTE first when the
        one-third imbalance rule fires.
    train_fraction : float, optional
        Keep only this fraction of each class in the training rows.
    control : str, optional
        Tag recorded in the result (e.g. ``"shuffled_labels"``).
    """
    task = Task.parse(task)
    keys = table.participant_keys
    datasets = tuple(sorted(set(table.dataset_ids.tolist())))
    meta: dict = {"seed": int(seed), "model_seed": int(model_spec.seed), "rebalance": rebalance_policy}
    if train_fraction is not None:
        meta["train_fraction"] = float(train_fraction)
        meta["extension"] = "per-class training subsample"
    if control:
        meta["control"] = control
    result = EvalResult(datasets, modality, task.value, model_spec.name, protocol, task_classes(task), [], meta)
    cell = result.cell_id
    if protocol == "loso":
        folds = loso_folds(keys)
    elif protocol == "split_swap":
        folds = split_swap_folds(keys, derive_seed(seed, cell, "split"))
    else:
        raise ValueError(f"unknown protocol {protocol!r}")
    y = table.labels(task)
    skipped, notes_all = [], []
    for fold in folds:
        tr = np.flatnonzero(np.isin(keys, list(fold.train)))
        te = np.flatnonzero(np.isin(keys, list(fold.test)))
        _assert_disjoint(keys, tr, te)
        if not len(te):
            skipped.append(f"{fold.fold_id}: no test rows")
            continue
        n_raw = len(tr)
        if train_fraction is not None:
            tr = tr[subsample_regime(y[tr], train_fraction, derive_seed(seed, cell, fold.fold_id, "subsample"))]
        if len(np.unique(y[tr])) < 2:
            msg = f"{fold.fold_id}: single-class training data"
            warnings.warn(msg, FoldSkippedWarning, stacklevel=2)
            skipped.append(msg)
            continue
        rng = np.random.default_rng(derive_seed(seed, cell, fold.fold_id, "rebalance"))
        n_tr, acc, f1, cm, notes = _fit_and_score(table, tr, te, task, model_spec, rebalance_policy, rng,
                                                  smote_denominator)
        notes_all += [n for n in notes if n not in ("smote", "oversample")]
        result.folds.append(FoldResult(fold.fold_id, sorted(_show(k) for k in fold.test), n_raw, n_tr,
                                       len(te), acc, f1, cm.tolist(), notes))
    meta["skipped_folds"] = skipped
    meta["warnings"] = sorted(set(notes_all))
    if not result.folds:
        raise ValueError(f"{cell}: all folds skipped")
    return result


def _group_rows(table: FeatureTable, group: CohortGroup, exclude_dataset: str | None = None) -> np.ndarray:
    mask = [group.contains(d, p) and d != exclude_dataset
            for d, p in zip(table.dataset_ids, table.participant_ids)]
    return np.flatnonzero(mask)


def _check_cohorts(a: CohortGroup, b: CohortGroup) -> None:
    if a.participants is not None and b.participants is not None:
        overlap = a.participants & b.participants
    else:
        overlap = a.datasets & b.datasets
    if overlap or a == b:
        raise ValueError(f"cohort leakage between {a.label} and {b.label}: {sorted(overlap)[:5]}")


def cross_cohort_eval(table: FeatureTable, train_group: CohortGroup, test_group: CohortGroup,
                      task: Task | str, model_spec: ModelSpec, modality: str = "",
                      rebalance_policy: str = "paper", seed: int = 42,
                      smote_denominator: str = "max") -> EvalResult:
    """Train on one cohort's pooled rows and test on a disjoint cohort."""
    _check_cohorts(train_group, test_group)
    task = Task.parse(task)
    tr = _group_rows(table, train_group)
    te = _group_rows(table, test_group)
    if not len(tr) or not len(te):
        raise ValueError("empty cohort: no rows match the train or test group")
    _assert_disjoint(table.participant_keys, tr, te)
    if train_group.participants is None or test_group.participants is None:
        _assert_disjoint(table.dataset_ids, tr, te, "dataset")
    # per-participant scaling is idempotent, so pooled tables may arrive pre-normalized
    sub = minmax_normalize(table.take(np.concatenate([tr, te])))
    tr_s, te_s = np.arange(len(tr)), np.arange(len(tr), len(tr) + len(te))
    transfer = f"{train_group.label}->{test_group.label}"
    datasets = tuple(sorted(set(table.dataset_ids[tr].tolist()) | set(table.dataset_ids[te].tolist())))
    meta = {"seed": int(seed), "model_seed": int(model_spec.seed), "rebalance": rebalance_policy,
            "train_cohort": train_group.label, "test_cohort": test_group.label, "transfer": transfer,
            "train_datasets": sorted(set(table.dataset_ids[tr].tolist())),
            "test_datasets": sorted(set(table.dataset_ids[te].tolist()))}
    result = EvalResult(datasets, modality, task.value, model_spec.name, "cross", task_classes(task), [], meta)
    if len(np.unique(sub.labels(task)[tr_s])) < 2:
        raise ValueError(f"{transfer}: single-class training data")
    rng = np.random.default_rng(derive_seed(seed, result.cell_id, "rebalance"))
    n_tr, acc, f1, cm, notes = _fit_and_score(sub, tr_s, te_s, task, model_spec, rebalance_policy, rng,
                                              smote_denominator)
    result.folds.append(FoldResult("cross:0", sorted(set(_show(k) for k in sub.participant_keys[te_s])),
                                   len(tr), n_tr, len(te), acc, f1, cm.tolist(), notes))
    return result


def lodo_eval(table: FeatureTable, group: CohortGroup, task: Task | str, model_spec: ModelSpec,
              modality: str = "", rebalance_policy: str = "paper", seed: int = 42,
              smote_denominator: str = "max") -> list[EvalResult]:
    """Leave-one-dataset-out within a cohort: one result per held-out dataset."""
    task = Task.parse(task)
    present = sorted({d for d, p in zip(table.dataset_ids, table.participant_ids) if group.contains(d, p)})
    if len(present) < 2:
        raise ValueError(f"{group.label}: leave-one-dataset-out needs at least 2 datasets")
    out = []
    for held in present:
        tr = _group_rows(table, group, exclude_dataset=held)
        te = np.array([i for i in _group_rows(table, group) if table.dataset_ids[i] == held])
        _assert_disjoint(table.dataset_ids, tr, te, "dataset")
        sub = minmax_normalize(table.take(np.concatenate([tr, te])))
        tr_s, te_s = np.arange(len(tr)), np.arange(len(tr), len(tr) + len(te))
        meta = {"seed": int(seed), "model_seed": int(model_spec.seed), "rebalance": rebalance_policy,
                "cohort": group.label, "held_out": held,
                "train_datasets": sorted(set(table.dataset_ids[tr].tolist()))}
        res = EvalResult(tuple(present), modality, task.value, model_spec.name, "lodo", task_classes(task), [], meta)
        if len(np.unique(sub.labels(task)[tr_s])) < 2:
            warnings.warn(f"{res.cell_id}: single-class training data", FoldSkippedWarning, stacklevel=2)
            meta["skipped_folds"] = [f"lodo:{held}: single-class training data"]
            continue
        rng = np.random.default_rng(derive_seed(seed, res.cell_id, "rebalance"))
        n_tr, acc, f1, cm, notes = _fit_and_score(sub, tr_s, te_s, task, model_spec, rebalance_policy, rng,
                                                  smote_denominator)
        res.folds.append(FoldResult(f"lodo:{held}", sorted(set(_show(k) for k in sub.participant_keys[te_s])),
                                    len(tr), n_tr, len(te), acc, f1, cm.tolist(), notes))
        out.append(res)
    return out


def write_results(results, path: str | Path) -> None:
    """Results store: one record per cell, sorted by cell id, no timestamps."""
    records = sorted((r.to_dict() for r in results), key=lambda d: d["cell"])
    Path(path).write_text(json.dumps(records, sort_keys=True, indent=1) + "\n")


def read_results(path: str | Path) -> list[EvalResult]:
    return [EvalResult.from_dict(d) for d in json.loads(Path(path).read_text())]
