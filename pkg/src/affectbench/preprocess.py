"""Windowing, participant-wise normalization and class rebalancing."""
from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, replace

import numpy as np

from .core import AROUSAL_CODES, QUADRANT_CODES, VALENCE_CODES, Modality, Task


class RebalanceWarning(UserWarning):
    pass


@dataclass(frozen=True)
class Window:
    segment_id: str
    window_index: int
    start_sample: int
    samples: np.ndarray
    modality: Modality
    padded: bool = False


def window_signal(samples, window_size: int = 60, overlap_fraction: float = 0.5,
                  segment_id: str = "", modality: Modality | str = Modality.EDA) -> list[Window]:
    """Cut a signal into fixed-length overlapping windows.

    Windows start at multiples of ``stride = window_size * (1 - overlap)``.
    If samples remain after the last full window, one more window starting
    at the next stride is zero-padded on the right and flagged. Inputs
    shorter than one window give a single padded window.
    """
    if window_size < 2:
        raise ValueError("window_size must be >= 2")
    if not 0 <= overlap_fraction < 1:
        raise ValueError("overlap_fraction must be in [0, 1)")
    x = np.asarray(samples, dtype=float)
    modality = Modality.parse(modality)
    stride = max(1, int(round(window_size * (1.0 - overlap_fraction))))
    n = len(x)

    def padded_window(index, start):
        buf = np.zeros(window_size)
        part = x[start:start + window_size]
        buf[:len(part)] = part
        return Window(segment_id, index, start, buf, modality, padded=True)

    if n < window_size:
        return [padded_window(0, 0)]
    count = (n - window_size) // stride + 1
    out = [Window(segment_id, i, i * stride, x[i * stride:i * stride + window_size].copy(), modality)
           for i in range(count)]
    last_end = (count - 1) * stride + window_size
    if last_end < n:
        out.append(padded_window(count, count * stride))
    return out


# ---------------------------------------------------------------------------
# feature table

def quadrant_codes(arousal, valence) -> np.ndarray:
    """Quadrant index (HAPV, HANV, LAPV, LANV) from binary arousal/valence codes."""
    return (1 - np.asarray(arousal, int)) * 2 + (1 - np.asarray(valence, int))


@dataclass(frozen=True)
class FeatureTable:
    """Rows of (dataset, participant, segment, features, labels).

    Labels are integer codes: arousal 0=low 1=high, valence 0=negative
    1=positive; the quadrant is derived.
    """

    dataset_ids: np.ndarray
    participant_ids: np.ndarray
    segment_ids: np.ndarray
    columns: tuple[str, ...]
    X: np.ndarray
    arousal: np.ndarray
    valence: np.ndarray

    def __post_init__(self):
        for name in ("dataset_ids", "participant_ids", "segment_ids"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=object))
        X = np.asarray(self.X, dtype=float).reshape(len(self.segment_ids), len(self.columns))
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "arousal", np.asarray(self.arousal, dtype=int))
        object.__setattr__(self, "valence", np.asarray(self.valence, dtype=int))
        object.__setattr__(self, "columns", tuple(self.columns))
        if len(set(self.columns)) != len(self.columns):
            raise ValueError("duplicate feature column names")
        n = len(self.segment_ids)
        if not (len(self.dataset_ids) == len(self.participant_ids) == len(self.arousal) == len(self.valence) == n):
            raise ValueError("feature table columns have inconsistent lengths")

    def __len__(self) -> int:
        return len(self.segment_ids)

    @property
    def quadrant(self) -> np.ndarray:
        return quadrant_codes(self.arousal, self.valence)

    def labels(self, task: Task | str) -> np.ndarray:
        task = Task.parse(task)
        if task is Task.AROUSAL:
            return self.arousal
        if task is Task.VALENCE:
            return self.valence
        return self.quadrant

    @property
    def participant_keys(self) -> np.ndarray:
        """(dataset, participant) keys; participant ids are unique only within a dataset."""
        return np.array([f"{d}\x1f{p}" for d, p in zip(self.dataset_ids, self.participant_ids)], dtype=object)

    def take(self, idx) -> "FeatureTable":
        idx = np.asarray(idx)
        return FeatureTable(self.dataset_ids[idx], self.participant_ids[idx], self.segment_ids[idx],
                            self.columns, self.X[idx], self.arousal[idx], self.valence[idx])

    def select_columns(self, names) -> "FeatureTable":
        pos = [self.columns.index(c) for c in names]
        return replace(self, columns=tuple(names), X=self.X[:, pos])

    def with_X(self, X) -> "FeatureTable":
        return replace(self, X=np.asarray(X, dtype=float))

    @staticmethod
    def concat(tables) -> "FeatureTable":
        tables = list(tables)
        cols = tables[0].columns
        if any(t.columns != cols for t in tables):
            raise ValueError("cannot concatenate tables with different column registries")
        return FeatureTable(
            np.concatenate([t.dataset_ids for t in tables]),
            np.concatenate([t.participant_ids for t in tables]),
            np.concatenate([t.segment_ids for t in tables]),
            cols,
            np.vstack([t.X for t in tables]),
            np.concatenate([t.arousal for t in tables]),
            np.concatenate([t.valence for t in tables]),
        )

    def write_csv(self, stream) -> None:
        w = csv.writer(stream, lineterminator="\n")
        w.writerow(("dataset_id", "participant_id", "segment_id", *self.columns, "arousal", "valence", "quadrant"))
        q = self.quadrant
        for i in range(len(self)):
            w.writerow((self.dataset_ids[i], self.participant_ids[i], self.segment_ids[i],
                        *(repr(float(v)) for v in self.X[i]),
                        AROUSAL_CODES[self.arousal[i]].value, VALENCE_CODES[self.valence[i]].value,
                        str(QUADRANT_CODES[q[i]])))

    @classmethod
    def read_csv(cls, stream) -> "FeatureTable":
        reader = csv.reader(stream)
        header = next(reader)
        if header[:3] != ["dataset_id", "participant_id", "segment_id"] or header[-3:] != ["arousal", "valence", "quadrant"]:
            raise ValueError("not a feature table file")
        cols = header[3:-3]
        ds, ps, ss, X, a, v = [], [], [], [], [], []
        a_lookup = {c.value: i for i, c in enumerate(AROUSAL_CODES)}
        v_lookup = {c.value: i for i, c in enumerate(VALENCE_CODES)}
        for row in reader:
            if not row:
                continue
            ds.append(row[0])
            ps.append(row[1])
            ss.append(row[2])
            X.append([float(x) for x in row[3:-3]])
            a.append(a_lookup[row[-3]])
            v.append(v_lookup[row[-2]])
        return cls(ds, ps, ss, cols, np.array(X, dtype=float).reshape(len(ss), len(cols)), a, v)


def _groups(keys):
    """Row index arrays per distinct key, in first-appearance order."""
    order: dict = {}
    for i, k in enumerate(keys):
        order.setdefault(k, []).append(i)
    return [np.array(v) for v in order.values()]


def impute_per_participant(table: FeatureTable) -> tuple[FeatureTable, dict[str, int]]:
    """Replace non-finite entries by the participant's median of that column.

    Falls back to 0 when the participant has no finite value. Returns the
    imputed table and the number of imputed entries per column.
    """
    X = table.X.copy()
    counts = {c: 0 for c in table.columns}
    for idx in _groups(table.participant_keys):
        block = X[idx]
        bad = ~np.isfinite(block)
        if not bad.any():
            continue
        for j in np.flatnonzero(bad.any(axis=0)):
            col = block[:, j]
            ok = col[np.isfinite(col)]
            fill = float(np.median(ok)) if ok.size else 0.0
            col[~np.isfinite(col)] = fill
            counts[table.columns[j]] += int(bad[:, j].sum())
        X[idx] = block
    return table.with_X(X), counts


def minmax_normalize(table: FeatureTable) -> FeatureTable:
    """Participant-wise min-max scaling of every feature column to [0, 1].

    Constant columns (within a participant) map to 0. Labels and row order
    are untouched.
    """
    if len(table) == 0:
        raise ValueError("empty feature table")
    if not np.all(np.isfinite(table.X)):
        raise ValueError("impute non-finite features before normalizing")
    X = table.X.copy()
    for idx in _groups(table.participant_keys):
        block = X[idx]
        lo, hi = block.min(axis=0), block.max(axis=0)
        span = hi - lo
        safe = np.where(span > 0, span, 1.0)
        X[idx] = np.where(span > 0, (block - lo) / safe, 0.0)
    return table.with_X(X)


def zscore_normalize(samples) -> np.ndarray:
    """Z-score one participant's samples (population std); constant input maps to zeros."""
    x = np.asarray(samples, dtype=float)
    if x.size < 2:
        raise ValueError("z-score needs at least 2 samples")
    mu = x.mean()
    sd = x.std()
    if sd == 0 or not np.isfinite(sd):
        return np.zeros_like(x)
    z = (x - mu) / sd
    # one refinement pass removes the rounding residue of the first
    return z - z.mean()


def zscore_by_participant(samples_by_participant: dict) -> dict:
    return {k: zscore_normalize(v) for k, v in samples_by_participant.items()}


# ---------------------------------------------------------------------------
# rebalancing

def _class_counts(y):
    classes, counts = np.unique(np.asarray(y), return_counts=True)
    return classes, counts


def imbalance_exceeds_one_third(labels, denominator: str = "max") -> bool:
    """True iff (max_count - min_count) / max_count > 1/3.

    ``denominator="total"`` divides by the total row count instead.
    """
    _, counts = _class_counts(labels)
    if len(counts) < 2:
        raise ValueError("degenerate label distribution: a single class is present")
    diff = int(counts.max() - counts.min())
    base = int(counts.max()) if denominator == "max" else int(counts.sum())
    return 3 * diff > base


def oversample_indices(y, rng: np.random.Generator) -> np.ndarray:
    """Original row indices followed by uniformly drawn duplicates equalizing classes."""
    y = np.asarray(y)
    classes, counts = _class_counts(y)
    if len(classes) < 2:
        raise ValueError("degenerate label distribution: a single class is present")
    target = counts.max()
    extra = []
    for c, n in zip(classes, counts):
        if n < target:
            members = np.flatnonzero(y == c)
            extra.append(members[rng.integers(0, n, size=target - n)])
    return np.concatenate([np.arange(len(y))] + extra)


def random_oversample(table: FeatureTable, task: Task | str = Task.AROUSAL, seed: int = 42) -> FeatureTable:
    """Duplicate minority rows at random (with replacement) until classes are equal."""
    idx = oversample_indices(table.labels(task), np.random.default_rng(seed))
    if len(idx) == len(table):
        return table
    return table.take(idx)


def smote_samples(X, y, k: int = 5, rng: np.random.Generator | None = None):
    """Synthesize rows for every minority class by neighbor interpolation.

    Returns ``(X_new, y_new, source_index)`` for the synthetic rows only.
    Classes with fewer than 2 rows get random duplicates instead, with a
    :class:`RebalanceWarning`.
    """
    rng = rng or np.random.default_rng(42)
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    classes, counts = _class_counts(y)
    if len(classes) < 2:
        raise ValueError("degenerate label distribution: a single class is present")
    target = counts.max()
    new_X, new_y, src = [], [], []
    for c, n in zip(classes, counts):
        need = int(target - n)
        if need == 0:
            continue
        members = np.flatnonzero(y == c)
        if n < 2:
            warnings.warn(f"class {c!r} has {n} row(s); SMOTE falls back to random oversampling",
                          RebalanceWarning, stacklevel=2)
            pick = members[rng.integers(0, n, size=need)]
            new_X.append(X[pick])
            new_y.append(np.full(need, c))
            src.append(pick)
            continue
        kk = min(k, n - 1)
        P = X[members]
        d2 = ((P[:, None, :] - P[None, :, :]) ** 2).sum(axis=-1)
        np.fill_diagonal(d2, np.inf)
        # stable sort keeps neighbor choice deterministic under distance ties
        neighbors = np.argsort(d2, axis=1, kind="stable")[:, :kk]
        base = rng.integers(0, n, size=need)
        nb = neighbors[base, rng.integers(0, kk, size=need)]
        u = rng.random(need)[:, None]
        new_X.append(P[base] + u * (P[nb] - P[base]))
        new_y.append(np.full(need, c))
        src.append(members[base])
    if not new_X:
        return np.empty((0, X.shape[1])), np.empty(0, dtype=y.dtype), np.empty(0, dtype=int)
    return np.vstack(new_X), np.concatenate(new_y), np.concatenate(src)


def smote(table: FeatureTable, task: Task | str = Task.AROUSAL, k: int = 5, seed: int = 42) -> FeatureTable:
    """SMOTE on the task's labels; synthetic rows inherit the source row's ids.

    The untouched label dimension of a synthetic row is copied from its
    source row.
    """
    task = Task.parse(task)
    y = table.labels(task)
    Xn, yn, src = smote_samples(table.X, y, k=k, rng=np.random.default_rng(seed))
    if len(yn) == 0:
        return table
    arousal = table.arousal[src].copy()
    valence = table.valence[src].copy()
    if task is Task.AROUSAL:
        arousal = yn.astype(int)
    elif task is Task.VALENCE:
        valence = yn.astype(int)
    else:
        arousal = 1 - yn.astype(int) // 2
        valence = 1 - yn.astype(int) % 2
    synth_ids = np.array([f"{table.segment_ids[s]}~smote{j}" for j, s in enumerate(src)], dtype=object)
    extra = FeatureTable(table.dataset_ids[src], table.participant_ids[src], synth_ids, table.columns,
                         Xn, arousal, valence)
    return FeatureTable.concat([table, extra])


def rebalance(X, y, policy: str, rng: np.random.Generator, k: int = 5,
              denominator: str = "max") -> tuple[np.ndarray, np.ndarray, list[str]]:
    """Training-side rebalancing used by the evaluation protocols.

    ``policy`` is ``none``, ``oversample`` or ``paper`` (SMOTE when the
    one-third imbalance rule fires, then random oversampling).
    """
    notes = []
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    if policy == "none" or len(np.unique(y)) < 2:
        return X, y, notes
    if policy not in ("oversample", "paper"):
        raise ValueError(f"unknown rebalance policy {policy!r}")
    if policy == "paper" and imbalance_exceeds_one_third(y, denominator):
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", RebalanceWarning)
            Xn, yn, _ = smote_samples(X, y, k=k, rng=rng)
        notes.extend(str(w.message) for w in caught)
        notes.append("smote")
        X = np.vstack([X, Xn])
        y = np.concatenate([y, yn])
    idx = oversample_indices(y, rng)
    if len(idx) > len(y):
        notes.append("oversample")
    return X[idx], y[idx], notes


def shuffle_labels(table: FeatureTable, seed: int) -> FeatureTable:
    """Permute whole label rows, destroying any feature-label association."""
    perm = np.random.default_rng(seed).permutation(len(table))
    return replace(table, arousal=table.arousal[perm], valence=table.valence[perm])


def ceil_fraction(fraction: float, count: int) -> int:
    return int(math.ceil(fraction * count - 1e-12))
