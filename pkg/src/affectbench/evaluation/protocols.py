"""Participant-level fold construction and training-set subsampling."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Fold:
    train: frozenset
    test: frozenset
    protocol: str
    index: int = 0

    def __post_init__(self):
        object.__setattr__(self, "train", frozenset(self.train))
        object.__setattr__(self, "test", frozenset(self.test))
        if not self.train or not self.test:
            raise ValueError("folds need nonempty train and test sets")
        if self.train & self.test:
            raise ValueError("fold train and test sets overlap")

    @property
    def fold_id(self) -> str:
        return f"{self.protocol}:{self.index}"


def _distinct(participants) -> list:
    return sorted(set(participants))


def loso_folds(participants) -> list[Fold]:
    """One fold per participant, holding that participant out."""
    ps = _distinct(participants)
    if len(ps) < 2:
        raise ValueError("leave-one-subject-out needs at least 2 participants")
    everyone = frozenset(ps)
    return [Fold(everyone - {p}, {p}, "loso", i) for i, p in enumerate(ps)]


def split_swap_folds(participants, seed: int = 42) -> list[Fold]:
    """Shuffle participants, halve them (extra one to the first half), then swap roles."""
    ps = _distinct(participants)
    if len(ps) < 2:
        raise ValueError("split-swap needs at least 2 participants")
    order = np.random.default_rng(seed).permutation(len(ps))
    shuffled = [ps[i] for i in order]
    cut = math.ceil(len(ps) / 2)
    a, b = shuffled[:cut], shuffled[cut:]
    return [Fold(a, b, "split_swap", 0), Fold(b, a, "split_swap", 1)]


def subsample_regime(labels, fraction: float, seed: int = 42, classes=None) -> np.ndarray:
    """Row indices keeping ``ceil(fraction * count)`` rows of every class.

    Draws without replacement; the result is sorted so row order survives.
    """
    if not 0 < fraction <= 1:
        raise ValueError("fraction must be in (0, 1]")
    y = np.asarray(labels)
    present = np.unique(y)
    if classes is not None:
        missing = set(classes) - set(present.tolist())
        if missing:
            raise ValueError(f"class(es) {sorted(missing)} missing from the training rows")
    rng = np.random.default_rng(seed)
    keep = []
    for c in present:
        rows = np.flatnonzero(y == c)
        k = math.ceil(fraction * len(rows) - 1e-12)
        keep.append(rng.choice(rows, size=k, replace=False))
    return np.sort(np.concatenate(keep))
