"""Classical classifiers behind one train/predict interface.

>>> spec = ModelSpec("rf", {"n_trees": 10})
>>> model = train(spec, X, y)                       # doctest: +SKIP
>>> labels, scores = predict(model, X_test)         # doctest: +SKIP
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Callable, Mapping

import numpy as np

from . import forest, lda, mlp


class ModelKind(str, enum.Enum):
    LDA = "lda"
    RF = "rf"
    MLP = "mlp"

    @classmethod
    def parse(cls, value) -> "ModelKind":
        if isinstance(value, cls):
            return value
        return cls(str(value).strip().lower())


@dataclass(frozen=True)
class _Backend:
    fit: Callable
    scores: Callable
    defaults: Mapping


# open registry: further model families can be added at import time
MODEL_REGISTRY: dict[str, _Backend] = {
    ModelKind.LDA.value: _Backend(lda.fit, lda.scores, lda.DEFAULTS),
    ModelKind.RF.value: _Backend(forest.fit, forest.scores, forest.DEFAULTS),
    ModelKind.MLP.value: _Backend(mlp.fit, mlp.scores, mlp.DEFAULTS),
}


def register_model(name: str, fit: Callable, scores: Callable, defaults: Mapping | None = None) -> None:
    MODEL_REGISTRY[name.lower()] = _Backend(fit, scores, dict(defaults or {}))


@dataclass(frozen=True)
class ModelSpec:
    kind: str
    hyperparameters: Mapping = field(default_factory=dict)
    seed: int = 42

    def __post_init__(self):
        kind = self.kind.value if isinstance(self.kind, ModelKind) else str(self.kind).strip().lower()
        if kind not in MODEL_REGISTRY:
            raise ValueError(f"unknown model kind {self.kind!r}")
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "hyperparameters", MappingProxyType(dict(self.hyperparameters)))

    def __reduce__(self):
        return type(self), (self.kind, dict(self.hyperparameters), self.seed)

    @property
    def name(self) -> str:
        return self.kind.upper()

    def resolved(self) -> dict:
        return {**MODEL_REGISTRY[self.kind].defaults, **self.hyperparameters}


@dataclass(frozen=True)
class TrainedModel:
    kind: str
    classes: np.ndarray
    n_features: int
    params: dict
    hyperparameters: Mapping
    seed: int
    n_rows: int

    def __reduce__(self):
        return type(self), (self.kind, self.classes, self.n_features, self.params, dict(self.hyperparameters),
                            self.seed, self.n_rows)


def _check_xy(X, y):
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    if X.ndim != 2 or len(X) != len(y):
        raise ValueError("X must be 2-D with one label per row")
    if not np.all(np.isfinite(X)):
        raise ValueError("X contains non-finite values")
    return X, y


def train(spec: ModelSpec, X, y) -> TrainedModel:
    """Fit ``spec`` on (X, y). Labels may be any sortable values."""
    X, y = _check_xy(X, y)
    classes, y_idx = np.unique(y, return_inverse=True)
    if len(classes) < 2:
        raise ValueError("degenerate labels: training data holds a single class")
    hp = spec.resolved()
    params = MODEL_REGISTRY[spec.kind].fit(X, y_idx, len(classes), hp, spec.seed)
    return TrainedModel(spec.kind, classes, X.shape[1], params, MappingProxyType(hp), spec.seed, len(X))


def predict_scores(model: TrainedModel, X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != model.n_features:
        raise ValueError(f"expected {model.n_features} feature columns, got {X.shape}")
    return MODEL_REGISTRY[model.kind].scores(model.params, X)


def predict(model: TrainedModel, X) -> tuple[np.ndarray, np.ndarray]:
    """Labels and per-class scores; argmax ties resolve to the lowest class index."""
    s = predict_scores(model, X)
    return model.classes[np.argmax(s, axis=1)], s


def train_lda(X, y, seed: int = 42, **hp) -> TrainedModel:
    return train(ModelSpec("lda", hp, seed), X, y)


def train_rf(X, y, n_trees: int = 100, seed: int = 42, **hp) -> TrainedModel:
    return train(ModelSpec("rf", {"n_trees": n_trees, **hp}, seed), X, y)


def train_mlp(X, y, hidden: int = 100, seed: int = 42, **hp) -> TrainedModel:
    return train(ModelSpec("mlp", {"hidden": hidden, **hp}, seed), X, y)


from .io import load_model, save_model  # noqa: E402

__all__ = [
    "ModelKind", "ModelSpec", "TrainedModel", "MODEL_REGISTRY", "register_model",
    "train", "predict", "predict_scores", "train_lda", "train_rf", "train_mlp",
    "save_model", "load_model",
]
