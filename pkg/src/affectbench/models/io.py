"""Versioned JSON serialization of trained models.

Floats are written with ``repr`` precision, so a round trip reproduces
predictions bit for bit.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

FORMAT = "affectbench-model"
VERSION = 1


def _encode(obj):
    if isinstance(obj, np.ndarray):
        return {"__ndarray__": obj.tolist(), "dtype": obj.dtype.str, "shape": list(obj.shape)}
    if isinstance(obj, dict):
        return {k: _encode(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_encode(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def _decode(obj):
    if isinstance(obj, dict):
        if "__ndarray__" in obj:
            return np.array(obj["__ndarray__"], dtype=np.dtype(obj["dtype"])).reshape(obj["shape"])
        return {k: _decode(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_decode(v) for v in obj]
    return obj


def model_to_dict(model) -> dict:
    return {
        "format": FORMAT,
        "version": VERSION,
        "kind": model.kind,
        "hyperparameters": _encode(dict(model.hyperparameters)),
        "seed": model.seed,
        "classes": _encode(np.asarray(model.classes)),
        "n_features": model.n_features,
        "n_rows": model.n_rows,
        "params": _encode(model.params),
    }


def model_from_dict(data: dict):
    from . import TrainedModel

    if data.get("format") != FORMAT:
        raise ValueError("not a serialized model")
    if data.get("version") != VERSION:
        raise ValueError(f"unsupported model format version {data.get('version')}")
    return TrainedModel(data["kind"], _decode(data["classes"]), int(data["n_features"]),
                        _decode(data["params"]), _decode(data["hyperparameters"]),
                        int(data["seed"]), int(data["n_rows"]))


def save_model(model, path: str | Path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model), sort_keys=True))


def load_model(path: str | Path):
    return model_from_dict(json.loads(Path(path).read_text()))
