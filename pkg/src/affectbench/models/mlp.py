"""One-hidden-layer perceptron trained with Adam on softmax cross-entropy."""
from __future__ import annotations

import numpy as np

DEFAULTS = {
    "hidden": 100,
    "alpha": 1e-4,
    "learning_rate": 1e-3,
    "beta1": 0.9,
    "beta2": 0.999,
    "epsilon": 1e-8,
    "batch_size": 200,
    "epochs": 200,
}

PARAM_NAMES = ("W1", "b1", "W2", "b2")


def init_params(d: int, hidden: int, n_classes: int, rng: np.random.Generator) -> dict:
    """Glorot-uniform weights and biases, bound sqrt(6 / (fan_in + fan_out))."""
    params = {}
    for (wn, bn), (fan_in, fan_out) in zip((("W1", "b1"), ("W2", "b2")), ((d, hidden), (hidden, n_classes))):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        params[wn] = rng.uniform(-bound, bound, (fan_in, fan_out))
        params[bn] = rng.uniform(-bound, bound, fan_out)
    return params


def _forward(params, X):
    z1 = X @ params["W1"] + params["b1"]
    h = np.maximum(z1, 0.0)
    logits = h @ params["W2"] + params["b2"]
    logits = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(logits)
    return z1, h, e / e.sum(axis=1, keepdims=True)


def loss_and_grad(params: dict, X, y, alpha: float = DEFAULTS["alpha"]) -> tuple[float, dict]:
    """Mean cross-entropy plus ``alpha / (2 n) * ||W||^2`` and its gradient.

    Parameters
    ----------
    params : dict
        ``W1`` (d, h), ``b1`` (h,), ``W2`` (h, C), ``b2`` (C,).
    X : ndarray, shape (n, d)
    y : ndarray of int, shape (n,)
        Class indices.
    """
    X = np.asarray(X, dtype=float)
    n = len(X)
    z1, h, p = _forward(params, X)
    loss = -np.mean(np.log(np.maximum(p[np.arange(n), y], 1e-300)))
    loss += 0.5 * alpha * (np.sum(params["W1"] ** 2) + np.sum(params["W2"] ** 2)) / n
    delta = p.copy()
    delta[np.arange(n), y] -= 1.0
    delta /= n
    grads = {
        "W2": h.T @ delta + alpha * params["W2"] / n,
        "b2": delta.sum(axis=0),
    }
    dh = (delta @ params["W2"].T) * (z1 > 0)
    grads["W1"] = X.T @ dh + alpha * params["W1"] / n
    grads["b1"] = dh.sum(axis=0)
    return float(loss), grads


def fit(X, y, n_classes: int, hp: dict, seed: int) -> dict:
    cfg = {**DEFAULTS, **hp}
    X = np.asarray(X, dtype=float)
    n, d = X.shape
    rng = np.random.default_rng(seed)
    params = init_params(d, int(cfg["hidden"]), n_classes, rng)
    m = {k: np.zeros_like(v) for k, v in params.items()}
    v = {k: np.zeros_like(p) for k, p in params.items()}
    b1, b2, lr, eps = cfg["beta1"], cfg["beta2"], cfg["learning_rate"], cfg["epsilon"]
    batch = min(int(cfg["batch_size"]), n)
    step = 0
    loss = np.nan
    for _ in range(int(cfg["epochs"])):
        order = rng.permutation(n)
        for start in range(0, n, batch):
            idx = order[start:start + batch]
            loss, grads = loss_and_grad(params, X[idx], y[idx], cfg["alpha"])
            if not np.isfinite(loss):
                raise FloatingPointError("MLP training diverged (non-finite loss)")
            step += 1
            lr_t = lr * np.sqrt(1.0 - b2 ** step) / (1.0 - b1 ** step)
            for k in PARAM_NAMES:
                m[k] = b1 * m[k] + (1.0 - b1) * grads[k]
                v[k] = b2 * v[k] + (1.0 - b2) * grads[k] ** 2
                params[k] = params[k] - lr_t * m[k] / (np.sqrt(v[k]) + eps)
    params["final_loss"] = np.array(loss)
    return params


def scores(params: dict, X) -> np.ndarray:
    return _forward(params, np.asarray(X, dtype=float))[2]
