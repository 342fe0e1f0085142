"""Random forest of CART trees grown to purity on bootstrap samples."""
from __future__ import annotations

import math

import numpy as np

DEFAULTS = {"n_trees": 100, "max_features": "sqrt"}

LEAF = -1


def _n_candidates(d: int, max_features) -> int:
    if max_features == "sqrt":
        return max(1, int(round(math.sqrt(d))))
    if max_features is None or max_features == "all":
        return d
    return max(1, min(d, int(max_features)))


def _best_split(Xn, yn, n_classes, features, k):
    """Lowest weighted Gini split among the first ``k`` non-constant features.

    Thresholds are training values (go left iff ``x <= threshold``), so a
    split depends only on the ordering of values.
    """
    n = len(yn)
    onehot = np.zeros((n, n_classes))
    onehot[np.arange(n), yn] = 1.0
    total = onehot.sum(axis=0)
    nl = np.arange(1, n, dtype=float)
    nr = n - nl
    best_imp, best_f, best_t = np.inf, LEAF, 0.0
    tried = 0
    for f in features:
        v = Xn[:, f]
        order = np.argsort(v, kind="stable")
        vs = v[order]
        if vs[0] == vs[-1]:
            continue
        tried += 1
        left = np.cumsum(onehot[order], axis=0)[:-1]
        right = total - left
        g = nl * (1.0 - np.sum((left / nl[:, None]) ** 2, axis=1)) \
            + nr * (1.0 - np.sum((right / nr[:, None]) ** 2, axis=1))
        g[vs[:-1] == vs[1:]] = np.inf
        j = int(np.argmin(g))
        if g[j] < best_imp:
            best_imp, best_f, best_t = g[j], int(f), float(vs[j])
        if tried == k:
            break
    return best_f, best_t


def grow_tree(X, y, n_classes: int, k: int, rng: np.random.Generator) -> dict:
    """Grow one unpruned tree; returns flat node arrays."""
    feature, threshold, left, right, value = [], [], [], [], []

    def new_node():
        for arr, v in ((feature, LEAF), (threshold, 0.0), (left, LEAF), (right, LEAF), (value, 0)):
            arr.append(v)
        return len(feature) - 1

    root = new_node()
    stack = [(root, np.arange(len(y)))]
    d = X.shape[1]
    while stack:
        node, idx = stack.pop()
        yn = y[idx]
        counts = np.bincount(yn, minlength=n_classes)
        value[node] = int(np.argmax(counts))
        if len(idx) < 2 or counts.max() == len(idx):
            continue
        f, t = _best_split(X[idx], yn, n_classes, rng.permutation(d), k)
        if f == LEAF:
            continue
        go_left = X[idx, f] <= t
        lnode, rnode = new_node(), new_node()
        feature[node], threshold[node], left[node], right[node] = f, t, lnode, rnode
        stack.append((rnode, idx[~go_left]))
        stack.append((lnode, idx[go_left]))
    return {
        "feature": np.array(feature, dtype=int),
        "threshold": np.array(threshold, dtype=float),
        "left": np.array(left, dtype=int),
        "right": np.array(right, dtype=int),
        "value": np.array(value, dtype=int),
    }


def tree_predict(tree: dict, X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    node = np.zeros(len(X), dtype=int)
    rows = np.arange(len(X))
    active = tree["feature"][node] != LEAF
    while active.any():
        r, nd = rows[active], node[active]
        go_left = X[r, tree["feature"][nd]] <= tree["threshold"][nd]
        node[r] = np.where(go_left, tree["left"][nd], tree["right"][nd])
        active = tree["feature"][node] != LEAF
    return tree["value"][node]


def fit(X, y, n_classes: int, hp: dict, seed: int) -> dict:
    X = np.asarray(X, dtype=float)
    n, d = X.shape
    n_trees = int(hp.get("n_trees", DEFAULTS["n_trees"]))
    k = _n_candidates(d, hp.get("max_features", DEFAULTS["max_features"]))
    trees = []
    # one independent stream per tree: results do not depend on build order
    for child in np.random.SeedSequence(seed).spawn(n_trees):
        rng = np.random.default_rng(child)
        boot = rng.integers(0, n, size=n)
        trees.append(grow_tree(X[boot], y[boot], n_classes, k, rng))
    return {"trees": trees, "n_classes": n_classes}


def scores(params: dict, X) -> np.ndarray:
    """Vote fractions per class."""
    trees = params["trees"]
    n_classes = int(params["n_classes"])
    votes = np.stack([tree_predict(t, X) for t in trees], axis=1)
    out = np.zeros((len(votes), n_classes))
    for c in range(n_classes):
        out[:, c] = (votes == c).sum(axis=1)
    return out / len(trees)
