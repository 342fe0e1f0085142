"""Linear discriminant analysis via singular value decompositions.

No covariance matrix is formed. The within-class scatter is whitened through
the SVD of the standardized, class-centered data; a second SVD of the
whitened class means gives the discriminant directions. Directions with
singular values under the tolerance are discarded, which takes care of
collinear or duplicated columns.
"""
from __future__ import annotations

import numpy as np

DEFAULTS = {"n_components": 1, "tol": 1e-4}


def fit(X, y, n_classes: int, hp: dict, seed: int) -> dict:
    X = np.asarray(X, dtype=float)
    n, d = X.shape
    tol = hp.get("tol", DEFAULTS["tol"])
    counts = np.bincount(y, minlength=n_classes)
    if np.any(counts < 2):
        raise ValueError("LDA needs at least 2 rows per class")
    if np.ptp(X, axis=0).max(initial=0.0) == 0:
        raise ValueError("degenerate design: every feature column is constant")
    priors = counts / n
    means = np.vstack([X[y == k].mean(axis=0) for k in range(n_classes)])
    centered = X - means[y]
    std = centered.std(axis=0)
    std[std == 0] = 1.0

    within = np.sqrt(1.0 / (n - n_classes)) * (centered / std)
    _, s, vt = np.linalg.svd(within, full_matrices=False)
    rank = int(np.sum(s > tol))
    if rank == 0:
        raise ValueError("degenerate design: no within-class variance")
    scalings = (vt[:rank] / std).T / s[:rank]

    xbar = priors @ means
    between = (np.sqrt(n * priors / (n_classes - 1)) * (means - xbar).T).T @ scalings
    _, s, vt = np.linalg.svd(between, full_matrices=False)
    rank = int(np.sum(s > tol * s[0])) if s.size and s[0] > 0 else 0
    scalings = scalings @ vt.T[:, :max(rank, 1)]

    coef = (means - xbar) @ scalings
    intercept = -0.5 * np.sum(coef ** 2, axis=1) + np.log(priors)
    coef = coef @ scalings.T
    intercept = intercept - xbar @ coef.T
    return {
        "coef": coef,
        "intercept": intercept,
        "scalings": scalings,
        "xbar": xbar,
        "explained": s[:max(rank, 1)] ** 2 / np.sum(s ** 2) if np.sum(s ** 2) > 0 else np.ones(1),
    }


def decision(params: dict, X) -> np.ndarray:
    return np.asarray(X, dtype=float) @ params["coef"].T + params["intercept"]


def scores(params: dict, X) -> np.ndarray:
    """Posterior class probabilities (softmax of the linear scores)."""
    z = decision(params, X)
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def transform(params: dict, X, n_components: int = 1) -> np.ndarray:
    """Project onto the leading discriminant directions."""
    return (np.asarray(X, dtype=float) - params["xbar"]) @ params["scalings"][:, :n_components]
