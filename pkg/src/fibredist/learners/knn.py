"""k-nearest-neighbour regression with lowest-index tie breaking."""

from __future__ import annotations

import numpy as np

_CHUNK = 2048


def fit_knn(X: np.ndarray, y: np.ndarray, k: int) -> dict:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if k < 1:
        raise ValueError("k must be at least 1")
    return {"X": X.copy(), "y": y.copy(), "k": int(min(k, len(y)))}


def predict_knn(state: dict, X: np.ndarray) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    train = state["X"]
    k = state["k"]
    train_sq = (train * train).sum(axis=1)
    out = np.empty(len(X))
    for start in range(0, len(X), _CHUNK):
        chunk = X[start:start + _CHUNK]
        d2 = (chunk * chunk).sum(axis=1)[:, None] + train_sq[None, :] - 2.0 * chunk @ train.T
        # Stable argsort resolves distance ties in favour of the lower
        # training-row index.
        idx = np.argsort(d2, axis=1, kind="stable")[:, :k]
        out[start:start + _CHUNK] = state["y"][idx].mean(axis=1)
    return out
