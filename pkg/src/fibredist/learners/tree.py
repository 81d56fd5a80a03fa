"""CART-style regression tree with complexity-parameter gated splits.

Splits maximize the sum-of-squares reduction over an exhaustive scan of all
midpoints between distinct feature values; a split is kept only when its
reduction is at least cp times the root sum of squares. Equal gains resolve
to the lowest feature index, then the lowest threshold.
"""

from __future__ import annotations

import numpy as np

MIN_SPLIT = 20  # rows required to attempt a split
MIN_LEAF = 7    # rows required in each child


def best_split(X: np.ndarray, y: np.ndarray, min_leaf: int = 1):
    """Exhaustive best split: (gain, feature, threshold) or None.

    Gain is the SSE reduction of splitting at x <= threshold.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n = len(y)
    if n < 2 * min_leaf:
        return None
    sse_parent = float(((y - y.mean()) ** 2).sum())
    best = None
    for j in range(X.shape[1]):
        order = np.argsort(X[:, j], kind="stable")
        xs = X[order, j]
        ys = y[order]
        csum = np.cumsum(ys)
        csq = np.cumsum(ys * ys)
        total = csum[-1]
        total_sq = csq[-1]
        k = np.arange(1, n)  # left child size
        valid = (xs[1:] > xs[:-1]) & (k >= min_leaf) & (n - k >= min_leaf)
        if not valid.any():
            continue
        sse_left = csq[:-1] - csum[:-1] ** 2 / k
        right_sum = total - csum[:-1]
        sse_right = (total_sq - csq[:-1]) - right_sum ** 2 / (n - k)
        gain = np.where(valid, sse_parent - sse_left - sse_right, -np.inf)
        pos = int(np.argmax(gain))
        if not np.isfinite(gain[pos]):
            continue
        if best is None or gain[pos] > best[0]:
            best = (float(gain[pos]), j, float(0.5 * (xs[pos] + xs[pos + 1])))
    return best


def fit_tree(
    X: np.ndarray,
    y: np.ndarray,
    cp: float,
    min_split: int = MIN_SPLIT,
    min_leaf: int = MIN_LEAF,
) -> dict:
    """Grow a tree; degenerate data yields a single-leaf stump."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n = len(y)
    sse_root = float(((y - y.mean()) ** 2).sum())
    feature: list[int] = []
    threshold: list[float] = []
    left: list[int] = []
    right: list[int] = []
    value: list[float] = []
    gain: list[float] = []
    n_rows: list[int] = []

    def grow(rows: np.ndarray) -> int:
        node = len(feature)
        yr = y[rows]
        feature.append(-1)
        threshold.append(np.nan)
        left.append(-1)
        right.append(-1)
        value.append(float(yr.mean()))
        gain.append(0.0)
        n_rows.append(len(rows))
        if len(rows) < min_split or sse_root == 0.0:
            return node
        split = best_split(X[rows], yr, min_leaf=min_leaf)
        if split is None:
            return node
        g, j, t = split
        if g < cp * sse_root or g <= 1e-12 * (float((yr * yr).sum()) + 1.0):
            return node
        feature[node] = j
        threshold[node] = t
        gain[node] = g
        go_left = X[rows, j] <= t
        left[node] = grow(rows[go_left])
        right[node] = grow(rows[~go_left])
        return node

    grow(np.arange(n))
    return {
        "feature": np.array(feature, dtype=np.int32),
        "threshold": np.array(threshold, dtype=float),
        "left": np.array(left, dtype=np.int32),
        "right": np.array(right, dtype=np.int32),
        "value": np.array(value, dtype=float),
        "gain": np.array(gain, dtype=float),
        "n_rows": np.array(n_rows, dtype=np.int32),
        "sse_root": sse_root,
        "cp": float(cp),
        "min_split": int(min_split),
        "min_leaf": int(min_leaf),
    }


def truncate_tree(state: dict, cp: float) -> dict:
    """Derive the tree that growing with a larger cp would have produced.

    Growth is greedy and the best split at a node does not depend on cp, so
    raising cp is exactly a top-down truncation at the first split whose
    gain falls below cp times the root sum of squares.
    """
    if cp < state["cp"]:
        raise ValueError("can only truncate to a larger cp than the grown tree")
    feature = state["feature"].copy()
    left = state["left"].copy()
    right = state["right"].copy()
    sse_root = state["sse_root"]
    keep = np.zeros(len(feature), dtype=bool)
    stack = [0]
    while stack:
        node = stack.pop()
        keep[node] = True
        if feature[node] >= 0 and state["gain"][node] >= cp * sse_root:
            stack.append(int(state["left"][node]))
            stack.append(int(state["right"][node]))
        else:
            feature[node] = -1
            left[node] = -1
            right[node] = -1
    new = dict(state)
    new.update(feature=feature, left=left, right=right, cp=float(cp))
    return new


def predict_tree(state: dict, X: np.ndarray) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    node = np.zeros(len(X), dtype=np.int64)
    feature = state["feature"]
    threshold = state["threshold"]
    left = state["left"]
    right = state["right"]
    active = feature[node] >= 0
    while active.any():
        idx = np.nonzero(active)[0]
        cur = node[idx]
        go_left = X[idx, feature[cur]] <= threshold[cur]
        node[idx] = np.where(go_left, left[cur], right[cur])
        active = feature[node] >= 0
    return state["value"][node]


def tree_feature_gains(state: dict, p: int) -> np.ndarray:
    """Total SSE reduction credited to each feature over all kept splits."""
    gains = np.zeros(p)
    stack = [0]
    while stack:
        node = stack.pop()
        j = int(state["feature"][node])
        if j >= 0:
            gains[j] += float(state["gain"][node])
            stack.append(int(state["left"][node]))
            stack.append(int(state["right"][node]))
    return gains
