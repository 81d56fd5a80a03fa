"""Random forest regression: bootstrap resampling plus random feature subsets.

Each tree grows on n bootstrap draws (stored as per-row weights over the
distinct sampled rows); every split chooses among ``mtry`` features sampled
without replacement and maximizes the sum-of-squares reduction over
quantile-binned candidate thresholds (at most 32 bins per feature, exact
midpoints when a feature has few distinct values). A node is split only when
it holds more than ``min_node_size`` bootstrap rows and some candidate offers
a positive variance reduction. Growth is fully deterministic given the fit
seed; tree t draws its xorshift stream from the seed split by tree index, so
any parallel schedule reproduces the serial result bit for bit.
"""

from __future__ import annotations

import numpy as np
from numba import njit, prange

from ..seeding import rng_for

MAX_BINS = 16
SMALL_NODE_CAP = 16
DEFAULT_N_TREES = 500


def _bin_feature(values: np.ndarray) -> np.ndarray:
    """Candidate thresholds for one feature (ascending, possibly empty)."""
    vals = np.unique(values)
    if len(vals) < 2:
        return np.empty(0)
    if len(vals) <= MAX_BINS:
        return 0.5 * (vals[:-1] + vals[1:])
    idx = np.unique(np.linspace(0, len(vals) - 1, MAX_BINS).astype(np.int64))
    sel = vals[idx]
    return 0.5 * (sel[:-1] + sel[1:])


@njit(inline="always")
def _xorshift(x):  # pragma: no cover - jitted
    x ^= x >> np.uint64(12)
    x ^= x << np.uint64(25)
    x ^= x >> np.uint64(27)
    return x


_INV53 = 1.0 / 9007199254740992.0  # 2^-53


@njit(inline="always")
def _rand_below(state, k):  # pragma: no cover - jitted
    """(new_state, uniform integer in [0, k)) from an xorshift64* stream."""
    x = _xorshift(state)
    u = np.float64(x >> np.uint64(11)) * _INV53
    return x, np.int64(u * k)


@njit(cache=True, nogil=True, fastmath=True, parallel=True)
def _grow_forest(codes, y, n_cuts, mtry, min_node, seeds,
                 feat, thr_bin, left, right, value, n_nodes, tree_gain, inv):
    # pragma: no cover - jitted
    n, p = codes.shape
    n_trees = len(seeds)
    max_nodes = 2 * n + 1
    sample_feats = mtry < p
    for t in prange(n_trees):
        boot = np.empty(n, dtype=np.int32)
        rows_a = np.empty(n, dtype=np.int32)
        wts_a = np.empty(n, dtype=np.int32)
        wy_a = np.empty(n, dtype=np.float64)
        rows_b = np.empty(n, dtype=np.int32)
        wts_b = np.empty(n, dtype=np.int32)
        wy_b = np.empty(n, dtype=np.float64)
        counts = np.zeros(MAX_BINS, dtype=np.int64)
        sums = np.zeros(MAX_BINS, dtype=np.float64)
        small_b = np.empty(SMALL_NODE_CAP, dtype=np.int64)
        small_i = np.empty(SMALL_NODE_CAP, dtype=np.int64)
        perm = np.empty(p, dtype=np.int64)
        stack_id = np.empty(max_nodes, dtype=np.int32)
        stack_s = np.empty(max_nodes, dtype=np.int32)
        stack_e = np.empty(max_nodes, dtype=np.int32)
        stack_m = np.empty(max_nodes, dtype=np.int64)
        stack_sum = np.empty(max_nodes, dtype=np.float64)
        stack_sum2 = np.empty(max_nodes, dtype=np.float64)
        stack_buf = np.empty(max_nodes, dtype=np.int8)
        if not sample_feats:
            for q in range(p):
                perm[q] = q
        state = seeds[t] | np.uint64(1)
        for _ in range(20):  # decorrelate nearby seeds
            state = _xorshift(state)
        for i in range(n):
            boot[i] = 0
        for i in range(n):
            state, idx = _rand_below(state, n)
            boot[idx] += 1
        n_distinct = 0
        root_sum = 0.0
        root_sum2 = 0.0
        for i in range(n):
            w = boot[i]
            if w > 0:
                rows_a[n_distinct] = i
                wts_a[n_distinct] = w
                yv = y[i]
                wyv = w * yv
                wy_a[n_distinct] = wyv
                n_distinct += 1
                root_sum += wyv
                root_sum2 += wyv * yv
        base_off = t * max_nodes
        n_used = 1
        top = -1
        # push the root unless it is already a leaf
        if (n <= min_node or n_distinct < 2
                or root_sum2 - root_sum * root_sum * inv[n] <= 1e-12 * (root_sum2 + 1.0)):
            feat[base_off] = -1
            left[base_off] = 0
            right[base_off] = 0
            thr_bin[base_off] = 0
            value[base_off] = root_sum * inv[n]
        else:
            top = 0
            stack_id[0] = 0
            stack_s[0] = 0
            stack_e[0] = n_distinct
            stack_m[0] = n
            stack_sum[0] = root_sum
            stack_sum2[0] = root_sum2
            stack_buf[0] = 0
        while top >= 0:
            node = stack_id[top]
            s = stack_s[top]
            e = stack_e[top]
            m = stack_m[top]
            sum_y = stack_sum[top]
            sum_y2 = stack_sum2[top]
            buf = stack_buf[top]
            top -= 1
            if buf == 0:
                rows = rows_a
                wts = wts_a
                wy = wy_a
                dst_rows = rows_b
                dst_wts = wts_b
                dst_wy = wy_b
            else:
                rows = rows_b
                wts = wts_b
                wy = wy_b
                dst_rows = rows_a
                dst_wts = wts_a
                dst_wy = wy_a
            gain_floor = 1e-12 * (sum_y2 + 1.0)
            base = sum_y * sum_y * inv[m]
            if sample_feats:
                # mtry distinct features, ascending so equal gains take the
                # lowest feature index
                for q in range(p):
                    perm[q] = q
                for q in range(mtry):
                    state, r2 = _rand_below(state, p - q)
                    r2 += q
                    tmp = perm[q]
                    perm[q] = perm[r2]
                    perm[r2] = tmp
                for a in range(1, mtry):
                    key = perm[a]
                    b2 = a - 1
                    while b2 >= 0 and perm[b2] > key:
                        perm[b2 + 1] = perm[b2]
                        b2 -= 1
                    perm[b2 + 1] = key
            best_gain = 0.0
            best_f = -1
            best_bin = -1
            for q in range(mtry):
                f = perm[q]
                if n_cuts[f] == 0:
                    continue
                if e - s <= SMALL_NODE_CAP:
                    # sort entry positions by code; scan group boundaries
                    cnt = e - s
                    for k in range(cnt):
                        bv = np.int64(codes[rows[s + k], f])
                        a = k - 1
                        while a >= 0 and small_b[a] > bv:
                            small_b[a + 1] = small_b[a]
                            small_i[a + 1] = small_i[a]
                            a -= 1
                        small_b[a + 1] = bv
                        small_i[a + 1] = k
                    cl = 0
                    sl = 0.0
                    for k in range(cnt - 1):
                        j = s + small_i[k]
                        cl += wts[j]
                        sl += wy[j]
                        if small_b[k + 1] > small_b[k]:
                            sr = sum_y - sl
                            gain = sl * sl * inv[cl] + sr * sr * inv[m - cl] - base
                            if gain > best_gain:
                                best_gain = gain
                                best_f = f
                                best_bin = small_b[k]
                    continue
                bmin = MAX_BINS
                bmax = -1
                for ri in range(s, e):
                    b = codes[rows[ri], f]
                    counts[b] += wts[ri]
                    sums[b] += wy[ri]
                    if b < bmin:
                        bmin = b
                    if b > bmax:
                        bmax = b
                # fused scan and clear; an empty bin recomputes an equal gain
                # and loses the strict comparison, keeping the lowest bin
                cl = 0
                sl = 0.0
                for b in range(bmin, bmax):
                    cl += counts[b]
                    sl += sums[b]
                    counts[b] = 0
                    sums[b] = 0.0
                    sr = sum_y - sl
                    gain = sl * sl * inv[cl] + sr * sr * inv[m - cl] - base
                    if gain > best_gain:
                        best_gain = gain
                        best_f = f
                        best_bin = b
                counts[bmax] = 0
                sums[bmax] = 0.0
            if best_f < 0 or best_gain <= gain_floor:
                feat[base_off + node] = -1
                left[base_off + node] = 0
                right[base_off + node] = 0
                thr_bin[base_off + node] = 0
                value[base_off + node] = sum_y * inv[m]
                continue
            # stable partition into the other buffer, child stats fused
            nl = s
            nr = e - 1
            ml = 0
            sum_l = 0.0
            sum2_l = 0.0
            for ri in range(s, e):
                r3 = rows[ri]
                if codes[r3, best_f] <= best_bin:
                    dst_rows[nl] = r3
                    dst_wts[nl] = wts[ri]
                    dst_wy[nl] = wy[ri]
                    nl += 1
                    ml += wts[ri]
                    sum_l += wy[ri]
                    sum2_l += wy[ri] * y[r3]
                else:
                    dst_rows[nr] = r3
                    dst_wts[nr] = wts[ri]
                    dst_wy[nr] = wy[ri]
                    nr -= 1
            left_id = n_used
            right_id = n_used + 1
            n_used += 2
            feat[base_off + node] = best_f
            thr_bin[base_off + node] = best_bin
            left[base_off + node] = left_id
            right[base_off + node] = right_id
            value[base_off + node] = 0.0
            tree_gain[t, best_f] += best_gain
            other = 1 - buf
            # right child: emit a leaf immediately when it cannot split
            mr = m - ml
            sum_r = sum_y - sum_l
            sum2_r = sum_y2 - sum2_l
            if (mr <= min_node or e - nl < 2
                    or sum2_r - sum_r * sum_r * inv[mr] <= 1e-12 * (sum2_r + 1.0)):
                feat[base_off + right_id] = -1
                left[base_off + right_id] = 0
                right[base_off + right_id] = 0
                thr_bin[base_off + right_id] = 0
                value[base_off + right_id] = sum_r * inv[mr]
            else:
                top += 1
                stack_id[top] = right_id
                stack_s[top] = nl
                stack_e[top] = e
                stack_m[top] = mr
                stack_sum[top] = sum_r
                stack_sum2[top] = sum2_r
                stack_buf[top] = other
            if (ml <= min_node or nl - s < 2
                    or sum2_l - sum_l * sum_l * inv[ml] <= 1e-12 * (sum2_l + 1.0)):
                feat[base_off + left_id] = -1
                left[base_off + left_id] = 0
                right[base_off + left_id] = 0
                thr_bin[base_off + left_id] = 0
                value[base_off + left_id] = sum_l * inv[ml]
            else:
                top += 1
                stack_id[top] = left_id
                stack_s[top] = s
                stack_e[top] = nl
                stack_m[top] = ml
                stack_sum[top] = sum_l
                stack_sum2[top] = sum2_l
                stack_buf[top] = other
        n_nodes[t] = n_used


@njit(cache=True, nogil=True)
def _predict_forest(feat, thr, left, right, value, offsets, X):
    # pragma: no cover - jitted
    n_trees = len(offsets) - 1
    m = X.shape[0]
    out = np.zeros(m)
    for t in range(n_trees):
        base = offsets[t]
        for i in range(m):
            node = base
            f = feat[node]
            while f >= 0:
                if X[i, f] <= thr[node]:
                    node = base + left[node]
                else:
                    node = base + right[node]
                f = feat[node]
            out[i] += value[node]
    return out / n_trees


def prepare_bins(X: np.ndarray) -> dict:
    """Quantile-binned codes shared by every forest grown on the same rows."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    n, p = X.shape
    cut_list = [_bin_feature(X[:, j]) for j in range(p)]
    n_cuts = np.array([len(c) for c in cut_list], dtype=np.int64)
    cuts = np.zeros((p, max(1, int(n_cuts.max()))), dtype=float)
    codes = np.zeros((n, p), dtype=np.uint8)
    for j, c in enumerate(cut_list):
        if len(c):
            cuts[j, : len(c)] = c
            codes[:, j] = np.searchsorted(c, X[:, j], side="left").astype(np.uint8)
    return {"codes": codes, "cuts": cuts, "n_cuts": n_cuts}


def fit_forest_binned(
    bins: dict,
    y: np.ndarray,
    mtry: int,
    min_node_size: int,
    n_trees: int = DEFAULT_N_TREES,
    seed: int = 0,
) -> dict:
    y = np.asarray(y, dtype=float)
    codes = bins["codes"]
    n, p = codes.shape
    if n < 1:
        raise ValueError("cannot fit on an empty sample")
    if n_trees < 1 or min_node_size < 1:
        raise ValueError("n_trees and min_node_size must be positive")
    mtry = int(min(max(mtry, 1), p))
    if n > 32000:
        raise ValueError("forest growth supports at most 32000 rows per fit")
    seeds = rng_for(seed, "forest", "trees").integers(0, 2**64, size=n_trees, dtype=np.uint64)
    stride = 2 * n + 1
    cap = n_trees * stride
    feat = np.empty(cap, dtype=np.int8)
    thr_bin = np.empty(cap, dtype=np.uint8)
    left = np.empty(cap, dtype=np.uint16)
    right = np.empty(cap, dtype=np.uint16)
    value = np.empty(cap, dtype=float)
    n_nodes = np.zeros(n_trees, dtype=np.int64)
    tree_gain = np.zeros((n_trees, p), dtype=float)
    inv = np.concatenate([[0.0], 1.0 / np.arange(1, n + 1, dtype=float)])
    _grow_forest(
        codes, y, bins["n_cuts"], np.int64(mtry),
        np.int64(min_node_size), seeds,
        feat, thr_bin, left, right, value, n_nodes, tree_gain, inv,
    )
    offsets = np.zeros(n_trees + 1, dtype=np.int64)
    np.cumsum(n_nodes, out=offsets[1:])
    windows = [slice(t * stride, t * stride + int(n_nodes[t])) for t in range(n_trees)]
    return {
        "feat": np.concatenate([feat[w] for w in windows]),
        "thr_bin": np.concatenate([thr_bin[w] for w in windows]),
        "left": np.concatenate([left[w] for w in windows]),
        "right": np.concatenate([right[w] for w in windows]),
        "value": np.concatenate([value[w] for w in windows]),
        "offsets": offsets,
        "cuts": bins["cuts"],
        "n_cuts": bins["n_cuts"],
        "feature_gains": tree_gain.sum(axis=0),
        "mtry": mtry,
        "min_node_size": int(min_node_size),
        "n_trees": int(n_trees),
        "seed": int(seed),
    }


def fit_forest(
    X: np.ndarray,
    y: np.ndarray,
    mtry: int,
    min_node_size: int,
    n_trees: int = DEFAULT_N_TREES,
    seed: int = 0,
) -> dict:
    return fit_forest_binned(prepare_bins(X), y, mtry, min_node_size, n_trees, seed)


def predict_forest(state: dict, X: np.ndarray) -> np.ndarray:
    X = np.ascontiguousarray(np.atleast_2d(np.asarray(X, dtype=float)))
    thr = state.get("_thr_cache")
    if thr is None:
        # resolve bin indices to float thresholds once per fitted model
        thr = state["cuts"][np.maximum(state["feat"], 0), state["thr_bin"]]
        state["_thr_cache"] = thr
    return _predict_forest(
        state["feat"], thr, state["left"], state["right"],
        state["value"], state["offsets"], X,
    )
