"""Multivariate adaptive regression splines with GCV backward pruning.

The forward pass starts from the intercept and repeatedly adds the reflected
hinge pair (parent * max(0, x_j - t), parent * max(0, t - x_j)) that most
reduces the residual sum of squares, with knots at observed feature values
(thinned to a quantile subset when a feature has many distinct values) and
product interaction order bounded by ``degree``. Candidate knots are scored
in one descending sweep per (parent, feature) using running sums, so every
knot costs O(terms) after a single O(n * terms) pass. The backward pass
deletes terms along the classic least-RSS-increase sequence and keeps the
subset of size at most ``nprune`` minimizing GCV = (RSS/n) / (1 - C(M)/n)^2
with C(M) = M + pen * (M - 1) / 2, pen = 2 for additive fits, 3 otherwise.
"""

from __future__ import annotations

import numpy as np
from numba import njit

MAX_TERMS = 30          # forward-pass cap, intercept included
KNOT_CAP = 32           # max candidate knots per feature
FORWARD_TOL = 1e-4      # stop when best gain < tol * total sum of squares

Factor = tuple[int, float, int]   # (feature, knot, sign)
Term = tuple[Factor, ...]         # empty tuple is the intercept


def hinge(x, knot: float, sign: int):
    """Reflected hinge max(0, sign * (x - knot))."""
    return np.maximum(0.0, sign * (np.asarray(x, dtype=float) - knot))


def evaluate_term(term: Term, X: np.ndarray) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    col = np.ones(len(X))
    for feature, knot, sign in term:
        col = col * hinge(X[:, feature], knot, sign)
    return col


def candidate_knots(values: np.ndarray, cap: int = KNOT_CAP) -> np.ndarray:
    """Observed values as knot candidates, quantile-thinned above the cap."""
    vals = np.unique(np.asarray(values, dtype=float))
    if len(vals) <= cap:
        return vals
    idx = np.unique(np.round(np.linspace(0, len(vals) - 1, cap)).astype(int))
    return vals[idx]


@njit(cache=True, nogil=True)
def _scan_pair(Q, M, r, pb, x, order_desc, knots_desc):
    # pragma: no cover - jitted
    """Best hinge-pair gain over all knots for one (parent, feature).

    One pass over rows in descending x order accumulates the runningsums
    needed to evaluate, at every knot t, the residual-space geometry of the
    pair (pb*(x-t)+, pb*(t-x)+); gains match an explicit least-squares
    evaluation of each candidate. Returns (gain, knot index in ascending
    order); ties prefer the lowest knot.
    """
    n = len(x)
    K = len(knots_desc)
    S1q = np.zeros(M)
    Sxq = np.zeros(M)
    snap_S1q = np.empty((K, M))
    snap_Sxq = np.empty((K, M))
    snap_scal = np.empty((K, 5))
    s11 = 0.0
    sx1 = 0.0
    sxx = 0.0
    s1r = 0.0
    sxr = 0.0
    ptr = 0
    for k in range(K):
        t = knots_desc[k]
        while ptr < n and x[order_desc[ptr]] > t:
            i = order_desc[ptr]
            w = pb[i]
            if w != 0.0:
                xi = x[i]
                ww = w * w
                s11 += ww
                sx1 += ww * xi
                sxx += ww * xi * xi
                wr = w * r[i]
                s1r += wr
                sxr += wr * xi
                wx = w * xi
                for m in range(M):
                    q = Q[i, m]
                    S1q[m] += w * q
                    Sxq[m] += wx * q
            ptr += 1
        for m in range(M):
            snap_S1q[k, m] = S1q[m]
            snap_Sxq[k, m] = Sxq[m]
        snap_scal[k, 0] = s11
        snap_scal[k, 1] = sx1
        snap_scal[k, 2] = sxx
        snap_scal[k, 3] = s1r
        snap_scal[k, 4] = sxr
    while ptr < n:
        i = order_desc[ptr]
        w = pb[i]
        if w != 0.0:
            xi = x[i]
            ww = w * w
            s11 += ww
            sx1 += ww * xi
            sxx += ww * xi * xi
            wr = w * r[i]
            s1r += wr
            sxr += wr * xi
            wx = w * xi
            for m in range(M):
                q = Q[i, m]
                S1q[m] += w * q
                Sxq[m] += wx * q
        ptr += 1
    # full-pass sums give the parent and parent*x projections
    u00 = s11
    u01 = sx1
    u11 = sxx
    ru0 = s1r
    ru1 = sxr
    c00 = 0.0
    c11 = 0.0
    c01 = 0.0
    for m in range(M):
        c00 += S1q[m] * S1q[m]
        c11 += Sxq[m] * Sxq[m]
        c01 += S1q[m] * Sxq[m]
    best_gain = 0.0
    best_k = -1
    for k in range(K - 1, -1, -1):  # ascending knot order for tie-breaking
        t = knots_desc[k]
        a11 = snap_scal[k, 0]
        ax1 = snap_scal[k, 1]
        axx = snap_scal[k, 2]
        a1r = snap_scal[k, 3]
        axr = snap_scal[k, 4]
        # plus-hinge quantities at knot t
        rU = axr - t * a1r
        nU2 = axx - 2.0 * t * ax1 + t * t * a11
        aa = 0.0   # ||Q^T u+||^2
        ac0 = 0.0  # (Q^T u+) . (Q^T pb)
        ac1 = 0.0  # (Q^T u+) . (Q^T pb x)
        for m in range(M):
            am = snap_Sxq[k, m] - t * snap_S1q[k, m]
            aa += am * am
            ac0 += am * S1q[m]
            ac1 += am * Sxq[m]
        w2p = nU2 - aa
        if w2p < 0.0:
            w2p = 0.0
        u0U = ax1 - t * a11
        u1U = axx - t * ax1
        rUm = t * ru0 - ru1 + rU
        UUm = t * t * u00 - 2.0 * t * u01 + u11 + 2.0 * (t * u0U - u1U) + nU2
        qq_m = t * t * c00 + c11 + aa - 2.0 * t * c01 + 2.0 * t * ac0 - 2.0 * ac1
        w2m = UUm - qq_m
        if w2m < 0.0:
            w2m = 0.0
        crossU = t * u0U - u1U + nU2
        cross = crossU - (t * ac0 - ac1 + aa)
        valid_p = w2p > 1e-10 * max(nU2, 1e-300)
        valid_m = w2m > 1e-10 * max(UUm, 1e-300)
        det = w2p * w2m - cross * cross
        if valid_p and valid_m and det > 1e-10 * w2p * w2m:
            gain = (w2m * rU * rU - 2.0 * cross * rU * rUm + w2p * rUm * rUm) / det
        else:
            gain = 0.0
            if valid_p:
                gain = rU * rU / w2p
            if valid_m:
                gm = rUm * rUm / w2m
                if gm > gain:
                    gain = gm
        if gain > best_gain:
            best_gain = gain
            best_k = k
    return best_gain, best_k


def forward_pass(
    X: np.ndarray,
    y: np.ndarray,
    degree: int,
    max_terms: int = MAX_TERMS,
    knot_cap: int = KNOT_CAP,
) -> dict:
    """Greedy hinge-pair selection; returns terms and their basis matrix."""
    X = np.atleast_2d(np.ascontiguousarray(np.asarray(X, dtype=float)))
    y = np.asarray(y, dtype=float)
    n, p = X.shape
    if n < 4:
        raise ValueError("MARS needs at least 4 rows")
    if degree not in (1, 2):
        raise ValueError("degree must be 1 or 2")
    knots = [candidate_knots(X[:, j], knot_cap) for j in range(p)]
    knots_desc = [k[::-1].copy() for k in knots]
    orders_desc = [np.argsort(-X[:, j], kind="stable").astype(np.int64) for j in range(p)]

    B = np.empty((n, max_terms))
    Q = np.empty((n, max_terms))
    B[:, 0] = 1.0
    Q[:, 0] = 1.0 / np.sqrt(n)
    terms: list[Term] = [()]
    M = 1
    r = y - Q[:, 0] * (Q[:, 0] @ y)
    ss_total = float(r @ r)
    if ss_total <= 0.0:
        return {"terms": terms, "basis": B[:, :M].copy(), "knots": knots}

    def try_add(col: np.ndarray, term: Term) -> bool:
        nonlocal M, r
        norm2 = float(col @ col)
        if norm2 <= 0.0:
            return False
        w = col - Q[:, :M] @ (Q[:, :M].T @ col)
        w = w - Q[:, :M] @ (Q[:, :M].T @ w)  # second pass for stability
        wn2 = float(w @ w)
        if wn2 <= 1e-10 * norm2:
            return False  # collinear with the current basis: drop the term
        q = w / np.sqrt(wn2)
        B[:, M] = col
        Q[:, M] = q
        terms.append(term)
        M += 1
        r = r - q * (q @ r)
        return True

    while M + 2 <= max_terms:
        best_gain = 0.0
        best = None
        for parent_idx in range(M):
            parent = terms[parent_idx]
            if len(parent) >= degree:
                continue
            used = {f for f, _, _ in parent}
            pb = np.ascontiguousarray(B[:, parent_idx])
            for j in range(p):
                if j in used or len(knots[j]) == 0:
                    continue
                gain, k_idx = _scan_pair(
                    Q, M, r, pb, np.ascontiguousarray(X[:, j]),
                    orders_desc[j], knots_desc[j],
                )
                if k_idx >= 0 and gain > best_gain:
                    best_gain = float(gain)
                    best = (parent_idx, j, float(knots_desc[j][k_idx]))
        if best is None or best_gain < FORWARD_TOL * ss_total:
            break
        parent_idx, j, knot = best
        parent = terms[parent_idx]
        pb = B[:, parent_idx].copy()
        x = X[:, j]
        added = 0
        for sign in (1, -1):
            col = pb * hinge(x, knot, sign)
            if try_add(col, parent + ((j, knot, sign),)):
                added += 1
        if added == 0:
            break
    return {"terms": terms, "basis": B[:, :M].copy(), "knots": knots}


def gcv(rss: float, n_terms: int, n: int, penalty: float) -> float:
    cost = n_terms + penalty * (n_terms - 1) / 2.0
    denom = 1.0 - cost / n
    if denom <= 0.0:
        return np.inf
    return (rss / n) / (denom * denom)


def backward_sequence(basis: np.ndarray, y: np.ndarray) -> list[tuple[list[int], float]]:
    """Deletion sequence: (active column indices, RSS) from full down to {0}.

    Each step removes the non-intercept term whose deletion least increases
    the RSS, using the exact deletion identity RSS+ = RSS + coef^2 / ginv_qq.
    """
    n, M = basis.shape
    active = list(range(M))
    out = []
    while True:
        A = basis[:, active]
        ginv = np.linalg.pinv(A.T @ A)
        coef = ginv @ (A.T @ y)
        resid = y - A @ coef
        rss = float(resid @ resid)
        out.append((active.copy(), rss))
        if len(active) == 1:
            break
        costs = []
        for pos in range(1, len(active)):  # position 0 is the intercept
            g = ginv[pos, pos]
            costs.append(coef[pos] ** 2 / g if g > 1e-300 else 0.0)
        drop = 1 + int(np.argmin(costs))
        active.pop(drop)
    return out


def fit_mars_family(
    X: np.ndarray, y: np.ndarray, degree: int, nprunes
) -> list[dict]:
    """Fit one forward pass and prune it at each requested nprune."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float)
    n = len(y)
    fwd = forward_pass(X, y, degree)
    seq = backward_sequence(fwd["basis"], y)
    penalty = 2.0 if degree == 1 else 3.0
    states = []
    for nprune in nprunes:
        if nprune < 2:
            raise ValueError("nprune must be at least 2")
        best_gcv = np.inf
        best_active: list[int] = [0]
        for active, rss in reversed(seq):  # small subsets first: ties stay lean
            if len(active) > nprune:
                continue
            score = gcv(rss, len(active), n, penalty)
            if score < best_gcv:
                best_gcv = score
                best_active = active
        A = fwd["basis"][:, best_active]
        coef, _, _, _ = np.linalg.lstsq(A, y, rcond=None)
        states.append(
            {
                "terms": [fwd["terms"][i] for i in best_active],
                "coef": coef,
                "degree": int(degree),
                "nprune": int(nprune),
                "gcv": float(best_gcv),
            }
        )
    return states


def fit_mars(X: np.ndarray, y: np.ndarray, degree: int, nprune: int) -> dict:
    return fit_mars_family(X, y, degree, [nprune])[0]


def predict_mars(state: dict, X: np.ndarray) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    out = np.zeros(len(X))
    for coef, term in zip(state["coef"], state["terms"]):
        out += coef * evaluate_term(term, X)
    return out
