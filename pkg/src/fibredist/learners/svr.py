"""Epsilon-insensitive support vector regression with an RBF kernel.

The dual is solved by sequential minimal optimization over the net dual
weights beta_i = alpha_i - alpha_i* in [-C, C] with sum(beta) = 0: each step
picks the maximal-violating pair from the KKT intervals for the bias and
minimizes the (convex, piecewise quadratic) objective along that pair
exactly. The kernel is k(x, z) = exp(-sigma * ||x - z||^2).
"""

from __future__ import annotations

import numpy as np
from numba import njit

from ..seeding import rng_for

KKT_TOL = 1e-3
MAX_UPDATES = 100_000
DEFAULT_EPSILON = 0.1


class SVRConvergenceError(RuntimeError):
    pass


def estimate_sigma(X: np.ndarray, seed: int) -> float:
    """Median of 1 / ||x_i - x_j||^2 over up to 1000 random row pairs.

    All distinct pairs are used when there are at most 1000 of them; pairs
    at zero distance are ignored.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    n = len(X)
    if n < 2:
        raise ValueError("sigma estimation needs at least 2 rows")
    total_pairs = n * (n - 1) // 2
    if total_pairs <= 1000:
        ii, jj = np.triu_indices(n, k=1)
    else:
        rng = rng_for(seed, "svr", "sigma")
        ii = np.empty(1000, dtype=np.int64)
        jj = np.empty(1000, dtype=np.int64)
        for t in range(1000):
            a = int(rng.integers(0, n))
            b = int(rng.integers(0, n - 1))
            if b >= a:
                b += 1
            ii[t], jj[t] = a, b
    d2 = ((X[ii] - X[jj]) ** 2).sum(axis=1)
    d2 = d2[d2 > 0]
    if len(d2) == 0:
        raise ValueError("all rows are identical; cannot estimate sigma")
    return float(np.median(1.0 / d2))


def rbf_kernel(A: np.ndarray, B: np.ndarray, sigma: float) -> np.ndarray:
    """exp(-sigma * ||a - b||^2), computed row-wise so identical query rows
    produce bit-identical kernel rows."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    out = np.empty((len(A), len(B)))
    chunk = max(1, int(2_000_000 // max(len(B) * A.shape[1], 1)))
    for start in range(0, len(A), chunk):
        block = A[start:start + chunk]
        d2 = ((block[:, None, :] - B[None, :, :]) ** 2).sum(axis=2)
        out[start:start + chunk] = np.exp(-sigma * d2)
    return out


@njit(cache=True, nogil=True)
def _smo(K, y, C, eps, tol, max_updates):  # pragma: no cover - jitted
    n = len(y)
    beta = np.zeros(n)
    F = -y.copy()  # F_i = (K beta)_i - y_i
    bound_margin = 1e-8 * C
    big = 1e300
    updates = 0
    converged = False
    while updates < max_updates:
        max_lo = -big
        min_hi = big
        i_lo = -1
        i_hi = -1
        for i in range(n):
            g = -F[i]
            b = beta[i]
            if b > bound_margin:
                if b >= C - bound_margin:
                    lo = -big
                    hi = g - eps
                else:
                    lo = g - eps
                    hi = g - eps
            elif b < -bound_margin:
                if b <= -C + bound_margin:
                    lo = g + eps
                    hi = big
                else:
                    lo = g + eps
                    hi = g + eps
            else:
                lo = g - eps
                hi = g + eps
            if lo > max_lo:
                max_lo = lo
                i_lo = i
            if hi < min_hi:
                min_hi = hi
                i_hi = i
        if max_lo - min_hi <= tol or i_lo == i_hi:
            converged = True
            break
        i = i_lo
        j = i_hi
        bi = beta[i]
        bj = beta[j]
        eta = K[i, i] + K[j, j] - 2.0 * K[i, j]
        L = max(-C - bi, bj - C)
        H = min(C - bi, bj + C)
        slope = F[i] - F[j]
        # Candidate minimizers of the convex piecewise quadratic
        #   0.5*eta*t^2 + slope*t + eps*(|bi + t| + |bj - t|)
        # over t in [L, H]: endpoints, kink points, and the stationary
        # point of each sign region.
        cand = np.empty(8)
        cand[0] = L
        cand[1] = H
        cand[2] = min(max(-bi, L), H)
        cand[3] = min(max(bj, L), H)
        m = 4
        if eta > 0.0:
            for si in (-1.0, 1.0):
                for sj in (-1.0, 1.0):
                    t = -(slope + eps * (si - sj)) / eta
                    cand[m] = min(max(t, L), H)
                    m += 1
        best_t = 0.0
        best_val = 0.0
        for c_idx in range(m):
            t = cand[c_idx]
            val = (
                0.5 * eta * t * t
                + slope * t
                + eps * (abs(bi + t) - abs(bi) + abs(bj - t) - abs(bj))
            )
            if val < best_val - 0.0:
                best_val = val
                best_t = t
        if best_val >= -1e-14 * (1.0 + abs(slope)):
            # No numerically meaningful progress on the worst pair.
            converged = max_lo - min_hi <= tol
            break
        new_i = min(max(bi + best_t, -C), C)
        new_j = min(max(bj - best_t, -C), C)
        beta[i] = new_i
        beta[j] = new_j
        for r in range(n):
            F[r] += (new_i - bi) * K[r, i] + (new_j - bj) * K[r, j]
        updates += 1
    return beta, F, converged, updates


def fit_svr(
    X: np.ndarray,
    y: np.ndarray,
    sigma: float,
    C: float,
    epsilon: float = DEFAULT_EPSILON,
    tol: float = KKT_TOL,
    max_updates: int = MAX_UPDATES,
    kernel: np.ndarray | None = None,
) -> dict:
    """Fit epsilon-insensitive RBF SVR.

    The dual is solved on targets divided by their standard deviation, with
    epsilon divided by the same factor, following the usual toolchain
    behaviour for cost grids like {0.25..4}. This leaves the epsilon tube in
    raw units untouched while letting the cost bound scale with the spread
    of the data; predictions are mapped back to raw units.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float)
    n = len(y)
    if n == 0:
        raise ValueError("cannot fit on an empty sample")
    scale = float(y.std(ddof=1)) if n > 1 else 0.0
    if scale <= 0.0:
        scale = 1.0
    K = kernel if kernel is not None else rbf_kernel(X, X, sigma)
    beta, F, converged, updates = _smo(
        K, y / scale, float(C), float(epsilon) / scale, float(tol), int(max_updates)
    )
    if not converged:
        raise SVRConvergenceError(
            f"SMO reached the update cap ({max_updates}) without satisfying "
            f"the KKT conditions at tolerance {tol}"
        )
    b = _bias(beta, F, y / scale, float(C), float(epsilon) / scale)
    support = np.abs(beta) > 1e-10 * C
    return {
        "sv_X": X[support].copy(),
        "beta": beta[support].copy(),
        "bias": float(b),
        "y_scale": scale,
        "sigma": float(sigma),
        "C": float(C),
        "epsilon": float(epsilon),
        "updates": int(updates),
        "n_support": int(support.sum()),
    }


def _bias(beta, F, y, C, eps):
    """Bias from the KKT interval; centred on the plain mean when slack allows."""
    margin = 1e-8 * C
    lo = -np.inf
    hi = np.inf
    for i in range(len(beta)):
        g = -F[i]
        b = beta[i]
        if b > margin:
            if b >= C - margin:
                hi = min(hi, g - eps)
            else:
                lo = max(lo, g - eps)
                hi = min(hi, g - eps)
        elif b < -margin:
            if b <= -C + margin:
                lo = max(lo, g + eps)
            else:
                lo = max(lo, g + eps)
                hi = min(hi, g + eps)
        else:
            lo = max(lo, g - eps)
            hi = min(hi, g + eps)
    center = float(-np.mean(F))  # mean of y - K beta
    if lo > hi:
        return 0.5 * (lo + hi)
    return float(min(max(center, lo), hi))


def svr_objective(K: np.ndarray, y: np.ndarray, beta: np.ndarray, epsilon: float) -> float:
    """Dual objective 0.5 b'Kb - y'b + eps*||b||_1 (lower is better)."""
    return float(0.5 * beta @ K @ beta - y @ beta + epsilon * np.abs(beta).sum())


def predict_svr(state: dict, X: np.ndarray) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    scale = state.get("y_scale", 1.0)
    if len(state["beta"]) == 0:
        return np.full(len(X), scale * state["bias"])
    K = rbf_kernel(X, state["sv_X"], state["sigma"])
    # einsum keeps identical query rows bit-identical (BLAS gemv may not)
    return scale * (np.einsum("ij,j->i", K, state["beta"]) + state["bias"])
