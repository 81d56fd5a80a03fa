"""Ordinary least squares with coefficient standard errors and t statistics."""

from __future__ import annotations

import warnings

import numpy as np


def fit_linear(X: np.ndarray, y: np.ndarray) -> dict:
    """Least-squares fit returning coefficients, intercept, SEs and t stats.

    A rank-deficient design falls back to the minimum-norm solution with a
    warning; standard errors then come from the pseudo-inverse.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, p = X.shape
    A = np.column_stack([np.ones(n), X])
    coef_all, _, rank, _ = np.linalg.lstsq(A, y, rcond=None)
    rank_deficient = rank < p + 1
    if rank_deficient:
        warnings.warn(
            "rank-deficient design; using the minimum-norm least-squares solution",
            RuntimeWarning,
        )
    residuals = y - A @ coef_all
    dof = max(n - rank, 1)
    sigma2 = float(residuals @ residuals) / dof
    gram_inv = np.linalg.pinv(A.T @ A)
    se_all = np.sqrt(np.clip(sigma2 * np.diag(gram_inv), 0.0, None))
    with np.errstate(divide="ignore", invalid="ignore"):
        t_all = np.where(se_all > 0, coef_all / np.where(se_all > 0, se_all, 1.0), 0.0)
        t_all = np.where((se_all == 0) & (coef_all != 0), np.inf, t_all)
    return {
        "intercept": float(coef_all[0]),
        "coef": coef_all[1:],
        "std_errors": se_all[1:],
        "t_stats": t_all[1:],
        "intercept_se": float(se_all[0]),
        "intercept_t": float(t_all[0]),
        "rank_deficient": bool(rank_deficient),
        "sigma2": sigma2,
    }


def predict_linear(state: dict, X: np.ndarray) -> np.ndarray:
    return np.asarray(X, dtype=float) @ state["coef"] + state["intercept"]
