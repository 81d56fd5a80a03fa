"""Nested cross-validation: leave-one-study-out outer folds around a
repeated k-fold inner tuning loop, plus the evaluation metrics.

Outer folds hold out all rows of one study so reported performance reflects
generalization to unseen studies. Recipes and models only ever see the
training side of whichever split they serve. Outer folds are independent and
may run on a thread pool; each derives its own seed from (run seed, fold
index), so parallel and serial execution produce identical results.
"""

from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .dataset import PolymerTable
from .learners import ModelKind, TrainedModel, default_grid, fit_model, fit_model_family, predict
from .seeding import derive_seed, rng_for

INNER_FOLDS = 5
INNER_REPEATS = 2
MIN_ROWS_FOR_INNER_KFOLD = 10


def metrics(y: np.ndarray, yhat: np.ndarray) -> dict:
    """R^2, RMSE and MAE; R^2 is None when the targets are all identical."""
    y = np.asarray(y, dtype=float)
    yhat = np.asarray(yhat, dtype=float)
    if y.shape != yhat.shape:
        raise ValueError(f"length mismatch: {y.shape} vs {yhat.shape}")
    if y.size == 0:
        raise ValueError("metrics need at least one observation")
    err = y - yhat
    rmse = float(np.sqrt(np.mean(err ** 2)))
    mae = float(np.mean(np.abs(err)))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = None if ss_tot == 0.0 else float(1.0 - np.sum(err ** 2) / ss_tot)
    return {"r2": r2, "rmse": rmse, "mae": mae}


@dataclass(frozen=True)
class FoldPlan:
    """Outer (train, test) index pairs plus per-fold inner partitions.

    Inner splits are expressed in local positions into the outer-train index
    array. Every inner repeat partitions the outer-train rows exactly.
    """

    outer: tuple[tuple[np.ndarray, np.ndarray], ...]
    inner: tuple[tuple[tuple[np.ndarray, np.ndarray], ...], ...]
    fold_labels: tuple[str, ...]
    seed: int


def _inner_partitions(n_train: int, seed: int):
    """2 repeats x 5 folds; degrades to leave-one-out below 10 rows."""
    if n_train < 2:
        raise ValueError("inner folds need at least 2 training rows")
    if n_train < MIN_ROWS_FOR_INNER_KFOLD:
        warnings.warn(
            f"outer-train has only {n_train} rows; inner folds degrade to leave-one-out",
            RuntimeWarning,
        )
        k, repeats = n_train, 1
    else:
        k, repeats = INNER_FOLDS, INNER_REPEATS
    splits = []
    for rep in range(repeats):
        perm = rng_for(seed, "inner", rep).permutation(n_train)
        for part in np.array_split(perm, k):
            va = np.sort(part)
            tr = np.setdiff1d(np.arange(n_train), va, assume_unique=True)
            splits.append((tr, va))
    return tuple(splits)


def make_folds(study_ids: Sequence[str], seed: int) -> FoldPlan:
    """One outer fold per distinct study; inner 5-fold x 2 repeats."""
    ids = np.asarray(list(study_ids))
    studies = sorted(set(ids.tolist()))
    if len(studies) < 2:
        raise ValueError("grouped cross-validation needs at least 2 distinct studies")
    outer = []
    inner = []
    for k, study in enumerate(studies):
        test = np.nonzero(ids == study)[0]
        train = np.nonzero(ids != study)[0]
        outer.append((train, test))
        inner.append(_inner_partitions(len(train), derive_seed(seed, "outer", k)))
    return FoldPlan(
        outer=tuple(outer), inner=tuple(inner),
        fold_labels=tuple(studies), seed=int(seed),
    )


def make_row_folds(n: int, k: int, seed: int) -> FoldPlan:
    """Row-shuffled k-fold plan, ignoring studies (for leakage comparisons)."""
    if n < k or k < 2:
        raise ValueError("need n >= k >= 2 for row-shuffled folds")
    perm = rng_for(seed, "row_folds").permutation(n)
    outer = []
    inner = []
    for i, part in enumerate(np.array_split(perm, k)):
        test = np.sort(part)
        train = np.setdiff1d(np.arange(n), test, assume_unique=True)
        outer.append((train, test))
        inner.append(_inner_partitions(len(train), derive_seed(seed, "outer", i)))
    return FoldPlan(
        outer=tuple(outer), inner=tuple(inner),
        fold_labels=tuple(f"fold{i}" for i in range(k)), seed=int(seed),
    )


def _fit_grid(kind, grid, X, y, feature_names, seed):
    """Family fit with a per-point fallback; None marks a failed point."""
    try:
        return fit_model_family(kind, grid, X, y, feature_names, seed=seed)
    except Exception:
        models = []
        for hp in grid:
            try:
                models.append(fit_model(kind, hp, X, y, feature_names, seed=seed))
            except Exception:
                models.append(None)
        return models


def tune(
    kind: ModelKind,
    X: np.ndarray,
    y: np.ndarray,
    feature_names: Sequence[str],
    inner_splits,
    grid: Sequence[dict],
    seed: int,
) -> dict:
    """Pick the grid point minimizing mean inner-validation RMSE.

    Ties go to the earliest grid point. A grid point that fails to fit on any
    inner split is disqualified; if every point fails, the error propagates.
    """
    if not grid:
        raise ValueError("empty hyperparameter grid")
    if len(grid) == 1:
        return dict(grid[0])
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    total = np.zeros(len(grid))
    alive = np.ones(len(grid), dtype=bool)
    for si, (tr, va) in enumerate(inner_splits):
        models = _fit_grid(kind, grid, X[tr], y[tr], feature_names,
                           seed=derive_seed(seed, "tune", si))
        for gi, model in enumerate(models):
            if model is None:
                alive[gi] = False
            if not alive[gi]:
                continue
            try:
                pred = predict(model, X[va], feature_names)
                total[gi] += metrics(y[va], pred)["rmse"]
            except Exception:
                alive[gi] = False
    if not alive.any():
        raise RuntimeError(f"every {ModelKind(kind).value} grid point failed to fit")
    score = np.where(alive, total, np.inf)
    return dict(grid[int(np.argmin(score))])


@dataclass
class FoldResult:
    fold: int
    label: str
    hyperparams: dict
    test_indices: np.ndarray
    predictions: np.ndarray
    metrics: dict


@dataclass
class CVResult:
    kind: ModelKind
    seed: int
    folds: list[FoldResult]
    oof_predictions: np.ndarray  # aligned to table rows, covers each exactly once
    oof_metrics: dict = field(default_factory=dict)  # pooled over all rows

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "seed": self.seed,
            "oof_metrics": dict(self.oof_metrics),
            "folds": [
                {
                    "fold": f.fold,
                    "label": f.label,
                    "hyperparams": f.hyperparams,
                    "test_indices": f.test_indices.tolist(),
                    "predictions": f.predictions.tolist(),
                    "metrics": f.metrics,
                }
                for f in self.folds
            ],
            "oof_predictions": self.oof_predictions.tolist(),
        }


@dataclass
class MetricsSummary:
    """Mean and SD of each metric across outer folds (n-1 denominator)."""

    mean: dict = field(default_factory=dict)
    sd: dict = field(default_factory=dict)
    n_folds: int = 0
    r2_missing_folds: int = 0

    @classmethod
    def from_folds(cls, fold_metrics: Sequence[dict]) -> "MetricsSummary":
        out = cls(n_folds=len(fold_metrics))
        for name in ("r2", "rmse", "mae"):
            values = [m[name] for m in fold_metrics if m[name] is not None]
            if name == "r2":
                out.r2_missing_folds = len(fold_metrics) - len(values)
            if not values:
                out.mean[name] = None
                out.sd[name] = None
                continue
            arr = np.array(values, dtype=float)
            out.mean[name] = float(arr.mean())
            out.sd[name] = float(arr.std(ddof=1)) if len(arr) > 1 else 0.0
        return out

    def to_dict(self) -> dict:
        return {
            "mean": dict(self.mean),
            "sd": dict(self.sd),
            "n_folds": self.n_folds,
            "r2_missing_folds": self.r2_missing_folds,
        }

    def format_cell(self, name: str, digits: int = 3) -> str:
        if self.mean.get(name) is None:
            return "n/a"
        return f"{self.mean[name]:.{digits}f} ± {self.sd[name]:.{digits}f}"


def nested_cv(
    table: PolymerTable,
    kind: ModelKind,
    seed: int,
    plan: FoldPlan | None = None,
    n_jobs: int = 1,
) -> tuple[CVResult, MetricsSummary]:
    """Tune inside each outer-train, refit, and score the held-out study."""
    kind = ModelKind(kind)
    if plan is None:
        plan = make_folds(table.study_ids, seed)
    grid = default_grid(kind, table.p)
    X, y, names = table.X, table.y, table.feature_names

    def run_fold(k: int) -> FoldResult:
        train, test = plan.outer[k]
        fold_seed = derive_seed(seed, "outer_fold", k)
        try:
            hp = tune(kind, X[train], y[train], names, plan.inner[k], grid, fold_seed)
            model = fit_model(kind, hp, X[train], y[train], names,
                              seed=derive_seed(fold_seed, "refit"))
            preds = predict(model, X[test], names)
        except Exception as exc:
            raise RuntimeError(
                f"{kind.value} failed on outer fold {k} ({plan.fold_labels[k]}): {exc}"
            ) from exc
        return FoldResult(
            fold=k,
            label=plan.fold_labels[k],
            hyperparams=hp,
            test_indices=test,
            predictions=preds,
            metrics=metrics(y[test], preds),
        )

    n_folds = len(plan.outer)
    if n_jobs == 1 or n_folds == 1:
        folds = [run_fold(k) for k in range(n_folds)]
    else:
        with ThreadPoolExecutor(max_workers=min(n_jobs, n_folds)) as pool:
            folds = list(pool.map(run_fold, range(n_folds)))

    oof = np.full(table.n, np.nan)
    for f in folds:
        oof[f.test_indices] = f.predictions
    if np.isnan(oof).any():
        raise RuntimeError("out-of-fold predictions do not cover every row")
    summary = MetricsSummary.from_folds([f.metrics for f in folds])
    result = CVResult(
        kind=kind, seed=int(seed), folds=folds, oof_predictions=oof,
        oof_metrics=metrics(y, oof),
    )
    return result, summary


def final_fit(
    table: PolymerTable,
    kind: ModelKind,
    seed: int,
) -> tuple[TrainedModel, dict]:
    """Tune on the full table via 5x2 inner folds, then refit on all rows."""
    kind = ModelKind(kind)
    grid = default_grid(kind, table.p)
    inner = _inner_partitions(table.n, derive_seed(seed, "final"))
    hp = tune(kind, table.X, table.y, table.feature_names, inner, grid,
              derive_seed(seed, "final"))
    model = fit_model(kind, hp, table.X, table.y, table.feature_names,
                      seed=derive_seed(seed, "final", "refit"))
    return model, hp
