"""Global and local model explanations.

Variable importance uses each learner's own mechanism where one exists
(absolute t statistics for the linear model, absolute coefficients for the
elastic net, accumulated split gains for trees and forests) and seeded
permutation importance for the kernel, neighbour and spline learners. SHAP
attributions come from Monte Carlo permutation sampling against a background
sample, walking each random feature permutation from a background row to the
explained instance so that per-permutation contributions telescope exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import PolymerTable, ProcessInputs, RangeSummary
from .learners import ModelKind, TrainedModel, predict
from .learners.tree import tree_feature_gains
from .seeding import derive_seed, rng_for
from .validation import metrics

SHAP_BACKGROUND_CAP = 200
SHAP_DEFAULT_SIMS = 50
PERMUTATION_REPEATS = 10
DISPLAY_TOP_FEATURES = 20
SHAP_TOP_FEATURES = 6


@dataclass(frozen=True)
class ImportanceTable:
    """(feature, raw score, scaled score) rows, descending by score."""

    features: tuple[str, ...]
    raw_scores: tuple[float, ...]
    scaled_scores: tuple[float, ...]

    def top(self, k: int = DISPLAY_TOP_FEATURES) -> "ImportanceTable":
        return ImportanceTable(
            features=self.features[:k],
            raw_scores=self.raw_scores[:k],
            scaled_scores=self.scaled_scores[:k],
        )

    def rows(self) -> list[tuple[int, str, float, float]]:
        return [
            (rank + 1, f, raw, scaled)
            for rank, (f, raw, scaled) in enumerate(
                zip(self.features, self.raw_scores, self.scaled_scores)
            )
        ]


def _scale_scores(raw: np.ndarray) -> np.ndarray:
    lo, hi = float(raw.min()), float(raw.max())
    if hi > lo:
        # divide first so the top score is exactly 100
        return ((raw - lo) / (hi - lo)) * 100.0
    if hi > 0:
        return np.full_like(raw, 100.0)
    return np.zeros_like(raw)


def _permutation_importance(model, X, y, feature_names, seed) -> np.ndarray:
    base_rmse = metrics(y, predict(model, X, feature_names))["rmse"]
    scores = np.zeros(len(feature_names))
    for j in range(len(feature_names)):
        bumps = []
        for rep in range(PERMUTATION_REPEATS):
            rng = rng_for(seed, "perm_importance", j, rep)
            Xp = X.copy()
            Xp[:, j] = Xp[rng.permutation(len(Xp)), j]
            bumps.append(metrics(y, predict(model, Xp, feature_names))["rmse"] - base_rmse)
        scores[j] = float(np.mean(bumps))
    return np.maximum(scores, 0.0)


def variable_importance(
    model: TrainedModel, table: PolymerTable, seed: int = 0
) -> ImportanceTable:
    """A single overall score per feature, min-max scaled to [0, 100]."""
    kept = model.recipe.kept_features
    kind = model.kind
    if kind is ModelKind.LINEAR:
        raw = np.abs(np.asarray(model.state["t_stats"], dtype=float))
        raw = np.where(np.isfinite(raw), raw, np.nanmax(np.where(np.isfinite(raw), raw, 0)) + 1.0)
    elif kind is ModelKind.ELASTIC_NET:
        raw = np.abs(np.asarray(model.state["coef"], dtype=float))
    elif kind is ModelKind.TREE:
        raw = tree_feature_gains(model.state, len(kept))
    elif kind is ModelKind.FOREST:
        raw = np.asarray(model.state["feature_gains"], dtype=float)
    else:
        idx = [table.feature_names.index(name) for name in kept]
        raw = _permutation_importance(
            model, table.X[:, idx], table.y, kept, derive_seed(seed, "importance")
        )
    order = np.argsort(-raw, kind="stable")
    raw_sorted = raw[order]
    scaled = _scale_scores(raw_sorted)
    return ImportanceTable(
        features=tuple(kept[i] for i in order),
        raw_scores=tuple(float(v) for v in raw_sorted),
        scaled_scores=tuple(float(v) for v in scaled),
    )


@dataclass(frozen=True)
class ShapSummary:
    """Per-instance, per-feature attributions (nm) with their baseline."""

    features: tuple[str, ...]
    phi: np.ndarray  # instances x features
    baseline: float
    background_rows: int
    sims: int
    feature_order: tuple[str, ...]  # by mean |phi| descending

    def mean_abs(self) -> dict[str, float]:
        means = np.abs(self.phi).mean(axis=0)
        return {f: float(v) for f, v in zip(self.features, means)}

    def top_features(self, k: int = SHAP_TOP_FEATURES) -> tuple[str, ...]:
        return self.feature_order[:k]

    def rows(self) -> list[tuple[int, str, float]]:
        out = []
        for i in range(self.phi.shape[0]):
            for j, f in enumerate(self.features):
                out.append((i, f, float(self.phi[i, j])))
        return out


def shap_values(
    model: TrainedModel,
    instances: np.ndarray,
    background: np.ndarray,
    sims: int = SHAP_DEFAULT_SIMS,
    seed: int = 0,
    feature_names=None,
) -> ShapSummary:
    """Monte Carlo Shapley attributions via random feature permutations.

    For each instance and simulation, one background row and one permutation
    are drawn; features flip from the background value to the instance value
    in permutation order and successive prediction differences credit each
    feature, so the per-simulation contributions sum exactly to
    f(instance) - f(background row).
    """
    names = tuple(feature_names) if feature_names is not None else model.feature_names
    instances = np.atleast_2d(np.asarray(instances, dtype=float))
    background = np.atleast_2d(np.asarray(background, dtype=float))
    if len(background) == 0:
        raise ValueError("background sample is empty")
    if sims < 1:
        raise ValueError("sims must be at least 1")
    if len(background) > SHAP_BACKGROUND_CAP:
        pick = rng_for(seed, "shap", "background").choice(
            len(background), size=SHAP_BACKGROUND_CAP, replace=False
        )
        background = background[np.sort(pick)]
    n_inst, p = instances.shape
    baseline = float(np.mean(predict(model, background, names)))
    phi = np.zeros((n_inst, p))
    for i in range(n_inst):
        rng = rng_for(seed, "shap", "instance", i)
        bg_rows = background[rng.integers(0, len(background), size=sims)]
        perms = np.array([rng.permutation(p) for _ in range(sims)])
        # walk rows: sims x (p + 1) prediction points, batched in one call
        walks = np.repeat(bg_rows[:, None, :], p + 1, axis=1)
        for s in range(sims):
            row = bg_rows[s].copy()
            for step, j in enumerate(perms[s]):
                row[j] = instances[i, j]
                walks[s, step + 1] = row
        preds = predict(model, walks.reshape(sims * (p + 1), p), names)
        preds = preds.reshape(sims, p + 1)
        diffs = np.diff(preds, axis=1)
        for s in range(sims):
            phi[i, perms[s]] += diffs[s]
    phi /= sims
    order = np.argsort(-np.abs(phi).mean(axis=0), kind="stable")
    return ShapSummary(
        features=names,
        phi=phi,
        baseline=baseline,
        background_rows=len(background),
        sims=int(sims),
        feature_order=tuple(names[i] for i in order),
    )


@dataclass(frozen=True)
class CorrelationMatrix:
    """Pearson correlations over predictors plus the target."""

    names: tuple[str, ...]
    matrix: np.ndarray
    excluded_zero_variance: tuple[str, ...]

    def to_rows(self) -> list[list]:
        rows = []
        for i, name in enumerate(self.names):
            rows.append([name] + [float(v) for v in self.matrix[i]])
        return rows


def correlation_matrix(table: PolymerTable, target_name: str = "fibre_diameter") -> CorrelationMatrix:
    """Pairwise Pearson r over the table's features and its target."""
    if table.n < 2:
        raise ValueError("correlations need at least 2 rows")
    columns = [table.X[:, j] for j in range(table.p)] + [table.y]
    names = list(table.feature_names) + [target_name]
    keep = [i for i, col in enumerate(columns) if np.std(col) > 0]
    excluded = tuple(names[i] for i in range(len(names)) if i not in keep)
    data = np.column_stack([columns[i] for i in keep])
    corr = np.corrcoef(data, rowvar=False)
    corr = 0.5 * (corr + corr.T)  # enforce bit-exact symmetry
    np.fill_diagonal(corr, 1.0)
    return CorrelationMatrix(
        names=tuple(names[i] for i in keep),
        matrix=corr,
        excluded_zero_variance=excluded,
    )


@dataclass(frozen=True)
class ResponseSurface:
    """Predictions over a grid of two features, the rest held fixed."""

    feature_a: str
    feature_b: str
    axis_a: np.ndarray
    axis_b: np.ndarray
    fixed: dict[str, float]
    grid: np.ndarray  # len(axis_a) x len(axis_b), nm

    def to_dict(self) -> dict:
        return {
            "feature_a": self.feature_a,
            "feature_b": self.feature_b,
            "axis_a": self.axis_a.tolist(),
            "axis_b": self.axis_b.tolist(),
            "fixed": dict(self.fixed),
            "grid": self.grid.tolist(),
        }


def response_surface(
    model: TrainedModel,
    feature_a: str,
    feature_b: str,
    ranges: RangeSummary,
    fixed: ProcessInputs,
    grid_size: tuple[int, int] = (25, 25),
) -> ResponseSurface:
    """Prediction surface over the observed [min, max] of two features."""
    names = model.feature_names
    for f in (feature_a, feature_b):
        if f not in names:
            raise ValueError(f"feature {f!r} is not a model feature")
    if min(grid_size) < 2:
        raise ValueError("grid sizes must be at least 2")
    lo_a, hi_a = ranges.bounds(feature_a)
    lo_b, hi_b = ranges.bounds(feature_b)
    axis_a = np.linspace(lo_a, hi_a, grid_size[0])
    axis_b = np.linspace(lo_b, hi_b, grid_size[1])
    base = np.zeros(len(names))
    fixed_dict = fixed.as_dict()
    for j, name in enumerate(names):
        if name in fixed_dict:
            base[j] = fixed_dict[name]
        elif name.startswith("collector_type="):
            label = name.split("=", 1)[1]
            base[j] = 1.0 if label == fixed.collector_type else 0.0
    ia, ib = names.index(feature_a), names.index(feature_b)
    aa, bb = np.meshgrid(axis_a, axis_b, indexing="ij")
    rows = np.tile(base, (aa.size, 1))
    rows[:, ia] = aa.ravel()
    rows[:, ib] = bb.ravel()
    preds = predict(model, rows, names).reshape(aa.shape)
    return ResponseSurface(
        feature_a=feature_a,
        feature_b=feature_b,
        axis_a=axis_a,
        axis_b=axis_b,
        fixed={k: v for k, v in fixed_dict.items() if k not in (feature_a, feature_b)},
        grid=preds,
    )
