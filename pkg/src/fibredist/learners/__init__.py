"""Seven regression learners behind one fit/predict contract.

Fitting always happens in recipe space: :func:`fit_model` estimates a
normalization recipe from exactly the rows it is given, transforms them, and
delegates to the kind-specific fitter. Prediction re-applies the stored
recipe, so a trained model can never see statistics from rows outside its
training split.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from ..dataset import NormalizationRecipe, apply_recipe, fit_recipe
from ..seeding import derive_seed
from . import elastic_net as _en
from . import forest as _forest
from . import svr as _svr
from .elastic_net import fit_elastic_net, fit_elastic_net_path, lambda_max
from .forest import fit_forest, fit_forest_binned, predict_forest, prepare_bins
from .knn import fit_knn, predict_knn
from .linear import fit_linear, predict_linear
from .mars import fit_mars, fit_mars_family, hinge, predict_mars
from .svr import estimate_sigma, fit_svr, predict_svr, rbf_kernel, svr_objective
from .tree import best_split, fit_tree, predict_tree, truncate_tree

__all__ = [
    "ModelKind", "TrainedModel", "default_grid", "fit_model",
    "fit_model_family", "predict", "model_to_dict", "model_from_dict",
    "model_to_json", "model_from_json",
    "fit_linear", "predict_linear", "fit_elastic_net", "fit_elastic_net_path",
    "lambda_max", "fit_tree", "predict_tree", "truncate_tree", "best_split",
    "fit_forest", "predict_forest", "fit_knn", "predict_knn", "estimate_sigma",
    "fit_svr", "predict_svr", "rbf_kernel", "svr_objective", "fit_mars",
    "fit_mars_family", "predict_mars", "hinge",
]


class ModelKind(str, Enum):
    LINEAR = "linear"
    ELASTIC_NET = "elastic_net"
    TREE = "tree"
    FOREST = "forest"
    SVR_RBF = "svr_rbf"
    KNN = "knn"
    MARS = "mars"


LAMBDA_GRID_POINTS = 25
LAMBDA_MIN_FRACTION = 1e-3


def default_grid(kind: ModelKind, p: int) -> list[dict]:
    """The tuning grid for one learner kind over p candidate features."""
    if p < 1:
        raise ValueError("p must be at least 1")
    kind = ModelKind(kind)
    if kind is ModelKind.LINEAR:
        return [{}]
    if kind is ModelKind.ELASTIC_NET:
        fracs = np.logspace(0.0, np.log10(LAMBDA_MIN_FRACTION), LAMBDA_GRID_POINTS)
        return [
            {"alpha": a, "lambda_frac": float(f)}
            for a in (0.0, 0.25, 0.5, 0.75, 1.0)
            for f in fracs
        ]
    if kind is ModelKind.TREE:
        return [{"cp": float(c)} for c in np.logspace(-4, -1, 10)]
    if kind is ModelKind.FOREST:
        return [
            {"mtry": m, "min_node_size": s, "n_trees": _forest.DEFAULT_N_TREES}
            for m in range(1, p + 1)
            for s in (1, 5, 10)
        ]
    if kind is ModelKind.SVR_RBF:
        return [
            {"sigma": "auto", "C": c, "epsilon": _svr.DEFAULT_EPSILON}
            for c in (0.25, 0.5, 1.0, 2.0, 4.0)
        ]
    if kind is ModelKind.KNN:
        return [{"k": k} for k in (3, 5, 7, 9, 11)]
    if kind is ModelKind.MARS:
        return [
            {"degree": d, "nprune": m}
            for d in (1, 2)
            for m in (5, 10, 15, 20, 25)
        ]
    raise ValueError(f"unknown model kind: {kind}")


@dataclass
class TrainedModel:
    """A fitted learner plus the recipe and target range seen at fit time."""

    kind: ModelKind
    hyperparams: dict
    recipe: NormalizationRecipe
    feature_names: tuple[str, ...]
    y_min: float
    y_max: float
    state: dict

    def predict(self, X_raw: np.ndarray, feature_names: Sequence[str] | None = None) -> np.ndarray:
        return predict(self, X_raw, feature_names)


def _fit_state(kind: ModelKind, hp: dict, Z: np.ndarray, y: np.ndarray, seed: int) -> dict:
    if kind is ModelKind.LINEAR:
        return fit_linear(Z, y)
    if kind is ModelKind.ELASTIC_NET:
        alpha = float(hp["alpha"])
        if "lambda" in hp:
            lam = float(hp["lambda"])
        else:
            lam = float(hp["lambda_frac"]) * lambda_max(Z, y, alpha)
        return fit_elastic_net(Z, y, alpha, lam)
    if kind is ModelKind.TREE:
        return fit_tree(Z, y, float(hp["cp"]))
    if kind is ModelKind.FOREST:
        return fit_forest(
            Z, y, int(hp["mtry"]), int(hp["min_node_size"]),
            int(hp.get("n_trees", _forest.DEFAULT_N_TREES)),
            seed=derive_seed(seed, "forest_fit"),
        )
    if kind is ModelKind.SVR_RBF:
        sigma = hp.get("sigma", "auto")
        if sigma in (None, "auto"):
            sigma = estimate_sigma(Z, derive_seed(seed, "sigma"))
        return fit_svr(Z, y, float(sigma), float(hp["C"]), float(hp.get("epsilon", _svr.DEFAULT_EPSILON)))
    if kind is ModelKind.KNN:
        return fit_knn(Z, y, int(hp["k"]))
    if kind is ModelKind.MARS:
        return fit_mars(Z, y, int(hp["degree"]), int(hp["nprune"]))
    raise ValueError(f"unknown model kind: {kind}")


_PREDICTORS = {
    ModelKind.LINEAR: predict_linear,
    ModelKind.ELASTIC_NET: _en.predict_elastic_net,
    ModelKind.TREE: predict_tree,
    ModelKind.FOREST: predict_forest,
    ModelKind.SVR_RBF: predict_svr,
    ModelKind.KNN: predict_knn,
    ModelKind.MARS: predict_mars,
}


def fit_model(
    kind: ModelKind,
    hyperparams: dict,
    X_raw: np.ndarray,
    y: np.ndarray,
    feature_names: Sequence[str],
    seed: int = 0,
) -> TrainedModel:
    """Fit a recipe on the given rows, transform them, and fit the learner."""
    kind = ModelKind(kind)
    X_raw = np.atleast_2d(np.asarray(X_raw, dtype=float))
    y = np.asarray(y, dtype=float)
    recipe = fit_recipe(X_raw, feature_names)
    Z = apply_recipe(recipe, X_raw, feature_names)
    state = _fit_state(kind, hyperparams, Z, y, seed)
    return TrainedModel(
        kind=kind,
        hyperparams=dict(hyperparams),
        recipe=recipe,
        feature_names=tuple(feature_names),
        y_min=float(y.min()),
        y_max=float(y.max()),
        state=state,
    )


def fit_model_family(
    kind: ModelKind,
    grid: Sequence[dict],
    X_raw: np.ndarray,
    y: np.ndarray,
    feature_names: Sequence[str],
    seed: int = 0,
) -> list[TrainedModel]:
    """Fit every grid point, sharing work where hyperparameters allow it.

    Elastic-net lambda paths warm-start within each alpha, MARS shares one
    forward pass per degree, and trees grow once at the smallest cp and are
    truncated upward; every other kind falls back to point-by-point fits.
    The fitted models are equivalent to independent fits at each grid point.
    """
    kind = ModelKind(kind)
    X_raw = np.atleast_2d(np.asarray(X_raw, dtype=float))
    y = np.asarray(y, dtype=float)
    recipe = fit_recipe(X_raw, feature_names)
    Z = apply_recipe(recipe, X_raw, feature_names)
    y_min, y_max = float(y.min()), float(y.max())

    def wrap(hp: dict, state: dict) -> TrainedModel:
        return TrainedModel(
            kind=kind, hyperparams=dict(hp), recipe=recipe,
            feature_names=tuple(feature_names), y_min=y_min, y_max=y_max,
            state=state,
        )

    states: list[dict | None] = [None] * len(grid)
    if kind is ModelKind.ELASTIC_NET and all("lambda_frac" in hp for hp in grid):
        groups: dict[float, list[int]] = {}
        for i, hp in enumerate(grid):
            groups.setdefault(float(hp["alpha"]), []).append(i)
        for alpha, idxs in groups.items():
            lmax = lambda_max(Z, y, alpha)
            order = sorted(idxs, key=lambda i: -float(grid[i]["lambda_frac"]))
            lams = [float(grid[i]["lambda_frac"]) * lmax for i in order]
            for i, state in zip(order, fit_elastic_net_path(Z, y, alpha, lams)):
                states[i] = state
    elif kind is ModelKind.MARS:
        groups = {}
        for i, hp in enumerate(grid):
            groups.setdefault(int(hp["degree"]), []).append(i)
        for degree, idxs in groups.items():
            fitted = fit_mars_family(Z, y, degree, [int(grid[i]["nprune"]) for i in idxs])
            for i, state in zip(idxs, fitted):
                states[i] = state
    elif kind is ModelKind.FOREST:
        bins = prepare_bins(Z)
        for i, hp in enumerate(grid):
            states[i] = fit_forest_binned(
                bins, y, int(hp["mtry"]), int(hp["min_node_size"]),
                int(hp.get("n_trees", _forest.DEFAULT_N_TREES)),
                seed=derive_seed(seed, "forest_fit"),
            )
    elif kind is ModelKind.SVR_RBF:
        sigma = None
        K = None
        for i, hp in enumerate(grid):
            sig = hp.get("sigma", "auto")
            if sig in (None, "auto"):
                if sigma is None:
                    sigma = estimate_sigma(Z, derive_seed(seed, "sigma"))
                    K = _svr.rbf_kernel(Z, Z, sigma)
                states[i] = fit_svr(
                    Z, y, sigma, float(hp["C"]),
                    float(hp.get("epsilon", _svr.DEFAULT_EPSILON)), kernel=K,
                )
            else:
                states[i] = fit_svr(
                    Z, y, float(sig), float(hp["C"]),
                    float(hp.get("epsilon", _svr.DEFAULT_EPSILON)),
                )
    elif kind is ModelKind.TREE:
        cps = [float(hp["cp"]) for hp in grid]
        grown = fit_tree(Z, y, min(cps))
        for i, cp in enumerate(cps):
            states[i] = grown if cp == min(cps) else truncate_tree(grown, cp)
    else:
        for i, hp in enumerate(grid):
            states[i] = _fit_state(kind, hp, Z, y, seed)
    return [wrap(hp, state) for hp, state in zip(grid, states)]


def predict(
    model: TrainedModel,
    X_raw: np.ndarray,
    feature_names: Sequence[str] | None = None,
) -> np.ndarray:
    """Predict fibre diameters (nm) for raw-unit rows."""
    names = tuple(feature_names) if feature_names is not None else model.feature_names
    X_raw = np.atleast_2d(np.asarray(X_raw, dtype=float))
    Z = apply_recipe(model.recipe, X_raw, names)
    out = np.asarray(_PREDICTORS[model.kind](model.state, Z), dtype=float)
    if not np.all(np.isfinite(out)):
        raise RuntimeError(f"{model.kind.value} produced non-finite predictions")
    return out


# ---------------------------------------------------------------------------
# Serialization: JSON-safe, bit-exact round trips for predictions.
# ---------------------------------------------------------------------------


def _encode(value):
    if isinstance(value, np.ndarray):
        return {
            "__ndarray__": True,
            "dtype": str(value.dtype),
            "shape": list(value.shape),
            "data": value.ravel().tolist(),
        }
    if isinstance(value, (np.floating, np.integer, np.bool_)):
        return value.item()
    if isinstance(value, dict):
        return {k: _encode(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_encode(v) for v in value]
    return value


def _decode(value):
    if isinstance(value, dict):
        if value.get("__ndarray__"):
            arr = np.array(value["data"], dtype=value["dtype"])
            return arr.reshape(value["shape"])
        return {k: _decode(v) for k, v in value.items()}
    if isinstance(value, list):
        return [_decode(v) for v in value]
    return value


def model_to_dict(model: TrainedModel) -> dict:
    state = {k: v for k, v in model.state.items() if not k.startswith("_")}
    return {
        "kind": model.kind.value,
        "hyperparams": _encode(model.hyperparams),
        "recipe": model.recipe.to_dict(),
        "feature_names": list(model.feature_names),
        "y_min": model.y_min,
        "y_max": model.y_max,
        "state": _encode(state),
    }


def model_from_dict(data: dict) -> TrainedModel:
    return TrainedModel(
        kind=ModelKind(data["kind"]),
        hyperparams=_decode(data["hyperparams"]),
        recipe=NormalizationRecipe.from_dict(data["recipe"]),
        feature_names=tuple(data["feature_names"]),
        y_min=float(data["y_min"]),
        y_max=float(data["y_max"]),
        state=_decode(data["state"]),
    )


def model_to_json(model: TrainedModel) -> str:
    return json.dumps(model_to_dict(model))


def model_from_json(text: str) -> TrainedModel:
    return model_from_dict(json.loads(text))
