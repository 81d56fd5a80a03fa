"""Pipeline orchestration: one call runs subset, nested CV, final fit,
prediction, bootstrap, interpretability, recommendation and range checks.

A loaded dataset is immutable; runs are cached by the hash of the request
plus the dataset fingerprint, so identical requests return identical
artifacts (and byte-identical report bundles). An asynchronous job registry
backs the HTTP layer's submit/poll workflow.
"""

from __future__ import annotations

import hashlib
import json
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path

import numpy as np

from .dataset import (
    ProcessInputs,
    available_polymers,
    dataset_fingerprint,
    load_dataset,
    polymer_subset,
    range_check,
    range_summary,
)
from .distribution import compare_distributions, residual_bootstrap
from .interpret import correlation_matrix, shap_values, variable_importance
from .learners import ModelKind, predict
from .recommend import recommend_solvents
from .report import RunArtifacts, build_report, write_bundle
from .seeding import DEFAULT_SEED, derive_seed, rng_for
from .validation import final_fit, nested_cv

BOOTSTRAP_REALISATIONS = 100
SHAP_INSTANCE_CAP = 200


@dataclass(frozen=True)
class RunRequest:
    polymer: str
    inputs: ProcessInputs
    model: ModelKind
    seed: int = DEFAULT_SEED
    include_collector: bool = False

    def canonical(self) -> dict:
        return {
            "polymer": self.polymer.strip().lower(),
            "inputs": self.inputs.as_dict(),
            "collector_type": self.inputs.collector_type,
            "model": ModelKind(self.model).value,
            "seed": int(self.seed),
            "include_collector": bool(self.include_collector),
        }

    def cache_key(self, fingerprint: str) -> str:
        payload = json.dumps(self.canonical(), sort_keys=True) + fingerprint
        return hashlib.sha256(payload.encode()).hexdigest()[:16]


class DataStore:
    """One loaded dataset per process, hot-swappable behind a lock."""

    def __init__(self, records):
        self._lock = threading.Lock()
        self._set(records)

    def _set(self, records):
        self.records = tuple(records)
        self.fingerprint = dataset_fingerprint(self.records)

    def reload(self, records):
        with self._lock:
            self._set(records)

    @classmethod
    def from_path(cls, path) -> "DataStore":
        records, _ = load_dataset(Path(path))
        return cls(records)

    def polymers(self) -> list[str]:
        return available_polymers(self.records)


def list_capabilities(store: DataStore) -> dict:
    return {
        "polymers": store.polymers(),
        "models": [{"kind": k.value, "available": True} for k in ModelKind],
        "dataset_fingerprint": store.fingerprint,
        "n_records": len(store.records),
    }


def _inputs_row(inputs: ProcessInputs, feature_names) -> np.ndarray:
    row = np.zeros(len(feature_names))
    values = inputs.as_dict()
    for j, name in enumerate(feature_names):
        if name in values:
            row[j] = values[name]
        elif name.startswith("collector_type="):
            row[j] = 1.0 if name.split("=", 1)[1] == inputs.collector_type.strip() else 0.0
    return row


def _coefficient_rows(model) -> tuple[list[dict] | None, str]:
    if model.kind is ModelKind.LINEAR:
        rows = [{
            "term": "(intercept)",
            "estimate": model.state["intercept"],
            "std_error": model.state["intercept_se"],
            "t_stat": model.state["intercept_t"],
        }]
        for name, est, se, t in zip(
            model.recipe.kept_features,
            model.state["coef"],
            model.state["std_errors"],
            model.state["t_stats"],
        ):
            rows.append({
                "term": name, "estimate": float(est),
                "std_error": float(se), "t_stat": float(t),
            })
        return rows, ""
    if model.kind is ModelKind.ELASTIC_NET:
        note = (
            f"penalized estimates at alpha={model.state['alpha']:g}, "
            f"lambda={model.state['lambda']:.6g}"
        )
        rows = [{"term": "(intercept)", "estimate": model.state["intercept"], "note": note}]
        for name, est in zip(model.recipe.kept_features, model.state["coef"]):
            rows.append({"term": name, "estimate": float(est), "note": note})
        return rows, ""
    return None, (
        f"the {model.kind.value} model provides no transparent coefficients"
    )


def run_pipeline(store: DataStore, request: RunRequest, n_jobs: int = 1) -> RunArtifacts:
    """Execute the full run; deterministic given (request, dataset)."""
    kind = ModelKind(request.model)
    seed = int(request.seed)
    table = polymer_subset(store.records, request.polymer,
                           include_collector=request.include_collector)
    ranges = range_summary(table)
    violations = range_check(request.inputs, ranges)
    cv, summary = nested_cv(table, kind, seed, n_jobs=n_jobs)
    model, hyperparams = final_fit(table, kind, seed)
    row = _inputs_row(request.inputs, table.feature_names)
    prediction = float(predict(model, row[None, :], table.feature_names)[0])
    residual_pool = table.y - cv.oof_predictions
    dist = residual_bootstrap(
        prediction, residual_pool, m=BOOTSTRAP_REALISATIONS,
        seed=derive_seed(seed, "bootstrap"),
    )
    importance = variable_importance(model, table, seed=seed)
    rng = rng_for(seed, "shap", "instances")
    if table.n > SHAP_INSTANCE_CAP:
        instance_idx = np.sort(rng.choice(table.n, size=SHAP_INSTANCE_CAP, replace=False))
    else:
        instance_idx = np.arange(table.n)
    shap = shap_values(
        model,
        table.X[instance_idx],
        table.X,
        seed=derive_seed(seed, "shap"),
        feature_names=table.feature_names,
    )
    coefficients, coef_note = _coefficient_rows(model)
    return RunArtifacts(
        polymer=table.polymer,
        kind=kind,
        seed=seed,
        inputs=request.inputs,
        prediction=prediction,
        distribution=dist,
        cv=cv,
        summary=summary,
        observed=table.y,
        study_ids=tuple(table.study_ids),
        coefficients=coefficients,
        coefficients_note=coef_note,
        importance=importance,
        shap=shap,
        correlations=correlation_matrix(table),
        recommendation=recommend_solvents(table, request.inputs, prediction),
        violations=violations,
        ranges=ranges,
        dataset_fingerprint=store.fingerprint,
        created_utc=datetime.now(timezone.utc).isoformat(),
        n_rows=table.n,
        n_studies=len(set(table.study_ids)),
        hyperparams=hyperparams,
    )


def artifacts_to_json(a: RunArtifacts, run_id: str = "") -> dict:
    """The full result payload served by the HTTP layer."""
    return {
        "run_id": run_id,
        "polymer": a.polymer,
        "model": a.kind.value,
        "seed": a.seed,
        "dataset_fingerprint": a.dataset_fingerprint,
        "inputs": {**a.inputs.as_dict(), "collector_type": a.inputs.collector_type},
        "hyperparams": a.hyperparams,
        "prediction_nm": a.prediction,
        "realisations_nm": a.distribution.realisations.tolist(),
        "metrics": {
            "per_fold": a.summary.to_dict(),
            "pooled_oof": a.cv.oof_metrics,
        },
        "oof": [
            {
                "row": i,
                "study_id": a.study_ids[i],
                "observed_nm": float(a.observed[i]),
                "predicted_nm": float(a.cv.oof_predictions[i]),
            }
            for i in range(len(a.observed))
        ],
        "coefficients": a.coefficients,
        "coefficients_note": a.coefficients_note,
        "importance": [
            {"rank": r, "feature": f, "raw_score": raw, "scaled_score": scaled}
            for r, f, raw, scaled in a.importance.top(20).rows()
        ],
        "shap": {
            "baseline_nm": a.shap.baseline,
            "sims": a.shap.sims,
            "background_rows": a.shap.background_rows,
            "feature_order": list(a.shap.feature_order),
            "values": [
                {"instance": i, "feature": f, "phi_nm": phi}
                for i, f, phi in a.shap.rows()
            ],
        },
        "correlations": {
            "names": list(a.correlations.names),
            "matrix": a.correlations.matrix.tolist(),
            "excluded_zero_variance": list(a.correlations.excluded_zero_variance),
        },
        "recommendation": {
            **a.recommendation.to_dict(),
            "sentence": a.recommendation.sentence(),
        },
        "range_check": {
            "violations": [v.to_dict() for v in a.violations],
            "ranges": a.ranges.to_dict(),
            "status": a.range_status(),
        },
        "n_rows": a.n_rows,
        "n_studies": a.n_studies,
        "created_utc": a.created_utc,
    }


class RunState(str, Enum):
    QUEUED = "QUEUED"
    PROCESSING = "PROCESSING"
    DONE = "DONE"
    FAILED = "FAILED"


_ORDER = {RunState.QUEUED: 0, RunState.PROCESSING: 1, RunState.DONE: 2, RunState.FAILED: 2}


@dataclass
class RunStatus:
    run_id: str
    state: RunState = RunState.QUEUED
    message: str = "queued"
    progress: str = ""

    def advance(self, state: RunState, message: str, progress: str = ""):
        if _ORDER[state] < _ORDER[self.state] or self.state in (RunState.DONE, RunState.FAILED):
            return  # terminal states are immutable; transitions are monotone
        self.state = state
        self.message = message
        self.progress = progress

    def to_dict(self) -> dict:
        return {
            "run_id": self.run_id,
            "state": self.state.value,
            "message": self.message,
            "progress": self.progress,
        }


class JobRegistry:
    """Submit-and-poll execution of pipeline runs with result caching."""

    def __init__(self, store: DataStore, workers: int = 2, n_jobs: int = 1):
        self.store = store
        self.n_jobs = n_jobs
        self._pool = ThreadPoolExecutor(max_workers=max(1, workers))
        self._lock = threading.Lock()
        self._status: dict[str, RunStatus] = {}
        self._artifacts: dict[str, RunArtifacts] = {}
        self._bundles: dict[str, bytes] = {}

    def submit(self, request: RunRequest) -> str:
        run_id = request.cache_key(self.store.fingerprint)
        with self._lock:
            if run_id in self._artifacts:
                return run_id
            if run_id in self._status and self._status[run_id].state in (
                RunState.QUEUED, RunState.PROCESSING
            ):
                return run_id
            self._status[run_id] = RunStatus(run_id=run_id)
        self._pool.submit(self._execute, run_id, request)
        return run_id

    def _execute(self, run_id: str, request: RunRequest):
        status = self._status[run_id]
        status.advance(RunState.PROCESSING, "WAIT... PROCESSING", "running pipeline")
        try:
            artifacts = run_pipeline(self.store, request, n_jobs=self.n_jobs)
        except Exception as exc:
            status.advance(RunState.FAILED, str(exc))
            return
        with self._lock:
            self._artifacts[run_id] = artifacts
        status.advance(RunState.DONE, "RESULTS IN PREDICTION & METRICS TAB")

    def status(self, run_id: str) -> RunStatus | None:
        status = self._status.get(run_id)
        if status is None and run_id in self._artifacts:
            status = RunStatus(run_id, RunState.DONE, "RESULTS IN PREDICTION & METRICS TAB")
        return status

    def artifacts(self, run_id: str) -> RunArtifacts | None:
        return self._artifacts.get(run_id)

    def report_bytes(self, run_id: str) -> bytes | None:
        with self._lock:
            if run_id in self._bundles:
                return self._bundles[run_id]
        artifacts = self._artifacts.get(run_id)
        if artifacts is None:
            return None
        import tempfile

        bundle = build_report(artifacts)
        with tempfile.TemporaryDirectory() as tmp:
            path = write_bundle(bundle, Path(tmp) / "report.zip")
            data = path.read_bytes()
        with self._lock:
            self._bundles[run_id] = data
        return data

    def shutdown(self):
        self._pool.shutdown(wait=False)


def compare_samples(a, b) -> dict:
    """Bridge for the compare endpoint and CLI subcommand."""
    return compare_distributions(a, b).to_dict()
