"""Assemble one run's artifacts into a sheet-per-CSV report bundle.

The bundle is a zip archive holding a JSON manifest, nine fixed-schema CSV
sheets and five SVG figures. Sheet and figure bytes are a pure function of
the artifacts; the run timestamp lives only in the manifest, so rebuilding
from identical artifacts reproduces identical bytes everywhere else.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import zipfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__ as _pkg_version
from .dataset import ProcessInputs, RangeSummary, RangeViolation
from .distribution import PredictiveDistribution
from .figures import (
    correlation_heatmap_figure,
    importance_figure,
    predicted_vs_observed_figure,
    prediction_distribution_figure,
    shap_summary_figure,
)
from .interpret import CorrelationMatrix, ImportanceTable, ShapSummary
from .learners import ModelKind
from .recommend import SolventRecommendation
from .validation import CVResult, MetricsSummary

SHEET_NAMES = (
    "Summary",
    "Out_of_Range",
    "CV_Predictions",
    "Prediction_Distribution",
    "Metrics",
    "Coefficients",
    "Variable_Importance",
    "SHAP_Summary",
    "Correlation_Matrix",
)

FIGURE_NAMES = (
    "prediction_distribution",
    "predicted_vs_observed",
    "variable_importance",
    "shap_summary",
    "correlation_heatmap",
)

SHEET_HEADERS = {
    "Summary": ("key", "value"),
    "Out_of_Range": ("feature", "value", "observed_min", "observed_max"),
    "CV_Predictions": ("row", "study_id", "observed_nm", "predicted_nm", "fold_label"),
    "Prediction_Distribution": ("series", "index", "value_nm"),
    "Metrics": ("metric", "mean", "sd", "n_folds", "note"),
    "Coefficients": ("term", "estimate", "std_error", "t_stat", "note"),
    "Variable_Importance": ("rank", "feature", "raw_score", "scaled_score"),
    "SHAP_Summary": ("instance", "feature", "phi_nm"),
    "Correlation_Matrix": None,  # dynamic: feature + one column per name
}

COEFFICIENT_KINDS = (ModelKind.LINEAR, ModelKind.ELASTIC_NET)


@dataclass
class RunArtifacts:
    """Everything one pipeline run produces, ready for reporting."""

    polymer: str
    kind: ModelKind
    seed: int
    inputs: ProcessInputs
    prediction: float
    distribution: PredictiveDistribution
    cv: CVResult
    summary: MetricsSummary
    observed: np.ndarray
    study_ids: tuple[str, ...]
    coefficients: list[dict] | None
    coefficients_note: str
    importance: ImportanceTable
    shap: ShapSummary
    correlations: CorrelationMatrix
    recommendation: SolventRecommendation
    violations: list[RangeViolation]
    ranges: RangeSummary
    dataset_fingerprint: str
    created_utc: str
    n_rows: int
    n_studies: int
    hyperparams: dict = field(default_factory=dict)

    def range_status(self) -> str:
        if not self.violations:
            return "All parameters are within the observed range for the selected polymer."
        names = ", ".join(v.feature for v in self.violations)
        return f"Parameters outside the observed range: {names}."


@dataclass
class ReportBundle:
    manifest: dict
    sheets: dict[str, bytes]
    figures: dict[str, bytes]

    def members(self) -> dict[str, bytes]:
        out = {f"sheets/{name}.csv": data for name, data in self.sheets.items()}
        out.update({f"figures/{name}.svg": data for name, data in self.figures.items()})
        return out


def _num(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _csv_bytes(header, rows) -> bytes:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    if header is not None:
        writer.writerow(header)
    for row in rows:
        writer.writerow([_num(v) for v in row])
    return buf.getvalue().encode("utf-8")


def _summary_rows(a: RunArtifacts) -> list[tuple[str, object]]:
    rows: list[tuple[str, object]] = [
        ("polymer", a.polymer),
        ("model", a.kind.value),
        ("seed", a.seed),
        ("dataset_fingerprint", a.dataset_fingerprint),
        ("n_rows", a.n_rows),
        ("n_studies", a.n_studies),
    ]
    for name, value in a.inputs.as_dict().items():
        rows.append((f"input.{name}", value))
    rows.append(("input.collector_type", a.inputs.collector_type))
    rows.append(("hyperparams", json.dumps(a.hyperparams, sort_keys=True)))
    rows.append(("predicted_diameter_nm", a.prediction))
    rows.append(("bootstrap_realisations", a.distribution.m))
    rows.append(("rmse", a.summary.format_cell("rmse")))
    rows.append(("mae", a.summary.format_cell("mae")))
    rows.append(("r_squared", a.summary.format_cell("r2")))
    rows.append(("solvent_recommendation", a.recommendation.sentence()))
    rows.append(("range_status", a.range_status()))
    rows.append(("shap_baseline_nm", a.shap.baseline))
    return rows


def build_report(a: RunArtifacts) -> ReportBundle:
    """Render all sheets and figures; byte-deterministic given the artifacts."""
    salt = f"{a.dataset_fingerprint}:{a.seed}"
    sheets: dict[str, bytes] = {}
    sheets["Summary"] = _csv_bytes(SHEET_HEADERS["Summary"], _summary_rows(a))
    sheets["Out_of_Range"] = _csv_bytes(
        SHEET_HEADERS["Out_of_Range"],
        [(v.feature, v.value, v.minimum, v.maximum) for v in a.violations],
    )
    sheets["CV_Predictions"] = _csv_bytes(
        SHEET_HEADERS["CV_Predictions"],
        [
            (i, a.study_ids[i], float(a.observed[i]), float(a.cv.oof_predictions[i]), label)
            for fold in a.cv.folds
            for i, label in zip(fold.test_indices.tolist(), [fold.label] * len(fold.test_indices))
        ],
    )
    dist_rows = [("point_prediction", 0, a.prediction)]
    dist_rows += [
        ("oof_prediction", i, float(v)) for i, v in enumerate(a.cv.oof_predictions)
    ]
    dist_rows += [
        ("bootstrap_realisation", i, float(v))
        for i, v in enumerate(a.distribution.realisations)
    ]
    sheets["Prediction_Distribution"] = _csv_bytes(
        SHEET_HEADERS["Prediction_Distribution"], dist_rows
    )
    metric_rows = []
    for name in ("rmse", "mae", "r2"):
        note = ""
        if name == "r2" and a.summary.r2_missing_folds:
            note = f"undefined in {a.summary.r2_missing_folds} constant-target folds"
        metric_rows.append(
            (name, a.summary.mean.get(name), a.summary.sd.get(name), a.summary.n_folds, note)
        )
    for name in ("rmse", "mae", "r2"):
        metric_rows.append(
            (f"{name}_pooled_oof", a.cv.oof_metrics.get(name), None, a.summary.n_folds,
             "computed on all out-of-fold predictions")
        )
    sheets["Metrics"] = _csv_bytes(SHEET_HEADERS["Metrics"], metric_rows)
    if a.coefficients is not None:
        coef_rows = [
            (c["term"], c.get("estimate"), c.get("std_error"), c.get("t_stat"), c.get("note", ""))
            for c in a.coefficients
        ]
    else:
        coef_rows = [("(none)", None, None, None, a.coefficients_note)]
    sheets["Coefficients"] = _csv_bytes(SHEET_HEADERS["Coefficients"], coef_rows)
    sheets["Variable_Importance"] = _csv_bytes(
        SHEET_HEADERS["Variable_Importance"], a.importance.top(20).rows()
    )
    sheets["SHAP_Summary"] = _csv_bytes(SHEET_HEADERS["SHAP_Summary"], a.shap.rows())
    corr_header = ["feature"] + list(a.correlations.names)
    sheets["Correlation_Matrix"] = _csv_bytes(corr_header, a.correlations.to_rows())

    figures = {
        "prediction_distribution": prediction_distribution_figure(
            a.cv.oof_predictions, a.prediction, salt
        ),
        "predicted_vs_observed": predicted_vs_observed_figure(
            a.observed, a.cv.oof_predictions, salt
        ),
        "variable_importance": importance_figure(a.importance, salt),
        "shap_summary": shap_summary_figure(a.shap, salt, seed=a.seed),
        "correlation_heatmap": correlation_heatmap_figure(a.correlations, salt),
    }

    bundle = ReportBundle(manifest={}, sheets=sheets, figures=figures)
    members = bundle.members()
    bundle.manifest = {
        "format_version": 1,
        "package_version": _pkg_version,
        "polymer": a.polymer,
        "model": a.kind.value,
        "seed": a.seed,
        "dataset_fingerprint": a.dataset_fingerprint,
        "created_utc": a.created_utc,
        "members": {
            path: hashlib.sha256(data).hexdigest() for path, data in sorted(members.items())
        },
    }
    return bundle


def write_bundle(bundle: ReportBundle, path) -> Path:
    """Write the bundle as a zip with clock-independent member timestamps."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    stamp = (1980, 1, 1, 0, 0, 0)
    with zipfile.ZipFile(path, "w", compression=zipfile.ZIP_DEFLATED) as zf:
        manifest_bytes = json.dumps(bundle.manifest, indent=2, sort_keys=True).encode("utf-8")
        zf.writestr(zipfile.ZipInfo("manifest.json", stamp), manifest_bytes)
        for member, data in sorted(bundle.members().items()):
            zf.writestr(zipfile.ZipInfo(member, stamp), data)
    return path


def verify_bundle(path) -> dict:
    """Re-hash every member against the manifest; raises on any mismatch."""
    with zipfile.ZipFile(path) as zf:
        manifest = json.loads(zf.read("manifest.json"))
        for member, expected in manifest["members"].items():
            actual = hashlib.sha256(zf.read(member)).hexdigest()
            if actual != expected:
                raise ValueError(f"hash mismatch for {member}")
    return manifest
