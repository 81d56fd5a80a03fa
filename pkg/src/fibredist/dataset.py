"""Electrospinning dataset ingestion, cleaning, normalization and synthesis.

The canonical tabular schema is a delimited text file (CSV or TSV) with the
header names in :data:`ALL_COLUMNS`. Every cell is read as text first; numeric
cells go through :func:`parse_numeric`, which strips units and reconciles
European and US decimal conventions. Rows missing any required modelling field
are dropped, never imputed.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .seeding import rng_for

# The six process parameters used as default predictors.
PROCESS_FEATURES = (
    "concentration",
    "needle_diameter",
    "rotation_speed",
    "voltage",
    "flow_rate",
    "distance",
)

ALL_COLUMNS = (
    "doi",
    "polymer",
    "solvent1",
    "solvent2",
    "solvent3",
    "solvent1_ratio",
    "solvent2_ratio",
    "solvent3_ratio",
    "concentration",
    "needle_diameter",
    "collector_type",
    "rotation_speed",
    "voltage",
    "flow_rate",
    "distance",
    "temperature",
    "humidity",
    "fibre_diameter",
)

# temperature and humidity are stored when given but sparsely reported, so
# their columns may be absent entirely.
OPTIONAL_COLUMNS = ("temperature", "humidity")
REQUIRED_COLUMNS = tuple(c for c in ALL_COLUMNS if c not in OPTIONAL_COLUMNS)

RATIO_SUM_TOLERANCE = 0.5

_NUM_TOKEN = re.compile(r"[-+]?(?:\d[\d.,]*|[.,]\d+)(?:[eE][-+]?\d+)?")
_EXP_TAIL = re.compile(r"[eE][-+]?\d+$")


def parse_numeric(text) -> float | None:
    """Parse a free-form numeric cell; ``None`` means missing.

    Units and stray characters are stripped. When both ',' and '.' occur the
    rightmost separator is the decimal mark and the other marks thousands; a
    lone ',' is a decimal mark; repeated identical separators are thousands
    grouping. Unparsable text is missing, not an error.
    """
    if text is None:
        return None
    match = _NUM_TOKEN.search(str(text))
    if match is None:
        return None
    token = match.group(0)
    exp = ""
    tail = _EXP_TAIL.search(token)
    if tail is not None:
        exp = token[tail.start():]
        token = token[: tail.start()]
    sign = ""
    if token[:1] in "+-":
        sign = token[0]
        token = token[1:]
    has_comma = "," in token
    has_dot = "." in token
    if has_comma and has_dot:
        if token.rfind(",") > token.rfind("."):
            token = token.replace(".", "").replace(",", ".")
        else:
            token = token.replace(",", "")
    elif has_comma:
        token = token.replace(",", ".") if token.count(",") == 1 else token.replace(",", "")
    elif has_dot and token.count(".") > 1:
        token = token.replace(".", "")
    try:
        return float(sign + token + exp)
    except ValueError:
        return None


def _norm_solvent(text: str | None) -> str:
    name = (text or "").strip().upper()
    return name if name else "NONE"


@dataclass(frozen=True)
class StudyRecord:
    """One literature or experimental observation (one measured fibre)."""

    doi: str
    polymer: str
    solvent1: str
    solvent2: str
    solvent3: str
    solvent1_ratio: float | None
    solvent2_ratio: float | None
    solvent3_ratio: float | None
    concentration: float
    needle_diameter: float
    collector_type: str
    rotation_speed: float
    voltage: float
    flow_rate: float
    distance: float
    temperature: float | None
    humidity: float | None
    fibre_diameter: float

    @property
    def study_id(self) -> str:
        return self.doi.strip().lower()

    def process_values(self) -> tuple[float, ...]:
        return tuple(getattr(self, name) for name in PROCESS_FEATURES)


@dataclass(frozen=True)
class ProcessInputs:
    """A user-selected operating point over the six process parameters."""

    concentration: float
    needle_diameter: float
    rotation_speed: float
    voltage: float
    flow_rate: float
    distance: float
    collector_type: str = ""

    def __post_init__(self):
        for name in PROCESS_FEATURES:
            value = float(getattr(self, name))
            if not np.isfinite(value):
                raise ValueError(f"{name} must be finite, got {value!r}")
            if value < 0:
                raise ValueError(f"{name} must be non-negative, got {value!r}")

    def as_dict(self) -> dict[str, float]:
        return {name: float(getattr(self, name)) for name in PROCESS_FEATURES}


@dataclass
class IngestReport:
    """Per-reason accounting of what a load kept, dropped and warned about."""

    rows_read: int = 0
    kept: int = 0
    dropped_missing: int = 0
    dropped_non_finite_target: int = 0
    missing_by_field: dict[str, int] = field(default_factory=dict)
    ratio_sum_warnings: int = 0
    ratio_range_warnings: int = 0

    def to_dict(self) -> dict:
        return {
            "rows_read": self.rows_read,
            "kept": self.kept,
            "dropped": {
                "missing": self.dropped_missing,
                "non_finite_target": self.dropped_non_finite_target,
            },
            "missing_by_field": dict(sorted(self.missing_by_field.items())),
            "warnings": {
                "ratio_sum": self.ratio_sum_warnings,
                "ratio_range": self.ratio_range_warnings,
            },
        }

    def to_json(self, indent: int = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent)


def _sniff_delimiter(header_line: str) -> str:
    for cand in ("\t", ";", ","):
        if cand in header_line:
            return cand
    return ","


def load_dataset(source) -> tuple[list[StudyRecord], IngestReport]:
    """Load records from a delimited file path, file object or text.

    Header matching is case-insensitive and order-free. Rows with a missing
    or non-finite fibre diameter, or any missing required modelling field,
    are dropped and counted per reason. The doi is kept for provenance only.
    """
    if hasattr(source, "read"):
        text = source.read()
    elif isinstance(source, str) and "\n" in source:
        text = source
    else:
        path = Path(source)
        if not path.exists():
            raise FileNotFoundError(f"dataset source not readable: {source!r}")
        text = path.read_text(encoding="utf-8")
    text = text.lstrip("﻿")
    first_line = text.split("\n", 1)[0]
    reader = csv.reader(io.StringIO(text), delimiter=_sniff_delimiter(first_line))
    rows = [row for row in reader if any(cell.strip() for cell in row)]
    if not rows:
        raise ValueError("dataset source is empty (no header row)")

    header = [h.strip().lower() for h in rows[0]]
    col_index = {name: header.index(name) for name in ALL_COLUMNS if name in header}
    missing_cols = [name for name in REQUIRED_COLUMNS if name not in col_index]
    if missing_cols:
        raise ValueError(f"missing required columns: {missing_cols}")

    def cell(row: list[str], name: str) -> str:
        idx = col_index.get(name)
        if idx is None or idx >= len(row):
            return ""
        return row[idx].strip()

    numeric_required = PROCESS_FEATURES
    records: list[StudyRecord] = []
    report = IngestReport()
    for row in rows[1:]:
        report.rows_read += 1
        target = parse_numeric(cell(row, "fibre_diameter"))
        if target is None or not np.isfinite(target) or target <= 0:
            report.dropped_non_finite_target += 1
            continue
        values: dict[str, float] = {}
        missing = []
        for name in numeric_required:
            value = parse_numeric(cell(row, name))
            if value is None or not np.isfinite(value):
                missing.append(name)
            else:
                values[name] = value
        polymer = cell(row, "polymer")
        if not polymer:
            missing.append("polymer")
        if missing:
            report.dropped_missing += 1
            for name in missing:
                report.missing_by_field[name] = report.missing_by_field.get(name, 0) + 1
            continue

        ratios = [parse_numeric(cell(row, f"solvent{i}_ratio")) for i in (1, 2, 3)]
        for ratio in ratios:
            if ratio is not None and not 0.0 <= ratio <= 100.0:
                report.ratio_range_warnings += 1
        if all(r is not None for r in ratios):
            total = sum(r for r in ratios if r is not None)
            if abs(total - 100.0) > RATIO_SUM_TOLERANCE:
                report.ratio_sum_warnings += 1

        records.append(
            StudyRecord(
                doi=cell(row, "doi"),
                polymer=polymer,
                solvent1=_norm_solvent(cell(row, "solvent1")),
                solvent2=_norm_solvent(cell(row, "solvent2")),
                solvent3=_norm_solvent(cell(row, "solvent3")),
                solvent1_ratio=ratios[0],
                solvent2_ratio=ratios[1],
                solvent3_ratio=ratios[2],
                collector_type=cell(row, "collector_type"),
                temperature=parse_numeric(cell(row, "temperature")),
                humidity=parse_numeric(cell(row, "humidity")),
                fibre_diameter=target,
                **values,
            )
        )
        report.kept += 1
    return records, report


def _fmt_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def records_to_csv(records: Iterable[StudyRecord]) -> str:
    """Render records as canonical CSV (round-trips through load_dataset)."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(ALL_COLUMNS)
    for rec in records:
        writer.writerow([_fmt_cell(getattr(rec, name)) for name in ALL_COLUMNS])
    return buf.getvalue()


def dataset_fingerprint(records: Sequence[StudyRecord]) -> str:
    """Content hash of the canonical CSV rendering."""
    return hashlib.sha256(records_to_csv(records).encode("utf-8")).hexdigest()


def available_polymers(records: Sequence[StudyRecord]) -> list[str]:
    seen: dict[str, str] = {}
    for rec in records:
        key = rec.polymer.strip().lower()
        seen.setdefault(key, rec.polymer.strip())
    return sorted(seen.values(), key=str.lower)


@dataclass(frozen=True)
class PolymerTable:
    """Model-ready matrix for one polymer, kept in raw (untransformed) units.

    Normalization recipes are always fit per resampling split, never stored
    here, so the table itself cannot leak test-fold statistics.
    """

    polymer: str
    feature_names: tuple[str, ...]
    X: np.ndarray
    y: np.ndarray
    study_ids: tuple[str, ...]
    records: tuple[StudyRecord, ...]

    def __post_init__(self):
        if not (len(self.X) == len(self.y) == len(self.study_ids) == len(self.records)):
            raise ValueError("rows of matrix, target and study ids must align")

    @property
    def n(self) -> int:
        return int(self.X.shape[0])

    @property
    def p(self) -> int:
        return int(self.X.shape[1])


def polymer_subset(
    records: Sequence[StudyRecord],
    polymer: str,
    include_collector: bool = False,
) -> PolymerTable:
    """Rows of one polymer as a feature matrix over the six process parameters.

    When ``include_collector`` is set and more than one collector label exists
    in the subset, one indicator column per label is appended.
    """
    key = polymer.strip().lower()
    subset = [r for r in records if r.polymer.strip().lower() == key]
    if not subset:
        raise ValueError(
            f"unknown polymer {polymer!r}; available: {available_polymers(records)}"
        )
    study_ids = tuple(r.study_id for r in subset)
    if len(set(study_ids)) < 2:
        raise ValueError(
            f"polymer {polymer!r} has a single study; grouped cross-validation "
            "needs at least 2 distinct studies"
        )
    names = list(PROCESS_FEATURES)
    columns = [np.array([getattr(r, f) for r in subset], dtype=float) for f in names]
    if include_collector:
        labels = sorted({r.collector_type.strip() for r in subset})
        if len(labels) > 1:
            for label in labels:
                names.append(f"collector_type={label}")
                columns.append(
                    np.array([1.0 if r.collector_type.strip() == label else 0.0 for r in subset])
                )
    X = np.column_stack(columns)
    y = np.array([r.fibre_diameter for r in subset], dtype=float)
    return PolymerTable(
        polymer=subset[0].polymer.strip(),
        feature_names=tuple(names),
        X=X,
        y=y,
        study_ids=study_ids,
        records=tuple(subset),
    )


@dataclass(frozen=True)
class NormalizationRecipe:
    """Zero-variance removal plus per-feature centring and scaling.

    Means and standard deviations (n-1 denominator) come only from the rows
    the recipe was fit on; the target never enters the recipe.
    """

    kept_features: tuple[str, ...]
    dropped_zero_variance: tuple[str, ...]
    means: np.ndarray
    sds: np.ndarray

    def to_dict(self) -> dict:
        return {
            "kept_features": list(self.kept_features),
            "dropped_zero_variance": list(self.dropped_zero_variance),
            "means": [float(v) for v in self.means],
            "sds": [float(v) for v in self.sds],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "NormalizationRecipe":
        return cls(
            kept_features=tuple(data["kept_features"]),
            dropped_zero_variance=tuple(data["dropped_zero_variance"]),
            means=np.array(data["means"], dtype=float),
            sds=np.array(data["sds"], dtype=float),
        )


def fit_recipe(X: np.ndarray, feature_names: Sequence[str]) -> NormalizationRecipe:
    """Estimate a normalization recipe from training rows only."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] < 2:
        raise ValueError("fitting a recipe needs at least 2 training rows")
    if X.shape[1] != len(feature_names):
        raise ValueError("feature name count does not match matrix width")
    means = X.mean(axis=0)
    sds = X.std(axis=0, ddof=1)
    # Guard against float-noise variance on effectively constant columns.
    keep = sds > 1e-12 * np.maximum(1.0, np.abs(means))
    if not keep.any():
        raise ValueError("all features have zero variance on the training rows")
    kept = tuple(name for name, k in zip(feature_names, keep) if k)
    dropped = tuple(name for name, k in zip(feature_names, keep) if not k)
    return NormalizationRecipe(
        kept_features=kept,
        dropped_zero_variance=dropped,
        means=means[keep],
        sds=sds[keep],
    )


def apply_recipe(
    recipe: NormalizationRecipe, X: np.ndarray, feature_names: Sequence[str]
) -> np.ndarray:
    """Map kept features to (x - mean) / sd; dropped features are removed."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    name_to_col = {name: i for i, name in enumerate(feature_names)}
    missing = [name for name in recipe.kept_features if name not in name_to_col]
    if missing:
        raise ValueError(f"rows are missing kept features: {missing}")
    cols = [name_to_col[name] for name in recipe.kept_features]
    return (X[:, cols] - recipe.means) / recipe.sds


@dataclass(frozen=True)
class RangeSummary:
    """Observed per-feature min and max over one polymer subset (raw units)."""

    features: tuple[str, ...]
    minima: tuple[float, ...]
    maxima: tuple[float, ...]

    def __post_init__(self):
        for name, lo, hi in zip(self.features, self.minima, self.maxima):
            if lo > hi:
                raise ValueError(f"range for {name} has min {lo} > max {hi}")

    def bounds(self, feature: str) -> tuple[float, float]:
        idx = self.features.index(feature)
        return self.minima[idx], self.maxima[idx]

    def to_dict(self) -> dict:
        return {
            name: {"min": lo, "max": hi}
            for name, lo, hi in zip(self.features, self.minima, self.maxima)
        }


def range_summary(table: PolymerTable) -> RangeSummary:
    """Observed ranges of the six process parameters for the table's polymer."""
    idx = [table.feature_names.index(name) for name in PROCESS_FEATURES]
    sub = table.X[:, idx]
    return RangeSummary(
        features=PROCESS_FEATURES,
        minima=tuple(float(v) for v in sub.min(axis=0)),
        maxima=tuple(float(v) for v in sub.max(axis=0)),
    )


@dataclass(frozen=True)
class RangeViolation:
    feature: str
    value: float
    minimum: float
    maximum: float

    def to_dict(self) -> dict:
        return {
            "feature": self.feature,
            "value": self.value,
            "min": self.minimum,
            "max": self.maximum,
        }


def range_check(inputs: ProcessInputs, ranges: RangeSummary) -> list[RangeViolation]:
    """Inputs outside the observed closed interval per feature; empty = all ok."""
    violations = []
    for name, lo, hi in zip(ranges.features, ranges.minima, ranges.maxima):
        value = float(getattr(inputs, name))
        if value < lo or value > hi:
            violations.append(RangeViolation(name, value, lo, hi))
    return violations


# ---------------------------------------------------------------------------
# Synthetic data with a documented ground truth, for tests and demos.
# ---------------------------------------------------------------------------

SYNTHETIC_POLYMER = "SYNTHPOLY"


@dataclass(frozen=True)
class SyntheticConfig:
    n_studies: int
    rows_per_study: int
    noise_sd: float
    seed: int
    study_offset_sd: float = 30.0

    def __post_init__(self):
        if self.n_studies <= 0 or self.rows_per_study <= 0:
            raise ValueError("n_studies and rows_per_study must be positive")
        if self.noise_sd < 0 or self.study_offset_sd < 0:
            raise ValueError("noise_sd and study_offset_sd must be non-negative")


def ground_truth_diameter(concentration, needle_diameter, rotation_speed,
                          voltage, flow_rate, distance):
    """Noiseless diameter (nm) underlying the synthetic generator.

    Concentration dominates and is strictly monotone increasing over the
    generated ranges, with a sharp high-concentration regime jump (an
    entanglement-onset story). Needle gauge enters with a negative (inverse)
    effect plus a concentration interaction. Voltage, rotation speed, flow
    rate and distance contribute centred quadratic bowls, invisible to a
    straight-line fit but smooth enough for local learners.
    """
    c = np.asarray(concentration, dtype=float)
    g = np.asarray(needle_diameter, dtype=float)
    r = np.asarray(rotation_speed, dtype=float)
    v = np.asarray(voltage, dtype=float)
    f = np.asarray(flow_rate, dtype=float)
    d = np.asarray(distance, dtype=float)
    value = (
        420.0
        + 3.0 * c
        + 85.0 * (1.0 + np.tanh(c - 17.5))
        - 6.0 * (g - 22.0)
        + 0.5 * (c - 12.0) * (25.0 - g)
        - 0.85 * (v - 19.0) ** 2
        - 110.0 * ((r - 1750.0) / 1250.0) ** 2
        - 85.0 * ((f - 1.6) / 1.4) ** 2
        + 95.0 * ((d - 16.5) / 8.5) ** 2
    )
    return value if value.ndim else float(value)


@dataclass(frozen=True)
class SyntheticTruth:
    """Ground-truth bookkeeping emitted alongside generated records."""

    config: SyntheticConfig
    study_offsets: dict[str, float]
    truth_values: np.ndarray  # noiseless, offset-free diameter per record

_PARAM_RANGES = {
    "concentration": (6.0, 20.0),
    "rotation_speed": (500.0, 3000.0),
    "voltage": (10.0, 30.0),
    "flow_rate": (0.2, 3.0),
    "distance": (8.0, 25.0),
}
_GAUGES = (18, 19, 20, 21, 22, 23, 24)

# Studies read like concentration series: wide within-study spread along
# concentration, narrower exploration of the other knobs.
_JITTER = {
    "concentration": 4.5,
    "rotation_speed": 250.0,
    "voltage": 2.5,
    "flow_rate": 0.3,
    "distance": 2.5,
}


def generate_synthetic(config: SyntheticConfig) -> tuple[list[StudyRecord], SyntheticTruth]:
    """Deterministic records for a fictitious polymer with known ground truth.

    Rows cluster per study (a study fixes a centre in parameter space and its
    rows jitter around it), mirroring the near-duplicate conditions found in
    literature compilations. Each study adds a Gaussian offset of scale
    ``study_offset_sd`` and each row Gaussian noise of scale ``noise_sd``.
    """
    rng = rng_for(config.seed, "synthetic")
    records: list[StudyRecord] = []
    offsets: dict[str, float] = {}
    truths: list[float] = []
    for s in range(config.n_studies):
        doi = f"10.5555/synth.{s:04d}"
        centers = {
            name: rng.uniform(lo, hi) for name, (lo, hi) in _PARAM_RANGES.items()
        }
        gauge = float(_GAUGES[rng.integers(0, len(_GAUGES))])
        offset = float(rng.normal(0.0, config.study_offset_sd)) if config.study_offset_sd else 0.0
        offsets[doi] = offset
        if s % 4 == 3:
            solvents = ("DMF", "THF", "NONE")
            ratios = (50.0, 50.0, 0.0)
        else:
            solvents = ("WATER", "NONE", "NONE")
            ratios = (100.0, 0.0, 0.0)
        collector = "ROLLING_DRUM" if s % 3 else "STATIC_PLATE"
        for _ in range(config.rows_per_study):
            params = {}
            for name, (lo, hi) in _PARAM_RANGES.items():
                params[name] = float(np.clip(centers[name] + rng.normal(0.0, _JITTER[name]), lo, hi))
            params["needle_diameter"] = gauge
            truth = ground_truth_diameter(**params)
            noise = float(rng.normal(0.0, config.noise_sd)) if config.noise_sd else 0.0
            diameter = truth + offset + noise
            if diameter <= 0:
                raise ValueError(
                    "synthetic config produced a non-positive diameter; "
                    "reduce noise_sd or study_offset_sd"
                )
            report_ambient = rng.random() < 0.7
            records.append(
                StudyRecord(
                    doi=doi,
                    polymer=SYNTHETIC_POLYMER,
                    solvent1=solvents[0],
                    solvent2=solvents[1],
                    solvent3=solvents[2],
                    solvent1_ratio=ratios[0],
                    solvent2_ratio=ratios[1],
                    solvent3_ratio=ratios[2],
                    collector_type=collector,
                    temperature=round(float(rng.uniform(20, 28)), 1) if report_ambient else None,
                    humidity=round(float(rng.uniform(30, 60)), 1) if report_ambient else None,
                    fibre_diameter=diameter,
                    **params,
                )
            )
            truths.append(float(truth))
    return records, SyntheticTruth(
        config=config,
        study_offsets=offsets,
        truth_values=np.array(truths),
    )
