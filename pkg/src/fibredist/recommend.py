"""Solvent-system recommendation from historically similar records.

Candidate rows of the selected polymer are scored by a convex combination of
parameter proximity (Euclidean over the six process parameters, each scaled
by its observed variability) and closeness of the recorded fibre diameter to
the current prediction. The most frequent solvent triplet among the k
best-scoring rows wins, with median ratios taken over the winners.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import PROCESS_FEATURES, PolymerTable, ProcessInputs

DEFAULT_K = 10
DEFAULT_WEIGHT = 0.7


@dataclass(frozen=True)
class SolventRecommendation:
    solvents: tuple[str, str, str]
    median_ratios: tuple[float | None, float | None, float | None]
    supporting_rows: int
    candidate_indices: tuple[int, ...]

    def sentence(self, k: int = DEFAULT_K) -> str:
        names = " + ".join(self.solvents)
        ratios = " / ".join(
            "n/a" if r is None else f"{r:g}%" for r in self.median_ratios
        )
        return (
            f"Recommended solvents & ratios (from {k} closest rows): "
            f"{names}. Median ratios: {ratios}."
        )

    def to_dict(self) -> dict:
        return {
            "solvents": list(self.solvents),
            "median_ratios": list(self.median_ratios),
            "supporting_rows": self.supporting_rows,
            "candidate_indices": list(self.candidate_indices),
        }


def _minmax(values: np.ndarray) -> np.ndarray:
    lo, hi = float(values.min()), float(values.max())
    if hi > lo:
        return (values - lo) / (hi - lo)
    return np.zeros_like(values)


def recommend_solvents(
    table: PolymerTable,
    inputs: ProcessInputs,
    predicted_diameter: float,
    k: int = DEFAULT_K,
    weight: float = DEFAULT_WEIGHT,
) -> SolventRecommendation:
    """Modal solvent triplet among the k rows nearest the operating point.

    Zero-variance parameter columns contribute zero distance, so the score is
    invariant to rescaling any raw parameter column together with the query.
    Ties in the modal count break by lower total score, then lexicographic.
    """
    if table.n == 0:
        raise ValueError("empty polymer subset")
    if not 0.0 <= weight <= 1.0:
        raise ValueError("weight must lie in [0, 1]")
    idx = [table.feature_names.index(name) for name in PROCESS_FEATURES]
    params = table.X[:, idx]
    sds = params.std(axis=0, ddof=1) if table.n > 1 else np.zeros(len(idx))
    query = np.array([getattr(inputs, name) for name in PROCESS_FEATURES])
    diff = params - query
    scaled = np.where(sds > 0, diff / np.where(sds > 0, sds, 1.0), 0.0)
    param_dist = np.sqrt((scaled ** 2).sum(axis=1))
    dia_sd = float(table.y.std(ddof=1)) if table.n > 1 else 0.0
    dia_dist = (
        np.abs(table.y - float(predicted_diameter)) / dia_sd
        if dia_sd > 0
        else np.zeros(table.n)
    )
    score = weight * _minmax(param_dist) + (1.0 - weight) * _minmax(dia_dist)
    k_eff = min(k, table.n)
    top = np.argsort(score, kind="stable")[:k_eff]

    groups: dict[tuple[str, str, str], list[int]] = {}
    for i in top:
        rec = table.records[int(i)]
        triplet = (rec.solvent1, rec.solvent2, rec.solvent3)
        groups.setdefault(triplet, []).append(int(i))

    def group_key(item):
        triplet, members = item
        return (-len(members), float(score[members].sum()), triplet)

    winner, members = sorted(groups.items(), key=group_key)[0]
    ratios = []
    for field in ("solvent1_ratio", "solvent2_ratio", "solvent3_ratio"):
        vals = [getattr(table.records[i], field) for i in members]
        vals = [v for v in vals if v is not None]
        ratios.append(float(np.median(vals)) if vals else None)
    return SolventRecommendation(
        solvents=winner,
        median_ratios=tuple(ratios),
        supporting_rows=len(members),
        candidate_indices=tuple(int(i) for i in top),
    )
