"""Publication-style report figures rendered to deterministic SVG bytes.

Figures avoid wall-clock state entirely: the SVG date metadata is dropped
and element ids are salted from the run fingerprint, so rebuilding a report
from identical artifacts reproduces identical bytes.
"""

from __future__ import annotations

import io

import matplotlib
import numpy as np

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

ACCENT = "#2a6f97"
ACCENT_SOFT = "#61a5c2"
MARKER = "#c1121f"


def _render(fig, hashsalt: str) -> bytes:
    buf = io.BytesIO()
    with matplotlib.rc_context({"svg.hashsalt": hashsalt, "svg.fonttype": "none"}):
        fig.savefig(buf, format="svg", metadata={"Date": None}, bbox_inches="tight")
    plt.close(fig)
    return buf.getvalue()


def _note_figure(text: str, hashsalt: str) -> bytes:
    fig, ax = plt.subplots(figsize=(6, 3))
    ax.text(0.5, 0.5, text, ha="center", va="center", wrap=True)
    ax.axis("off")
    return _render(fig, hashsalt)


def prediction_distribution_figure(
    oof_predictions, prediction: float, hashsalt: str = ""
) -> bytes:
    """Histogram of cross-validated predictions with a dotted marker at the
    user's predicted value."""
    values = np.asarray(oof_predictions, dtype=float)
    fig, ax = plt.subplots(figsize=(7, 4.2))
    ax.hist(values, bins=30, color=ACCENT_SOFT, edgecolor="white")
    ax.axvline(prediction, color=MARKER, linestyle=":", linewidth=2)
    ax.annotate(
        f"Your prediction = {prediction:.3f}",
        xy=(prediction, ax.get_ylim()[1] * 0.95),
        xytext=(5, 0), textcoords="offset points",
        color=MARKER, fontsize=9, va="top",
    )
    ax.set_xlabel("Predicted fibre diameter (nm)")
    ax.set_ylabel("Count")
    ax.set_title("Distribution of predicted diameters")
    return _render(fig, hashsalt)


def predicted_vs_observed_figure(observed, predicted, hashsalt: str = "") -> bytes:
    """Held-out predictions against measurements with a unity line."""
    obs = np.asarray(observed, dtype=float)
    pred = np.asarray(predicted, dtype=float)
    fig, ax = plt.subplots(figsize=(5.4, 5.4))
    ax.scatter(obs, pred, s=14, alpha=0.6, color=ACCENT, edgecolors="none")
    lo = float(min(obs.min(), pred.min()))
    hi = float(max(obs.max(), pred.max()))
    pad = 0.03 * (hi - lo if hi > lo else 1.0)
    ax.plot([lo - pad, hi + pad], [lo - pad, hi + pad], color="0.35", linewidth=1)
    ax.set_xlabel("Observed fibre diameter (nm)")
    ax.set_ylabel("Predicted fibre diameter (nm)")
    ax.set_title("Predicted vs observed (out-of-fold)")
    ax.set_aspect("equal", adjustable="box")
    return _render(fig, hashsalt)


def importance_figure(importance, hashsalt: str = "") -> bytes:
    """Horizontal bars for up to the top 20 features."""
    top = importance.top(20)
    if not top.features:
        return _note_figure("No importance scores available", hashsalt)
    fig, ax = plt.subplots(figsize=(7, 0.45 * len(top.features) + 1.4))
    ypos = np.arange(len(top.features))[::-1]
    ax.barh(ypos, top.scaled_scores, color=ACCENT)
    ax.set_yticks(ypos)
    ax.set_yticklabels(top.features, fontsize=9)
    ax.set_xlabel("Importance (scaled 0-100)")
    ax.set_title("Variable importance")
    return _render(fig, hashsalt)


def shap_summary_figure(shap, hashsalt: str = "", seed: int = 0) -> bytes:
    """Jittered dot plot of attributions for the six most influential
    features, ordered by mean absolute attribution."""
    feats = shap.top_features(6)
    if not feats:
        return _note_figure("No SHAP attributions available", hashsalt)
    rng = np.random.default_rng(seed)
    fig, ax = plt.subplots(figsize=(7, 0.6 * len(feats) + 1.4))
    for row, feat in enumerate(reversed(feats)):
        j = shap.features.index(feat)
        values = shap.phi[:, j]
        jitter = rng.uniform(-0.18, 0.18, size=len(values))
        ax.scatter(values, np.full(len(values), row) + jitter,
                   s=10, alpha=0.55, color=ACCENT, edgecolors="none")
    ax.axvline(0.0, color="0.4", linewidth=0.8)
    ax.set_yticks(range(len(feats)))
    ax.set_yticklabels(list(reversed(feats)), fontsize=9)
    ax.set_xlabel("Attribution to predicted diameter (nm)")
    ax.set_title("SHAP summary (top 6 features)")
    return _render(fig, hashsalt)


def correlation_heatmap_figure(corr, hashsalt: str = "") -> bytes:
    """Annotated correlation heat map over predictors and the target."""
    names = corr.names
    mat = corr.matrix
    fig, ax = plt.subplots(figsize=(1.0 + 0.8 * len(names), 0.9 + 0.7 * len(names)))
    im = ax.imshow(mat, vmin=-1, vmax=1, cmap="RdBu_r")
    ax.set_xticks(range(len(names)))
    ax.set_yticks(range(len(names)))
    ax.set_xticklabels(names, rotation=45, ha="right", fontsize=8)
    ax.set_yticklabels(names, fontsize=8)
    for i in range(len(names)):
        for j in range(len(names)):
            ax.text(j, i, f"{mat[i, j]:.2f}", ha="center", va="center",
                    fontsize=7, color="black" if abs(mat[i, j]) < 0.6 else "white")
    fig.colorbar(im, ax=ax, shrink=0.8, label="Pearson r")
    ax.set_title("Correlation matrix")
    return _render(fig, hashsalt)
