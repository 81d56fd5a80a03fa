// Tab renderers. Everything shown comes verbatim from the result payload;
// the only client-side math is chart layout.

import { heatmapSvg, histogramSvg, importanceBarsSvg, scatterSvg, shapDotPlotSvg } from "./charts.js";
import type { RunResult, RunStatus } from "./types.js";

function esc(text: string): string {
  return text.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

function fmt(value: number | null | undefined, digits = 4): string {
  if (value === null || value === undefined || Number.isNaN(value)) return "n/a";
  return value.toFixed(digits);
}

export function statusBanner(state: RunStatus["state"]): string {
  if (state === "PROCESSING" || state === "QUEUED") return "WAIT... PROCESSING";
  if (state === "DONE") return "RESULTS IN PREDICTION & METRICS TAB";
  return "RUN FAILED";
}

export function renderStatusTab(el: HTMLElement, status: RunStatus | null, result: RunResult | null): void {
  const parts: string[] = [];
  parts.push(`<section class="panel"><h3>a) Status</h3>`);
  parts.push(`<p class="banner" data-role="state">${esc(status ? statusBanner(status.state) : "Idle")}</p>`);
  if (status && status.state === "FAILED") {
    parts.push(`<p class="error">${esc(status.message)}</p>`);
  }
  parts.push(`</section>`);

  parts.push(`<section class="panel"><h3>b) Solvent recommendation</h3>`);
  if (result) {
    parts.push(`<p data-role="recommendation">${esc(result.recommendation.sentence)}</p>`);
  } else {
    parts.push(`<p class="muted">Run a prediction to see suggestions.</p>`);
  }
  parts.push(`</section>`);

  parts.push(`<section class="panel"><h3>c) Parameters OUT of the observed range</h3>`);
  if (result) {
    const violations = result.range_check.violations;
    if (violations.length === 0) {
      parts.push(`<p class="ok" data-role="range-ok">All parameters are within the observed range for the selected polymer.</p>`);
    } else {
      parts.push(`<table class="table" data-role="range-violations"><thead><tr>` +
        `<th>Parameter</th><th>Value</th><th>Observed min</th><th>Observed max</th></tr></thead><tbody>`);
      for (const v of violations) {
        parts.push(`<tr class="violation"><td>${esc(v.feature)}</td><td>${v.value}</td>` +
          `<td>${v.min}</td><td>${v.max}</td></tr>`);
      }
      parts.push(`</tbody></table>`);
    }
  } else {
    parts.push(`<p class="muted">No run yet.</p>`);
  }
  parts.push(`</section>`);
  el.innerHTML = parts.join("");
}

export function renderResultsTab(el: HTMLElement, result: RunResult | null, reportUrl: string | null): void {
  if (!result) {
    el.innerHTML = `<p class="muted">No results yet. Fill all numeric fields, then click 'Run prediction'.</p>`;
    return;
  }
  const parts: string[] = [];
  const prediction = result.prediction_nm;
  parts.push(`<section class="panel"><h3>a) Prediction</h3>` +
    `<p class="prediction" data-role="prediction">Predicted fibre diameter: ${prediction.toFixed(3)}</p></section>`);

  const series = [...result.oof.map((p) => p.predicted_nm), ...result.realisations_nm];
  parts.push(`<section class="panel"><h3>b) Distribution of predicted diameters</h3>` +
    `<div data-role="histogram">` +
    histogramSvg(series, prediction, `Your prediction = ${prediction.toFixed(3)}`) +
    `</div></section>`);

  const mean = result.metrics.per_fold.mean;
  const sd = result.metrics.per_fold.sd;
  parts.push(`<section class="panel"><h3>c) Model metrics</h3>` +
    `<table class="table" data-role="metrics"><thead><tr><th>RMSE</th><th>MAE</th><th>Rsquared</th></tr></thead>` +
    `<tbody><tr>` +
    `<td>${fmt(mean.rmse)} ± ${fmt(sd.rmse)}</td>` +
    `<td>${fmt(mean.mae)} ± ${fmt(sd.mae)}</td>` +
    `<td>${fmt(mean.r2)} ± ${fmt(sd.r2)}</td>` +
    `</tr></tbody></table></section>`);

  parts.push(`<section class="panel"><h3>d) Coefficients (when available)</h3>`);
  if (result.coefficients && result.coefficients.length) {
    parts.push(`<table class="table" data-role="coefficients"><thead><tr>` +
      `<th>Term</th><th>Estimate</th><th>Std error</th><th>t</th></tr></thead><tbody>`);
    for (const c of result.coefficients) {
      parts.push(`<tr><td>${esc(c.term)}</td><td>${fmt(c.estimate ?? null)}</td>` +
        `<td>${fmt(c.std_error ?? null)}</td><td>${fmt(c.t_stat ?? null)}</td></tr>`);
    }
    parts.push(`</tbody></table>`);
  } else {
    parts.push(`<p class="muted" data-role="coefficients-note">${esc(result.coefficients_note)}</p>`);
  }
  parts.push(`</section>`);

  parts.push(`<section class="panel"><h3>e) Predicted vs observed</h3>` +
    `<div data-role="scatter">${scatterSvg(result.oof)}</div></section>`);

  parts.push(`<section class="panel"><h3>f) Variable importance (top 20)</h3>` +
    `<div data-role="importance">${importanceBarsSvg(result.importance)}</div></section>`);

  parts.push(`<section class="panel"><h3>g) SHAP summary (top 6 features)</h3>` +
    `<div data-role="shap">${shapDotPlotSvg(result.shap.values, result.shap.feature_order)}</div></section>`);

  parts.push(`<section class="panel"><h3>h) Correlation matrix</h3>` +
    `<div data-role="heatmap">${heatmapSvg(result.correlations.names, result.correlations.matrix)}</div></section>`);

  if (reportUrl) {
    parts.push(`<section class="panel"><a class="download" data-role="download" href="${esc(reportUrl)}" ` +
      `download="report_${esc(result.run_id)}.zip">Download Excel-style report bundle</a></section>`);
  }
  el.innerHTML = parts.join("");
}
