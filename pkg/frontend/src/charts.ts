// Chart builders that emit SVG strings from payload numbers. The only
// computation here is presentation (binning, scaling, jitter); every value
// drawn comes verbatim from the API payload.

export interface Bin {
  lo: number;
  hi: number;
  count: number;
}

/** Freedman-Diaconis bin width on the combined series; falls back to a
 * single bin for degenerate spreads. */
export function freedmanDiaconisBins(values: number[], maxBins = 60): Bin[] {
  if (values.length === 0) return [];
  const sorted = [...values].sort((a, b) => a - b);
  const lo = sorted[0];
  const hi = sorted[sorted.length - 1];
  if (hi === lo) {
    return [{ lo, hi, count: values.length }];
  }
  const q = (p: number) => {
    const idx = (sorted.length - 1) * p;
    const lower = Math.floor(idx);
    const frac = idx - lower;
    return sorted[lower] * (1 - frac) + sorted[Math.min(lower + 1, sorted.length - 1)] * frac;
  };
  const iqr = q(0.75) - q(0.25);
  let width = (2 * iqr) / Math.cbrt(sorted.length);
  if (!(width > 0)) {
    width = (hi - lo) / Math.min(10, maxBins);
  }
  let nBins = Math.ceil((hi - lo) / width);
  nBins = Math.max(1, Math.min(nBins, maxBins));
  const step = (hi - lo) / nBins;
  const bins: Bin[] = Array.from({ length: nBins }, (_, i) => ({
    lo: lo + i * step,
    hi: lo + (i + 1) * step,
    count: 0,
  }));
  for (const v of sorted) {
    let idx = Math.floor((v - lo) / step);
    if (idx >= nBins) idx = nBins - 1;
    bins[idx].count += 1;
  }
  return bins;
}

const W = 560;
const H = 320;
const PAD = 46;

function esc(text: string): string {
  return text.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

function frame(body: string, width = W, height = H): string {
  return `<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 ${width} ${height}" ` +
    `width="${width}" height="${height}" role="img">${body}</svg>`;
}

function linscale(lo: number, hi: number, a: number, b: number) {
  const span = hi - lo || 1;
  return (v: number) => a + ((v - lo) / span) * (b - a);
}

export function histogramSvg(values: number[], marker: number, markerLabel: string): string {
  const bins = freedmanDiaconisBins(values);
  if (bins.length === 0) return frame(`<text x="20" y="30">no data</text>`);
  const lo = Math.min(bins[0].lo, marker);
  const hi = Math.max(bins[bins.length - 1].hi, marker);
  const maxCount = Math.max(...bins.map((b) => b.count));
  const x = linscale(lo, hi, PAD, W - 10);
  const y = linscale(0, maxCount, H - PAD, 14);
  let body = "";
  for (const bin of bins) {
    const x0 = x(bin.lo);
    const x1 = x(bin.hi);
    const y0 = y(bin.count);
    body += `<rect x="${x0.toFixed(2)}" y="${y0.toFixed(2)}" width="${Math.max(x1 - x0 - 1, 0.5).toFixed(2)}" ` +
      `height="${(H - PAD - y0).toFixed(2)}" fill="#61a5c2"/>`;
  }
  const mx = x(marker);
  body += `<line x1="${mx.toFixed(2)}" y1="12" x2="${mx.toFixed(2)}" y2="${H - PAD}" ` +
    `stroke="#c1121f" stroke-width="2" stroke-dasharray="2,4"/>`;
  body += `<text x="${(mx + 6).toFixed(2)}" y="24" fill="#c1121f" font-size="12">${esc(markerLabel)}</text>`;
  body += `<line x1="${PAD}" y1="${H - PAD}" x2="${W - 10}" y2="${H - PAD}" stroke="#444"/>`;
  body += `<text x="${W / 2}" y="${H - 12}" text-anchor="middle" font-size="12">Predicted fibre diameter (nm)</text>`;
  body += `<text x="14" y="${H / 2}" transform="rotate(-90 14 ${H / 2})" text-anchor="middle" font-size="12">Count</text>`;
  return frame(body);
}

export function scatterSvg(pairs: { observed_nm: number; predicted_nm: number }[]): string {
  if (pairs.length === 0) return frame(`<text x="20" y="30">no data</text>`);
  const all = pairs.flatMap((p) => [p.observed_nm, p.predicted_nm]);
  const lo = Math.min(...all);
  const hi = Math.max(...all);
  const x = linscale(lo, hi, PAD, W - 10);
  const y = linscale(lo, hi, H - PAD, 14);
  let body = `<line x1="${x(lo)}" y1="${y(lo)}" x2="${x(hi)}" y2="${y(hi)}" stroke="#666" stroke-width="1"/>`;
  for (const p of pairs) {
    body += `<circle cx="${x(p.observed_nm).toFixed(2)}" cy="${y(p.predicted_nm).toFixed(2)}" r="3" ` +
      `fill="#2a6f97" fill-opacity="0.55"/>`;
  }
  body += `<text x="${W / 2}" y="${H - 12}" text-anchor="middle" font-size="12">Observed (nm)</text>`;
  body += `<text x="14" y="${H / 2}" transform="rotate(-90 14 ${H / 2})" text-anchor="middle" font-size="12">Predicted (nm)</text>`;
  return frame(body);
}

export function importanceBarsSvg(rows: { feature: string; scaled_score: number }[]): string {
  const top = rows.slice(0, 20);
  if (top.length === 0) return frame(`<text x="20" y="30">no importance scores</text>`);
  const rowH = 22;
  const height = top.length * rowH + 50;
  const labelW = 150;
  const x = linscale(0, 100, labelW, W - 16);
  let body = "";
  top.forEach((row, i) => {
    const yTop = 14 + i * rowH;
    body += `<text x="${labelW - 6}" y="${yTop + 13}" text-anchor="end" font-size="11">${esc(row.feature)}</text>`;
    body += `<rect x="${labelW}" y="${yTop}" width="${(x(row.scaled_score) - labelW).toFixed(2)}" ` +
      `height="${rowH - 6}" fill="#2a6f97"/>`;
    body += `<text x="${(x(row.scaled_score) + 4).toFixed(2)}" y="${yTop + 13}" font-size="10">` +
      `${row.scaled_score.toFixed(1)}</text>`;
  });
  body += `<text x="${(labelW + W - 16) / 2}" y="${height - 10}" text-anchor="middle" font-size="12">` +
    `Importance (scaled 0-100)</text>`;
  return frame(body, W, height);
}

/** Deterministic jitter in (-0.5, 0.5) from the sample index. */
function jitter(i: number): number {
  const x = Math.sin(i * 127.1 + 311.7) * 43758.5453;
  return x - Math.floor(x) - 0.5;
}

export function shapDotPlotSvg(
  cells: { instance: number; feature: string; phi_nm: number }[],
  featureOrder: string[],
): string {
  const feats = featureOrder.slice(0, 6);
  if (feats.length === 0) return frame(`<text x="20" y="30">no attributions</text>`);
  const rowH = 34;
  const height = feats.length * rowH + 56;
  const labelW = 150;
  const values = cells.filter((c) => feats.includes(c.feature));
  const lo = Math.min(0, ...values.map((c) => c.phi_nm));
  const hi = Math.max(0, ...values.map((c) => c.phi_nm));
  const x = linscale(lo, hi, labelW, W - 16);
  let body = `<line x1="${x(0).toFixed(2)}" y1="8" x2="${x(0).toFixed(2)}" y2="${height - 40}" stroke="#999"/>`;
  feats.forEach((feature, row) => {
    const yMid = 20 + row * rowH + rowH / 2;
    body += `<text x="${labelW - 6}" y="${yMid + 4}" text-anchor="end" font-size="11">${esc(feature)}</text>`;
    values
      .filter((c) => c.feature === feature)
      .forEach((c) => {
        const cy = yMid + jitter(c.instance * 7 + row) * (rowH - 12);
        body += `<circle cx="${x(c.phi_nm).toFixed(2)}" cy="${cy.toFixed(2)}" r="2.4" ` +
          `fill="#2a6f97" fill-opacity="0.5"/>`;
      });
  });
  body += `<text x="${(labelW + W - 16) / 2}" y="${height - 12}" text-anchor="middle" font-size="12">` +
    `Attribution to predicted diameter (nm)</text>`;
  return frame(body, W, height);
}

function heatColor(r: number): string {
  // blue (-1) .. white (0) .. red (+1)
  const clamp = Math.max(-1, Math.min(1, r));
  const t = (clamp + 1) / 2;
  const red = Math.round(255 * Math.min(1, 2 * t));
  const blue = Math.round(255 * Math.min(1, 2 * (1 - t)));
  const green = Math.round(255 * (1 - Math.abs(clamp)) * 0.9 + 255 * 0.1 * (1 - Math.abs(clamp)));
  return `rgb(${red},${green},${blue})`;
}

export function heatmapSvg(names: string[], matrix: number[][]): string {
  const n = names.length;
  if (n === 0) return frame(`<text x="20" y="30">no correlations</text>`);
  const cell = 52;
  const labelW = 130;
  const width = labelW + n * cell + 16;
  const height = 40 + n * cell + labelW;
  let body = "";
  for (let i = 0; i < n; i += 1) {
    for (let j = 0; j < n; j += 1) {
      const value = matrix[i][j];
      const xPos = labelW + j * cell;
      const yPos = 30 + i * cell;
      body += `<rect x="${xPos}" y="${yPos}" width="${cell - 2}" height="${cell - 2}" ` +
        `fill="${heatColor(value)}"/>`;
      body += `<text x="${xPos + cell / 2 - 1}" y="${yPos + cell / 2 + 4}" text-anchor="middle" ` +
        `font-size="11" fill="${Math.abs(value) > 0.6 ? "#fff" : "#111"}">${value.toFixed(2)}</text>`;
    }
    body += `<text x="${labelW - 6}" y="${30 + i * cell + cell / 2 + 4}" text-anchor="end" font-size="10">` +
      `${esc(names[i])}</text>`;
  }
  for (let j = 0; j < n; j += 1) {
    const xPos = labelW + j * cell + cell / 2;
    const yPos = 36 + n * cell;
    body += `<text x="${xPos}" y="${yPos}" font-size="10" ` +
      `transform="rotate(45 ${xPos} ${yPos})">${esc(names[j])}</text>`;
  }
  return frame(body, width, height);
}
