// Console flow against recorded API fixtures: submit, WAIT state, polling,
// results rendering, out-of-range panel, report download.

import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";

import { beforeEach, describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { boot } from "../src/main.js";
import type { RunResult } from "../src/types.js";

const here = dirname(fileURLToPath(import.meta.url));
const fixturesDir = join(here, "..", "fixtures");

const capabilities = JSON.parse(readFileSync(join(fixturesDir, "capabilities.json"), "utf-8"));
const runResult: RunResult = JSON.parse(readFileSync(join(fixturesDir, "run_result.json"), "utf-8"));
const outOfRange: RunResult = JSON.parse(
  readFileSync(join(fixturesDir, "run_result_out_of_range.json"), "utf-8"),
);
const reportBytes = readFileSync(join(fixturesDir, "report.zip"));

function jsonResponse(payload: unknown, status = 200): Response {
  return new Response(JSON.stringify(payload), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}

interface Recorded {
  urls: string[];
  statusPolls: number;
}

function fixtureFetch(result: RunResult, statusSequence: string[], recorded: Recorded) {
  return async (url: string, init?: RequestInit): Promise<Response> => {
    recorded.urls.push(url);
    if (url.endsWith("/api/capabilities")) {
      return jsonResponse(capabilities);
    }
    if (url.endsWith("/api/runs") && init?.method === "POST") {
      return jsonResponse({ run_id: result.run_id });
    }
    if (url.endsWith(`/api/runs/${result.run_id}/status`)) {
      const state = statusSequence[Math.min(recorded.statusPolls, statusSequence.length - 1)];
      recorded.statusPolls += 1;
      return jsonResponse({
        run_id: result.run_id,
        state,
        message: state === "DONE" ? "RESULTS IN PREDICTION & METRICS TAB" : "WAIT... PROCESSING",
        progress: "",
      });
    }
    if (url.endsWith(`/api/runs/${result.run_id}/result`)) {
      return jsonResponse(result);
    }
    if (url.endsWith(`/api/runs/${result.run_id}/report`)) {
      return new Response(new Uint8Array(reportBytes), {
        status: 200,
        headers: { "Content-Type": "application/zip" },
      });
    }
    return jsonResponse({ error: { code: "unknown", message: url } }, 404);
  };
}

async function bootConsole(result: RunResult, statusSequence: string[]) {
  const recorded: Recorded = { urls: [], statusPolls: 0 };
  const api = new ApiClient("", fixtureFetch(result, statusSequence, recorded), 0, 1.0, 0);
  document.body.innerHTML = `<div id="app"></div>`;
  const root = document.getElementById("app") as HTMLElement;
  await boot(root, api);
  return { root, api, recorded };
}

function fillForm(root: HTMLElement, inputs: Record<string, string>) {
  for (const [field, value] of Object.entries(inputs)) {
    const input = root.querySelector<HTMLInputElement>(`[data-field="${field}"]`);
    expect(input, field).toBeTruthy();
    input!.value = value;
    input!.dispatchEvent(new Event("input"));
  }
}

const VALID_INPUTS = {
  concentration: "12",
  needle_diameter: "20",
  rotation_speed: "2000",
  voltage: "25",
  flow_rate: "1",
  distance: "11",
};

async function runToCompletion(result: RunResult, statusSequence: string[]) {
  const ctx = await bootConsole(result, statusSequence);
  fillForm(ctx.root, VALID_INPUTS);
  const runButton = ctx.root.querySelector<HTMLButtonElement>("[data-role=run]")!;
  expect(runButton.disabled).toBe(false);
  runButton.click();
  await new Promise((resolve) => setTimeout(resolve, 50));
  return ctx;
}

describe("console flow", () => {
  beforeEach(() => {
    document.body.innerHTML = "";
  });

  it("run stays disabled until every numeric field parses", async () => {
    const { root } = await bootConsole(runResult, ["DONE"]);
    const runButton = root.querySelector<HTMLButtonElement>("[data-role=run]")!;
    expect(runButton.disabled).toBe(true);
    fillForm(root, { ...VALID_INPUTS, flow_rate: "" });
    expect(runButton.disabled).toBe(true);
    fillForm(root, VALID_INPUTS);
    expect(runButton.disabled).toBe(false);
  });

  it("shows the WAIT state while polling, then renders results", async () => {
    const { root, recorded } = await runToCompletion(
      runResult, ["QUEUED", "PROCESSING", "PROCESSING", "DONE"],
    );
    expect(recorded.statusPolls).toBe(4);  // polling terminated at DONE
    const results = root.querySelector<HTMLElement>("[data-role=tab-results]")!;
    expect(results.hidden).toBe(false);

    const prediction = results.querySelector("[data-role=prediction]")!;
    expect(prediction.textContent).toContain(
      `Predicted fibre diameter: ${runResult.prediction_nm.toFixed(3)}`,
    );
    const histogram = results.querySelector("[data-role=histogram] svg")!;
    expect(histogram.outerHTML).toContain("stroke-dasharray");
    expect(histogram.outerHTML).toContain(`Your prediction = ${runResult.prediction_nm.toFixed(3)}`);

    const metrics = results.querySelector("[data-role=metrics]")!;
    expect(metrics.textContent).toContain("RMSE");
    expect(metrics.textContent).toContain("MAE");
    expect(metrics.textContent).toContain("Rsquared");
    const mean = runResult.metrics.per_fold.mean;
    expect(metrics.textContent).toContain((mean.rmse as number).toFixed(4));

    expect(results.querySelector("[data-role=coefficients]")).toBeTruthy();
    expect(results.querySelector("[data-role=scatter] svg")).toBeTruthy();
    expect(results.querySelector("[data-role=importance] svg")).toBeTruthy();
    expect(results.querySelector("[data-role=shap] svg")).toBeTruthy();
    expect(results.querySelector("[data-role=heatmap] svg")).toBeTruthy();

    const statusTab = root.querySelector<HTMLElement>("[data-role=tab-status]")!;
    expect(statusTab.textContent).toContain(runResult.recommendation.sentence);
    expect(statusTab.textContent).toContain("All parameters are within the observed range");
  });

  it("out-of-range runs show the min/max panel while results still render", async () => {
    const { root } = await runToCompletion(outOfRange, ["PROCESSING", "DONE"]);
    const statusTab = root.querySelector<HTMLElement>("[data-role=tab-status]")!;
    const violations = statusTab.querySelector("[data-role=range-violations]")!;
    expect(violations).toBeTruthy();
    const violation = outOfRange.range_check.violations[0];
    expect(violations.textContent).toContain(violation.feature);
    expect(violations.textContent).toContain(String(violation.min));
    expect(violations.textContent).toContain(String(violation.max));
    const prediction = root.querySelector("[data-role=prediction]")!;
    expect(prediction.textContent).toContain(outOfRange.prediction_nm.toFixed(3));
  });

  it("the download link points at the report endpoint and retrieves the bundle", async () => {
    const { root, api } = await runToCompletion(runResult, ["DONE"]);
    const link = root.querySelector<HTMLAnchorElement>("[data-role=download]")!;
    expect(link.getAttribute("href")).toBe(`/api/runs/${runResult.run_id}/report`);
    const blob = await api.downloadReport(runResult.run_id);
    const head = new Uint8Array(await blob.arrayBuffer()).slice(0, 4);
    expect(Array.from(head)).toEqual([0x50, 0x4b, 0x03, 0x04]);  // zip magic
    expect(blob.size).toBe(reportBytes.length);
  });

  it("a failed run surfaces the server message and keeps the form usable", async () => {
    const recorded: Recorded = { urls: [], statusPolls: 0 };
    const failingFetch = async (url: string, init?: RequestInit): Promise<Response> => {
      recorded.urls.push(url);
      if (url.endsWith("/api/capabilities")) return jsonResponse(capabilities);
      if (url.endsWith("/api/runs") && init?.method === "POST") {
        return jsonResponse({ error: { code: "unknown_polymer", message: "unknown polymer 'PTFE'" } }, 404);
      }
      return jsonResponse({ error: { code: "unknown", message: url } }, 404);
    };
    const api = new ApiClient("", failingFetch, 0, 1.0, 0);
    document.body.innerHTML = `<div id="app"></div>`;
    const root = document.getElementById("app") as HTMLElement;
    await boot(root, api);
    fillForm(root, VALID_INPUTS);
    root.querySelector<HTMLButtonElement>("[data-role=run]")!.click();
    await new Promise((resolve) => setTimeout(resolve, 30));
    const statusTab = root.querySelector<HTMLElement>("[data-role=tab-status]")!;
    expect(statusTab.textContent).toContain("RUN FAILED");
    expect(statusTab.textContent).toContain("unknown polymer");
    expect(root.querySelector<HTMLButtonElement>("[data-role=run]")!.disabled).toBe(false);
  });
});
