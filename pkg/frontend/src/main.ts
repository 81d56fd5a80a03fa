// Console wiring: capabilities load, form gating, submit with WAIT state,
// polling, tab rendering.

import { ApiClient } from "./api.js";
import { emptyForm, formValid, NUMERIC_FIELDS, toSubmission } from "./state.js";
import { renderResultsTab, renderStatusTab } from "./render.js";
import type { RunResult, RunStatus } from "./types.js";

const FIELD_LABELS: Record<string, string> = {
  concentration: "Solution concentration",
  needle_diameter: "Needle diameter (g)",
  rotation_speed: "Rotation speed",
  voltage: "Voltage (kV)",
  flow_rate: "Flow rate (ml/h)",
  distance: "Distance (cm)",
};

export async function boot(root: HTMLElement, api = new ApiClient("")): Promise<void> {
  const form = emptyForm();
  let lastStatus: RunStatus | null = null;
  let lastResult: RunResult | null = null;
  let activeTab: "status" | "results" = "status";

  root.innerHTML = `
    <header><h1>fibredist console</h1>
      <p class="tip">Tip: Choose a model, fill all numeric fields, then click 'Run prediction'.</p>
    </header>
    <div class="layout">
      <aside class="controls" data-role="controls"></aside>
      <main>
        <nav class="tabs">
          <button data-tab="status" class="active">STATUS</button>
          <button data-tab="results">PREDICTION &amp; METRICS</button>
        </nav>
        <div data-role="tab-status"></div>
        <div data-role="tab-results" hidden></div>
      </main>
    </div>`;

  const controls = root.querySelector<HTMLElement>("[data-role=controls]")!;
  const statusEl = root.querySelector<HTMLElement>("[data-role=tab-status]")!;
  const resultsEl = root.querySelector<HTMLElement>("[data-role=tab-results]")!;

  const caps = await api.capabilities();
  form.polymer = caps.polymers[0] ?? "";
  form.model = caps.models[0]?.kind ?? "";

  function renderControls(): void {
    const numericInputs = NUMERIC_FIELDS.map((f) => `
      <label>${FIELD_LABELS[f]}:
        <input type="text" inputmode="decimal" data-field="${f}" value="${form.numeric[f]}">
      </label>`).join("");
    controls.innerHTML = `
      <label>Polymer:
        <select data-field="polymer">${caps.polymers.map((p) =>
          `<option ${p === form.polymer ? "selected" : ""}>${p}</option>`).join("")}</select>
      </label>
      <label>Collector type:
        <input type="text" data-field="collector_type" value="${form.collector_type}">
      </label>
      ${numericInputs}
      <label>Model:
        <select data-field="model">${caps.models.map((m) =>
          `<option value="${m.kind}" ${m.kind === form.model ? "selected" : ""}>${m.kind}</option>`).join("")}</select>
      </label>
      <label>Seed:
        <input type="text" data-field="seed" value="${form.seed}">
      </label>
      <button data-role="run" ${formValid(form) ? "" : "disabled"}>Run prediction</button>
      <p class="models-note">Available models on this server: ${caps.models.map((m) => m.kind).join(", ")}</p>`;
    controls.querySelectorAll<HTMLInputElement | HTMLSelectElement>("[data-field]").forEach((input) => {
      input.addEventListener("input", () => {
        const field = input.getAttribute("data-field")!;
        if ((NUMERIC_FIELDS as readonly string[]).includes(field)) {
          form.numeric[field as (typeof NUMERIC_FIELDS)[number]] = input.value;
        } else if (field === "polymer" || field === "collector_type" || field === "model" || field === "seed") {
          form[field] = input.value;
        }
        const run = controls.querySelector<HTMLButtonElement>("[data-role=run]")!;
        run.disabled = !formValid(form);
      });
    });
    controls.querySelector<HTMLButtonElement>("[data-role=run]")!.addEventListener("click", () => {
      void submit();
    });
  }

  function renderTabs(): void {
    renderStatusTab(statusEl, lastStatus, lastResult);
    renderResultsTab(resultsEl, lastResult,
      lastResult ? api.reportUrl(lastResult.run_id) : null);
    statusEl.hidden = activeTab !== "status";
    resultsEl.hidden = activeTab !== "results";
    root.querySelectorAll<HTMLButtonElement>("[data-tab]").forEach((b) => {
      b.classList.toggle("active", b.getAttribute("data-tab") === activeTab);
    });
  }

  root.querySelectorAll<HTMLButtonElement>("[data-tab]").forEach((button) => {
    button.addEventListener("click", () => {
      activeTab = button.getAttribute("data-tab") as "status" | "results";
      renderTabs();
    });
  });

  async function submit(): Promise<void> {
    if (!formValid(form)) return;
    form.runInFlight = true;
    lastResult = null;
    lastStatus = { run_id: "", state: "QUEUED", message: "queued", progress: "" };
    renderControls();
    renderTabs();
    try {
      const runId = await api.submitRun(toSubmission(form));
      form.lastRunId = runId;
      const final = await api.pollUntilDone(runId, (status) => {
        lastStatus = status;
        renderTabs();
      });
      lastStatus = final;
      if (final.state === "DONE") {
        lastResult = await api.result(runId);
        activeTab = "results";
      }
    } catch (err) {
      lastStatus = {
        run_id: form.lastRunId ?? "",
        state: "FAILED",
        message: err instanceof Error ? err.message : String(err),
        progress: "",
      };
      activeTab = "status";
    } finally {
      form.runInFlight = false;
      renderControls();
      renderTabs();
    }
  }

  renderControls();
  renderTabs();
}

declare global {
  interface Window {
    __fibredist_boot?: typeof boot;
  }
}

if (typeof document !== "undefined" && document.getElementById("app")) {
  void boot(document.getElementById("app") as HTMLElement);
}
if (typeof window !== "undefined") {
  window.__fibredist_boot = boot;
}
