// Thin API client with submit-and-poll support. The fetch function is
// injectable so tests can replay recorded fixtures.

import type { Capabilities, RunResult, RunStatus } from "./types.js";

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export interface RunSubmission {
  polymer: string;
  collector_type: string;
  concentration: number;
  needle_diameter: number;
  rotation_speed: number;
  voltage: number;
  flow_rate: number;
  distance: number;
  model: string;
  seed: number;
}

export class ApiError extends Error {
  code: string;

  constructor(code: string, message: string) {
    super(message);
    this.code = code;
  }
}

async function decode<T>(response: Response): Promise<T> {
  const body = await response.json().catch(() => null);
  if (!response.ok) {
    const err = body && body.error ? body.error : { code: "http_error", message: `HTTP ${response.status}` };
    throw new ApiError(err.code, err.message);
  }
  return body as T;
}

export class ApiClient {
  base: string;
  fetchFn: FetchLike;
  pollIntervalMs: number;
  pollBackoff: number;
  maxPollIntervalMs: number;

  constructor(base = "", fetchFn: FetchLike = (u, i) => fetch(u, i),
              pollIntervalMs = 1000, pollBackoff = 1.5, maxPollIntervalMs = 8000) {
    this.base = base.replace(/\/$/, "");
    this.fetchFn = fetchFn;
    this.pollIntervalMs = pollIntervalMs;
    this.pollBackoff = pollBackoff;
    this.maxPollIntervalMs = maxPollIntervalMs;
  }

  capabilities(): Promise<Capabilities> {
    return this.fetchFn(`${this.base}/api/capabilities`).then((r) => decode<Capabilities>(r));
  }

  async submitRun(body: RunSubmission): Promise<string> {
    const response = await this.fetchFn(`${this.base}/api/runs`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
    const data = await decode<{ run_id: string }>(response);
    return data.run_id;
  }

  status(runId: string): Promise<RunStatus> {
    return this.fetchFn(`${this.base}/api/runs/${runId}/status`).then((r) => decode<RunStatus>(r));
  }

  result(runId: string): Promise<RunResult> {
    return this.fetchFn(`${this.base}/api/runs/${runId}/result`).then((r) => decode<RunResult>(r));
  }

  reportUrl(runId: string): string {
    return `${this.base}/api/runs/${runId}/report`;
  }

  async downloadReport(runId: string): Promise<Blob> {
    const response = await this.fetchFn(this.reportUrl(runId));
    if (!response.ok) {
      throw new ApiError("report_unavailable", `HTTP ${response.status}`);
    }
    return response.blob();
  }

  /** Poll until DONE or FAILED; the interval backs off from 1s and every
   * intermediate state is reported through onTick. */
  async pollUntilDone(
    runId: string,
    onTick: (status: RunStatus) => void,
    sleep: (ms: number) => Promise<void> = (ms) => new Promise((res) => setTimeout(res, ms)),
    maxPolls = 600,
  ): Promise<RunStatus> {
    let interval = this.pollIntervalMs;
    for (let i = 0; i < maxPolls; i += 1) {
      const status = await this.status(runId);
      onTick(status);
      if (status.state === "DONE" || status.state === "FAILED") {
        return status;
      }
      await sleep(interval);
      interval = Math.min(interval * this.pollBackoff, this.maxPollIntervalMs);
    }
    throw new ApiError("poll_timeout", `run ${runId} did not finish`);
  }
}
