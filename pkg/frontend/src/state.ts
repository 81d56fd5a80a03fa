// Form state: the run button stays disabled until every numeric field
// parses, and identical forms produce identical request payloads.

import type { RunSubmission } from "./api.js";

export const NUMERIC_FIELDS = [
  "concentration",
  "needle_diameter",
  "rotation_speed",
  "voltage",
  "flow_rate",
  "distance",
] as const;

export type NumericField = (typeof NUMERIC_FIELDS)[number];

export interface FormState {
  polymer: string;
  collector_type: string;
  model: string;
  seed: string;
  numeric: Record<NumericField, string>;
  runInFlight: boolean;
  lastRunId: string | null;
}

export function emptyForm(): FormState {
  return {
    polymer: "",
    collector_type: "",
    model: "",
    seed: "42",
    numeric: {
      concentration: "",
      needle_diameter: "",
      rotation_speed: "",
      voltage: "",
      flow_rate: "",
      distance: "",
    },
    runInFlight: false,
    lastRunId: null,
  };
}

export function parseNumericField(text: string): number | null {
  const trimmed = text.trim();
  if (trimmed === "") return null;
  const value = Number(trimmed);
  if (!Number.isFinite(value) || value < 0) return null;
  return value;
}

export function invalidFields(form: FormState): NumericField[] {
  return NUMERIC_FIELDS.filter((f) => parseNumericField(form.numeric[f]) === null);
}

export function formValid(form: FormState): boolean {
  return (
    form.polymer !== "" &&
    form.model !== "" &&
    !form.runInFlight &&
    invalidFields(form).length === 0
  );
}

export function toSubmission(form: FormState): RunSubmission {
  if (invalidFields(form).length > 0) {
    throw new Error("form has unparsed numeric fields");
  }
  const seed = parseNumericField(form.seed);
  return {
    polymer: form.polymer,
    collector_type: form.collector_type,
    model: form.model,
    seed: seed === null ? 42 : Math.trunc(seed),
    concentration: parseNumericField(form.numeric.concentration) as number,
    needle_diameter: parseNumericField(form.numeric.needle_diameter) as number,
    rotation_speed: parseNumericField(form.numeric.rotation_speed) as number,
    voltage: parseNumericField(form.numeric.voltage) as number,
    flow_rate: parseNumericField(form.numeric.flow_rate) as number,
    distance: parseNumericField(form.numeric.distance) as number,
  };
}

/** Stable key of the request payload; reloading an identical form must
 * reproduce it. */
export function requestKey(form: FormState): string {
  const body = toSubmission(form);
  const keys = Object.keys(body).sort() as (keyof RunSubmission)[];
  return keys.map((k) => `${k}=${JSON.stringify(body[k])}`).join("&");
}
