// Payload shapes served by the prediction API.

export interface Capabilities {
  polymers: string[];
  models: { kind: string; available: boolean }[];
  dataset_fingerprint: string;
  n_records: number;
}

export interface RunStatus {
  run_id: string;
  state: "QUEUED" | "PROCESSING" | "DONE" | "FAILED";
  message: string;
  progress: string;
}

export interface OofPoint {
  row: number;
  study_id: string;
  observed_nm: number;
  predicted_nm: number;
}

export interface ImportanceRow {
  rank: number;
  feature: string;
  raw_score: number;
  scaled_score: number;
}

export interface ShapCell {
  instance: number;
  feature: string;
  phi_nm: number;
}

export interface CoefficientRow {
  term: string;
  estimate?: number | null;
  std_error?: number | null;
  t_stat?: number | null;
  note?: string;
}

export interface RangeViolation {
  feature: string;
  value: number;
  min: number;
  max: number;
}

export interface RunResult {
  run_id: string;
  polymer: string;
  model: string;
  seed: number;
  inputs: Record<string, number | string>;
  prediction_nm: number;
  realisations_nm: number[];
  metrics: {
    per_fold: {
      mean: Record<string, number | null>;
      sd: Record<string, number | null>;
      n_folds: number;
      r2_missing_folds: number;
    };
    pooled_oof: Record<string, number | null>;
  };
  oof: OofPoint[];
  coefficients: CoefficientRow[] | null;
  coefficients_note: string;
  importance: ImportanceRow[];
  shap: {
    baseline_nm: number;
    sims: number;
    background_rows: number;
    feature_order: string[];
    values: ShapCell[];
  };
  correlations: {
    names: string[];
    matrix: number[][];
    excluded_zero_variance: string[];
  };
  recommendation: {
    solvents: string[];
    median_ratios: (number | null)[];
    sentence: string;
  };
  range_check: {
    violations: RangeViolation[];
    ranges: Record<string, { min: number; max: number }>;
    status: string;
  };
  n_rows: number;
  n_studies: number;
}
