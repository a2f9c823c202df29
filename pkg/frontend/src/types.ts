/** Payload shapes of the detection service JSON API. */

export type FieldValue = string | number | boolean | { "@id": string };
export type FieldTable = Record<string, FieldValue[]>;

export interface ScoredPair {
  source_id: string;
  target_id: string;
  similarity: number;
  per_path: Record<string, number>;
  accepted: boolean;
}

export interface QueueItem extends ScoredPair {
  source_fields: FieldTable;
  target_fields: FieldTable;
}

export interface LabelQueue {
  items: QueueItem[];
  threshold: number;
}

export interface MetricsReport {
  true_pos: number;
  false_pos: number;
  false_neg: number;
  true_neg: number;
  precision: number;
  recall: number;
  f1: number;
  labelled_total: number;
  degenerate: boolean;
}

export type StrategyStatus =
  | { state: "idle" }
  | { state: "running"; step: number; total: number; job_id: string }
  | { state: "failed"; reason: string };

export interface PairSummary {
  id: string;
  source_index: string;
  target_index: string;
  config_version: number;
  strategy_status: StrategyStatus;
  labels: number;
  has_results: boolean;
  decision_threshold: number;
}

export interface JobRecord {
  id: string;
  kind: "dd_run" | "strategy";
  pair_id: string;
  status: "queued" | "running" | "done" | "failed";
  created: string;
  finished: string | null;
  error: string | null;
  summary: Record<string, unknown>;
}

export interface AuditEntry {
  config_hash: string;
  config: unknown;
  report: MetricsReport;
  at: string;
}

export interface ResultsPage {
  total: number;
  offset: number;
  items: ScoredPair[];
  threshold: number | null;
}

export interface LabelRecord {
  source_id: string;
  target_id: string;
  is_duplicate: boolean;
  labelled_at: string;
}

export interface StrategyStepSpec {
  heuristic: string;
  target: string;
  options?: Record<string, unknown>;
}
