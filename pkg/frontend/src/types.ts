/** Wire types mirroring the service's request/response payloads. */

export interface Configuration {
  model_type: string;
  features: Record<string, unknown>;
  hyperparams: Record<string, unknown>;
}

export interface TrialRecord {
  trial_index: number;
  config: Configuration;
  loss: number | null;
  failed: boolean;
  origin: "random_init" | "acquisition" | "user_injected";
  seed: number;
  error?: string | null;
}

export interface TrialSummary {
  total: number;
  failed: number;
  counts_per_type: Record<string, number>;
  best_per_type: Record<string, { loss: number; trial_index: number; config: Configuration }>;
  best_overall: { loss: number; trial_index: number; config: Configuration } | null;
  trend: "improving" | "flat";
}

export interface DataSummary {
  per_column: Record<string, { min: number; max: number; mean: number; std: number }>;
  missing_before_cleaning: Record<string, number>;
  hourly_profile: number[];
  weekly_profile: number[];
  n_rows: number;
  start: string;
  end: string;
}

export interface ForecastPayload {
  origin_timestamp: string;
  horizon: number;
  raw: number[];
  adjusted: number[];
  applied_rules: Record<string, unknown>[];
  context: Record<string, number[]>;
  target_timestamps: string[];
}

export interface AgentMessagePayload {
  id: number;
  sender: string;
  topics: string[];
  role_marker: "user" | "agent" | "tool" | "system";
  content: string;
  reply_to?: number | null;
}

export type EventKind =
  | "stage_change"
  | "trial_completed"
  | "batch_completed"
  | "summary_updated"
  | "agent_message"
  | "forecast_ready"
  | "warning"
  | "error";

/** One record of the server-sent event stream. */
export interface ServiceEvent {
  seq: number;
  kind: EventKind;
  payload: Record<string, unknown>;
  at?: string;
}

export interface GuidanceDirective {
  kind: "prune_space" | "allocate" | "inject";
  exclude_model_types?: string[];
  restrict?: Record<string, Record<string, { low?: number; high?: number; choices?: unknown[] }>>;
  counts?: Record<string, number>;
  configs?: Partial<Configuration>[];
}

export interface PostprocessRulePayload {
  kind: "manual_override" | "time_scaling" | "load_scaling" | "external_scaling";
  hours?: number[];
  override_values?: number[];
  factor?: number;
  threshold?: number;
  direction?: "above" | "below";
  external_role?: string;
  note?: string;
}
