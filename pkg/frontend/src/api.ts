/** Typed client for the loadloop HTTP API. */

import type {
  DataSummary,
  GuidanceDirective,
  ForecastPayload,
  PostprocessRulePayload,
  TrialRecord,
  TrialSummary,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: string,
  ) {
    super(`HTTP ${status}: ${detail}`);
  }
}

async function check<T>(response: Response): Promise<T> {
  if (!response.ok) {
    let detail = response.statusText;
    try {
      const body = (await response.json()) as { detail?: unknown };
      detail = typeof body.detail === "string" ? body.detail : JSON.stringify(body.detail);
    } catch {
      // non-JSON error body
    }
    throw new ApiError(response.status, detail);
  }
  return (await response.json()) as T;
}

export class LoadloopClient {
  constructor(readonly baseUrl: string) {}

  private url(path: string): string {
    return `${this.baseUrl}${path}`;
  }

  private async post<T>(path: string, body?: unknown): Promise<T> {
    return check<T>(
      await fetch(this.url(path), {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: body === undefined ? undefined : JSON.stringify(body),
      }),
    );
  }

  private async put<T>(path: string, body: unknown): Promise<T> {
    return check<T>(
      await fetch(this.url(path), {
        method: "PUT",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify(body),
      }),
    );
  }

  private async get<T>(path: string): Promise<T> {
    return check<T>(await fetch(this.url(path)));
  }

  async createSession(): Promise<string> {
    const body = await this.post<{ session_id: string }>("/sessions");
    return body.session_id;
  }

  sessionState(id: string): Promise<{ session_id: string; stage: string; detail: Record<string, unknown> }> {
    return this.get(`/sessions/${id}`);
  }

  async uploadDataset(id: string, csvText: string): Promise<{ assignments: Record<string, string> }> {
    return check(
      await fetch(this.url(`/sessions/${id}/dataset`), {
        method: "POST",
        headers: { "Content-Type": "text/csv" },
        body: csvText,
      }),
    );
  }

  confirmSemantics(id: string, assignments: Record<string, string>) {
    return this.put<{ assignments: Record<string, string> }>(`/sessions/${id}/semantics`, { assignments });
  }

  setTask(id: string, intervalDelta: number, horizon: number) {
    return this.put<Record<string, unknown>>(`/sessions/${id}/task`, {
      interval_delta: intervalDelta,
      horizon,
    });
  }

  clean(id: string) {
    return this.post<{ cleaning_report: Record<string, unknown>; data_summary: DataSummary }>(
      `/sessions/${id}/clean`,
    );
  }

  setMetric(id: string, metric: Record<string, unknown>) {
    return this.put<Record<string, unknown>>(`/sessions/${id}/metric`, metric);
  }

  optimize(
    id: string,
    settings: {
      max_trials: number;
      init_samples: number;
      batch_size: number;
      epsilon?: number | null;
      seed?: number;
      split_ratios?: number[];
    },
  ) {
    return this.post<Record<string, unknown>>(`/sessions/${id}/optimize`, settings);
  }

  sendGuidance(id: string, payload: { text?: string; directives?: GuidanceDirective[] }) {
    return this.post<{ queued: GuidanceDirective[]; clarification: string | null }>(
      `/sessions/${id}/guidance`,
      payload,
    );
  }

  trials(id: string) {
    return this.get<{ trials: TrialRecord[] }>(`/sessions/${id}/trials`);
  }

  summary(id: string) {
    return this.get<{ summary: TrialSummary; rendered: string; best_so_far: number[] }>(
      `/sessions/${id}/summary`,
    );
  }

  importance(id: string, modelType: string) {
    return this.get<{ model_type: string; importances: [string, number][] }>(
      `/sessions/${id}/importance/${modelType}`,
    );
  }

  best(id: string) {
    return this.get<{
      config: Record<string, unknown>;
      loss: number;
      trial_index: number;
      train_curve: number[];
      val_curve: number[];
    }>(`/sessions/${id}/best`);
  }

  deploy(id: string, originIndex?: number) {
    return this.post<ForecastPayload & { index: number }>(`/sessions/${id}/deploy`, {
      origin_index: originIndex ?? null,
    });
  }

  postprocess(id: string, rule: PostprocessRulePayload) {
    return this.post<ForecastPayload & { index: number }>(`/sessions/${id}/postprocess`, rule);
  }

  chat(id: string, text: string) {
    return this.post<{ messages: Record<string, unknown>[] }>(`/sessions/${id}/chat`, { text });
  }

  chatTranscript(id: string) {
    return this.get<{ messages: Record<string, unknown>[] }>(`/sessions/${id}/chat`);
  }

  tokens(id: string) {
    return this.get<{ report: Record<string, unknown> }>(`/sessions/${id}/tokens`);
  }

  forecastCsvUrl(id: string, index: number): string {
    return this.url(`/sessions/${id}/forecasts/${index}.csv`);
  }
}
