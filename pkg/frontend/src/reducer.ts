/**
 * Panel state as a pure fold over the service's event stream.
 *
 * Everything shown on the dashboard derives from events (or plain HTTP
 * responses); nothing here recomputes a loss. Replaying a recorded event log
 * must land on exactly the state a live run produced, so the reducer ignores
 * wall-clock fields and depends only on (seq, kind, payload).
 */

import type {
  AgentMessagePayload,
  DataSummary,
  ForecastPayload,
  ServiceEvent,
  TrialRecord,
  TrialSummary,
} from "./types.js";

export interface TrialPoint {
  index: number;
  loss: number | null;
  failed: boolean;
  modelType: string;
  origin: string;
}

export interface PanelState {
  stage: string;
  lastSeq: number;
  trials: TrialPoint[];
  bestSoFar: number[];
  batchesCompleted: number;
  summary: TrialSummary | null;
  dataSummary: DataSummary | null;
  guidanceApplied: Record<string, unknown>[][];
  chat: AgentMessagePayload[];
  agentFeed: AgentMessagePayload[];
  forecasts: ForecastPayload[];
  warnings: string[];
  errors: string[];
}

export function initialPanelState(): PanelState {
  return {
    stage: "created",
    lastSeq: -1,
    trials: [],
    bestSoFar: [],
    batchesCompleted: 0,
    summary: null,
    dataSummary: null,
    guidanceApplied: [],
    chat: [],
    agentFeed: [],
    forecasts: [],
    warnings: [],
    errors: [],
  };
}

function reduceTrial(state: PanelState, record: TrialRecord): void {
  const point: TrialPoint = {
    index: record.trial_index,
    loss: record.loss,
    failed: record.failed,
    modelType: record.config.model_type,
    origin: record.origin,
  };
  state.trials.push(point);
  const previous = state.bestSoFar.length
    ? state.bestSoFar[state.bestSoFar.length - 1]
    : Number.POSITIVE_INFINITY;
  const candidate = record.failed || record.loss === null ? previous : record.loss;
  state.bestSoFar.push(Math.min(previous, candidate));
}

function reduceAgentMessage(state: PanelState, message: AgentMessagePayload): void {
  state.agentFeed.push(message);
  if (message.topics.includes("user.io")) {
    state.chat.push(message);
  }
}

/** Apply one event. Returns the same (mutated) state object. */
export function reduce(state: PanelState, event: ServiceEvent): PanelState {
  if (event.seq <= state.lastSeq) {
    return state; // replayed duplicate after a resume
  }
  state.lastSeq = event.seq;
  const payload = event.payload as Record<string, unknown>;
  switch (event.kind) {
    case "stage_change":
      state.stage = String(payload.stage ?? state.stage);
      break;
    case "trial_completed":
      reduceTrial(state, payload as unknown as TrialRecord);
      break;
    case "batch_completed":
      state.batchesCompleted += 1;
      break;
    case "summary_updated":
      if (payload.guidance_applied) {
        state.guidanceApplied.push(payload.guidance_applied as Record<string, unknown>[]);
      } else if (payload.data_summary) {
        state.dataSummary = payload.data_summary as unknown as DataSummary;
      } else {
        state.summary = payload as unknown as TrialSummary;
      }
      break;
    case "agent_message":
      reduceAgentMessage(state, (payload.message ?? payload) as unknown as AgentMessagePayload);
      break;
    case "forecast_ready": {
      const index = Number(payload.index ?? state.forecasts.length);
      state.forecasts[index] = payload.forecast as unknown as ForecastPayload;
      break;
    }
    case "warning":
      state.warnings.push(JSON.stringify(payload));
      break;
    case "error":
      state.errors.push(JSON.stringify(payload));
      break;
  }
  return state;
}

/** Fold a full event log from scratch. */
export function replay(events: ServiceEvent[]): PanelState {
  const state = initialPanelState();
  for (const event of events) {
    reduce(state, event);
  }
  return state;
}

/** Canonical snapshot for equality checks (stable key order, no volatile fields). */
export function snapshot(state: PanelState): string {
  const ordered = {
    stage: state.stage,
    lastSeq: state.lastSeq,
    trials: state.trials,
    bestSoFar: state.bestSoFar,
    batchesCompleted: state.batchesCompleted,
    summary: state.summary,
    dataSummary: state.dataSummary,
    guidanceApplied: state.guidanceApplied,
    chat: state.chat.map((m) => ({ sender: m.sender, role: m.role_marker, content: m.content })),
    agentFeed: state.agentFeed.map((m) => ({ sender: m.sender, role: m.role_marker, content: m.content })),
    forecasts: state.forecasts,
    warnings: state.warnings,
    errors: state.errors,
  };
  return JSON.stringify(ordered);
}
