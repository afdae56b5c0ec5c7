import { describe, expect, it } from "vitest";

import { initialPanelState, reduce, replay, snapshot } from "../src/reducer.js";
import type { ServiceEvent } from "../src/types.js";

function trialEvent(seq: number, index: number, loss: number | null, modelType = "linear", failed = false): ServiceEvent {
  return {
    seq,
    kind: "trial_completed",
    payload: {
      trial_index: index,
      config: { model_type: modelType, features: {}, hyperparams: {} },
      loss,
      failed,
      origin: "random_init",
      seed: index,
    },
    at: `2026-01-01T00:00:${String(seq).padStart(2, "0")}`,
  };
}

function sampleLog(): ServiceEvent[] {
  return [
    { seq: 0, kind: "stage_change", payload: { stage: "preparing" } },
    { seq: 1, kind: "summary_updated", payload: { data_summary: { n_rows: 960 } } },
    { seq: 2, kind: "stage_change", payload: { stage: "optimizing" } },
    trialEvent(3, 0, 5.0),
    trialEvent(4, 1, 3.0, "mlp"),
    trialEvent(5, 2, null, "gbt", true),
    trialEvent(6, 3, 4.0, "gbt"),
    { seq: 7, kind: "batch_completed", payload: { batch_index: 0, size: 4 } },
    {
      seq: 8,
      kind: "summary_updated",
      payload: {
        total: 4, failed: 1,
        counts_per_type: { linear: 1, mlp: 1, gbt: 2 },
        best_per_type: {}, best_overall: { loss: 3.0, trial_index: 1, config: { model_type: "mlp", features: {}, hyperparams: {} } },
        trend: "improving",
      },
    },
    { seq: 9, kind: "summary_updated", payload: { guidance_applied: [{ kind: "prune_space", exclude_model_types: ["gbt"] }] } },
    {
      seq: 10,
      kind: "agent_message",
      payload: { message: { id: 0, sender: "task_manager", topics: ["user.io"], role_marker: "agent", content: "hello" } },
    },
    { seq: 11, kind: "stage_change", payload: { stage: "deploying" } },
    {
      seq: 12,
      kind: "forecast_ready",
      payload: { index: 0, forecast: { origin_timestamp: "t", horizon: 2, raw: [1, 2], adjusted: [1, 2], applied_rules: [], context: {}, target_timestamps: [] } },
    },
    { seq: 13, kind: "warning", payload: { note: "minor" } },
    { seq: 14, kind: "stage_change", payload: { stage: "done" } },
  ];
}

describe("panel reducer", () => {
  it("accumulates trials and the best-so-far staircase", () => {
    const state = replay(sampleLog());
    expect(state.trials.length).toBe(4);
    expect(state.bestSoFar).toEqual([5.0, 3.0, 3.0, 3.0]);
    expect(state.trials[2].failed).toBe(true);
  });

  it("tracks stage transitions, summaries, guidance, chat, and forecasts", () => {
    const state = replay(sampleLog());
    expect(state.stage).toBe("done");
    expect(state.dataSummary).toEqual({ n_rows: 960 });
    expect(state.summary?.trend).toBe("improving");
    expect(state.guidanceApplied[0][0]).toMatchObject({ kind: "prune_space" });
    expect(state.chat.map((m) => m.content)).toEqual(["hello"]);
    expect(state.forecasts[0].raw).toEqual([1, 2]);
    expect(state.warnings.length).toBe(1);
    expect(state.batchesCompleted).toBe(1);
  });

  it("replaying a recorded log equals the incrementally built state", () => {
    const log = sampleLog();
    const live = initialPanelState();
    for (const event of log) {
      reduce(live, event);
    }
    expect(snapshot(replay(log))).toBe(snapshot(live));
  });

  it("is insensitive to the wall-clock field", () => {
    const log = sampleLog();
    const shifted = log.map((e) => ({ ...e, at: "1999-01-01T00:00:00" }));
    expect(snapshot(replay(shifted))).toBe(snapshot(replay(log)));
  });

  it("drops duplicates after a resume replays overlapping events", () => {
    const log = sampleLog();
    const state = initialPanelState();
    for (const event of log) reduce(state, event);
    // a reconnect replays the tail; nothing may double-count
    for (const event of log.slice(5)) reduce(state, event);
    expect(snapshot(state)).toBe(snapshot(replay(log)));
  });

  it("failed trials carry the previous best forward", () => {
    const log = [trialEvent(0, 0, null, "gbt", true), trialEvent(1, 1, 2.5)];
    const state = replay(log);
    expect(state.bestSoFar[0]).toBe(Number.POSITIVE_INFINITY);
    expect(state.bestSoFar[1]).toBe(2.5);
  });
});
