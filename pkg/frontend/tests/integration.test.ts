/**
 * End-to-end acceptance against a live service process:
 *  - the reducer's live-built state equals a replay of the recorded event log;
 *  - a guidance form submission shows up as a directive honored by the
 *    subsequent batch (an injected configuration appears verbatim in the
 *    ledger with origin "user_injected").
 *
 * Runs when LOADLOOP_INTEGRATION=1 (spawns python + uvicorn).
 */

import { spawn, spawnSync, type ChildProcess } from "node:child_process";
import { mkdtempSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { LoadloopClient } from "../src/api.js";
import { injectForm } from "../src/guidance.js";
import { initialPanelState, reduce, replay, snapshot } from "../src/reducer.js";
import { EventStream, parseSSE } from "../src/sse.js";
import type { ServiceEvent, TrialRecord } from "../src/types.js";

const enabled = process.env.LOADLOOP_INTEGRATION === "1";
const suite = enabled ? describe : describe.skip;

const PORT = 8765 + Math.floor(Math.random() * 200);
const BASE = `http://127.0.0.1:${PORT}`;

let server: ChildProcess | null = null;

async function waitForServer(): Promise<void> {
  for (let i = 0; i < 100; i++) {
    try {
      const r = await fetch(`${BASE}/docs`);
      if (r.ok) return;
    } catch {
      // not up yet
    }
    await new Promise((resolve) => setTimeout(resolve, 300));
  }
  throw new Error("service did not come up");
}

suite("live service integration", () => {
  const workdir = mkdtempSync(join(tmpdir(), "loadloop-ui-"));
  const csvPath = join(workdir, "data.csv");
  const client = new LoadloopClient(BASE);

  beforeAll(async () => {
    const synth = spawnSync("python3", ["-m", "loadloop.cli", "synth", "--out", csvPath, "--days", "40", "--seed", "3"]);
    if (synth.status !== 0) {
      throw new Error(`synth failed: ${synth.stderr}`);
    }
    server = spawn(
      "python3",
      [
        "-c",
        `from loadloop.service.app import create_app\nimport uvicorn\nuvicorn.run(create_app(data_dir=${JSON.stringify(join(workdir, "sessions"))}), host="127.0.0.1", port=${PORT}, log_level="warning")`,
      ],
      { stdio: ["ignore", "inherit", "inherit"] },
    );
    await waitForServer();
  }, 60_000);

  afterAll(() => {
    server?.kill();
  });

  it("runs the full flow; replayed events equal the live panel state; injected guidance lands in the ledger", async () => {
    const sessionId = await client.createSession();

    // live reducer fed by the resumable stream
    const live = initialPanelState();
    const stream = new EventStream(BASE, sessionId, {
      onEvent: (event) => void reduce(live, event),
    });

    const csvText = await (await import("node:fs/promises")).readFile(csvPath, "utf-8");
    const proposal = await client.uploadDataset(sessionId, csvText);
    expect(proposal.assignments["load"]).toBe("load");
    await client.confirmSemantics(sessionId, proposal.assignments);
    await client.setTask(sessionId, 24, 1);
    const cleaned = await client.clean(sessionId);
    expect(cleaned.data_summary.n_rows).toBeGreaterThan(900);
    await client.setMetric(sessionId, { base: "absolute", kind: "plain" });

    await client.optimize(sessionId, {
      max_trials: 14,
      init_samples: 4,
      batch_size: 5,
      seed: 11,
      split_ratios: [0.6, 0.2, 0.2],
    });

    // guidance drawer: inject an exact configuration while the search runs
    const injected = injectForm(
      "linear",
      { calendar: "none", temp_lags: "none", interaction: "none", load_lags: "fixed", other_features: "none" },
      { regularization: "none" },
    );
    const queued = await client.sendGuidance(sessionId, { directives: [injected] });
    expect(queued.queued.length).toBe(1);

    // pump the live stream until the session finishes optimizing
    const deadline = Date.now() + 240_000;
    for (;;) {
      await stream.runOnce(false);
      const state = await client.sessionState(sessionId);
      if (state.stage === "deploying" || state.stage === "done") break;
      if (Date.now() > deadline) throw new Error("optimization did not finish in time");
      await new Promise((resolve) => setTimeout(resolve, 500));
    }

    await client.deploy(sessionId);
    await stream.runOnce(false); // drain deployment events
    expect(live.stage).toBe("done");
    expect(live.forecasts.length).toBe(1);

    // [criterion] replaying the recorded event log reproduces the live state
    const replayText = await (await fetch(`${BASE}/sessions/${sessionId}/events`)).text();
    const recorded: ServiceEvent[] = parseSSE(replayText + "\n\n").events;
    expect(recorded.length).toBe(live.lastSeq + 1);
    expect(snapshot(replay(recorded))).toBe(snapshot(live));

    // [criterion] the injected configuration appears in a subsequent batch's
    // ledger with the user_injected origin and the exact submitted values
    const ledger = (await client.trials(sessionId)).trials;
    const injectedTrials = ledger.filter((t: TrialRecord) => t.origin === "user_injected");
    expect(injectedTrials.length).toBe(1);
    expect(injectedTrials[0].config.model_type).toBe("linear");
    expect(injectedTrials[0].config.features).toMatchObject({ load_lags: "fixed" });
    expect(injectedTrials[0].config.hyperparams).toMatchObject({ regularization: "none" });
    expect(injectedTrials[0].trial_index).toBeGreaterThanOrEqual(4);

    // the dashboard data reached the reducer too
    expect(live.trials.length).toBe(ledger.length);
    expect(live.bestSoFar.length).toBe(ledger.length);
    const finite = live.bestSoFar.filter((v) => Number.isFinite(v));
    expect(finite[finite.length - 1]).toBeCloseTo(
      Math.min(...ledger.filter((t) => !t.failed).map((t) => t.loss as number)),
      10,
    );
  }, 300_000);
});
