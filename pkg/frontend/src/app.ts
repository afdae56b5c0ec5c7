/**
 * Operator console wiring: preparation wizard, optimization dashboard with
 * guidance drawer, deployment view, and the chat pane. All state flows from
 * the HTTP API and the event stream through the panel reducer.
 */

import { LoadloopClient, ApiError } from "./api.js";
import { colorFor, importanceBarsSvg, lineChartSvg, trialScatterSvg } from "./charts.js";
import { allocateForm, injectForm, parseEditorJson, pruneForm } from "./guidance.js";
import { initialPanelState, reduce, type PanelState } from "./reducer.js";
import { EventStream } from "./sse.js";
import type { GuidanceDirective } from "./types.js";

interface AppContext {
  client: LoadloopClient;
  sessionId: string | null;
  state: PanelState;
  stream: EventStream | null;
  batchSize: number;
}

const ctx: AppContext = {
  client: new LoadloopClient(""),
  sessionId: null,
  state: initialPanelState(),
  stream: null,
  batchSize: 10,
};

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function setBanner(text: string, kind: "info" | "error" | "hidden"): void {
  const banner = el<HTMLDivElement>("banner");
  banner.textContent = text;
  banner.className = kind === "hidden" ? "banner hidden" : `banner ${kind}`;
}

function showError(error: unknown): void {
  const text = error instanceof ApiError ? error.message : String(error);
  setBanner(text, "error");
  setTimeout(() => setBanner("", "hidden"), 6000);
}

// ------------------------------------------------------------------ rendering

function renderStage(): void {
  el("stage-label").textContent = ctx.state.stage;
  for (const section of ["wizard", "dashboard", "deployment"]) {
    el(section).classList.remove("active-stage");
  }
  if (["created", "preparing"].includes(ctx.state.stage)) el("wizard").classList.add("active-stage");
  if (ctx.state.stage === "optimizing") el("dashboard").classList.add("active-stage");
  if (["deploying", "done"].includes(ctx.state.stage)) el("deployment").classList.add("active-stage");
}

function renderSummaryCard(): void {
  const card = el("summary-card");
  const s = ctx.state.summary;
  if (!s) {
    card.textContent = "no trials yet";
    return;
  }
  const rows = Object.entries(s.counts_per_type)
    .map(([m, n]) => {
      const best = s.best_per_type[m];
      const badge = `<span class="dot" style="background:${colorFor(m)}"></span>`;
      return `<tr><td>${badge}${m}</td><td>${n}</td><td>${best ? best.loss.toPrecision(5) : "-"}</td></tr>`;
    })
    .join("");
  card.innerHTML =
    `<div>trend: <b>${s.trend}</b>, failed: ${s.failed}` +
    (s.best_overall ? `, best: <b>${s.best_overall.loss.toPrecision(5)}</b>` : "") +
    `</div><table><tr><th>type</th><th>trials</th><th>best</th></tr>${rows}</table>`;
}

function renderScatter(): void {
  el("scatter").innerHTML = trialScatterSvg(ctx.state.trials, ctx.state.bestSoFar);
}

function renderChat(): void {
  const pane = el("chat-log");
  pane.innerHTML = ctx.state.chat
    .map((m) => `<div class="chat-${m.role_marker}"><b>${m.sender}</b>: ${m.content}</div>`)
    .join("");
  pane.scrollTop = pane.scrollHeight;
}

function renderForecast(): void {
  const fc = ctx.state.forecasts[ctx.state.forecasts.length - 1];
  if (!fc) return;
  const series = [
    { name: "raw", values: fc.raw, color: "#94a3b8", dash: "5 3" },
    { name: "adjusted", values: fc.adjusted, color: "#dc2626" },
  ];
  const actual = fc.context["actual_load"];
  if (actual) series.push({ name: "actual", values: actual, color: "#111" });
  const temperature = fc.context["temperature"];
  if (temperature) series.push({ name: "temperature", values: temperature, color: "#16a34a", dash: "2 2" });
  el("forecast-chart").innerHTML = lineChartSvg(series);
  el("rule-log").innerHTML = fc.applied_rules
    .map((r) => `<li><code>${JSON.stringify(r)}</code></li>`)
    .join("");
  if (ctx.sessionId) {
    el<HTMLAnchorElement>("export-link").href = ctx.client.forecastCsvUrl(
      ctx.sessionId,
      ctx.state.forecasts.length - 1,
    );
  }
}

async function renderTokens(): Promise<void> {
  if (!ctx.sessionId) return;
  try {
    const body = await ctx.client.tokens(ctx.sessionId);
    const total = (body.report as { total?: { input_tokens?: number; output_tokens?: number; cost?: number } }).total;
    if (total) {
      el("token-footer").textContent =
        `tokens: ${total.input_tokens ?? 0} in / ${total.output_tokens ?? 0} out, ` +
        `$${(total.cost ?? 0).toFixed(3)}`;
    }
  } catch {
    // footer is best-effort
  }
}

async function refreshImportance(): Promise<void> {
  if (!ctx.sessionId || !ctx.state.summary) return;
  const counts = ctx.state.summary.counts_per_type;
  const eligible = Object.entries(counts).filter(([, n]) => n >= 10);
  if (!eligible.length) return;
  eligible.sort((a, b) => b[1] - a[1]);
  try {
    const body = await ctx.client.importance(ctx.sessionId, eligible[0][0]);
    el("importance-title").textContent = `importance: ${body.model_type}`;
    el("importance").innerHTML = importanceBarsSvg(body.importances);
  } catch {
    // too few completed trials is expected early on
  }
}

function renderAll(): void {
  renderStage();
  renderSummaryCard();
  renderScatter();
  renderChat();
  renderForecast();
}

// ------------------------------------------------------------------- wiring

function onEvent(): void {
  renderAll();
  if (ctx.state.batchesCompleted > 0 && ctx.state.batchesCompleted % 2 === 0) {
    void refreshImportance();
  }
  void renderTokens();
}

async function startSession(): Promise<void> {
  ctx.sessionId = await ctx.client.createSession();
  ctx.state = initialPanelState();
  el("session-label").textContent = ctx.sessionId;
  ctx.stream?.stop();
  ctx.stream = new EventStream("", ctx.sessionId, {
    onEvent: (event) => {
      reduce(ctx.state, event);
      onEvent();
    },
    onDisconnect: () => setBanner("connection lost; retrying from last event", "error"),
    onReconnect: () => setBanner("reconnected", "info"),
  });
  void ctx.stream.run();
  renderAll();
}

function wireWizard(): void {
  el("btn-upload").addEventListener("click", async () => {
    try {
      const file = el<HTMLInputElement>("csv-file").files?.[0];
      if (!ctx.sessionId || !file) throw new Error("create a session and choose a CSV first");
      const proposal = await ctx.client.uploadDataset(ctx.sessionId, await file.text());
      const editor = el<HTMLTextAreaElement>("semantics-editor");
      editor.value = JSON.stringify(proposal.assignments, null, 1);
      setBanner("semantics proposed; confirm or edit", "info");
    } catch (error) {
      showError(error);
    }
  });
  el("btn-semantics").addEventListener("click", async () => {
    try {
      if (!ctx.sessionId) throw new Error("no session");
      const assignments = JSON.parse(el<HTMLTextAreaElement>("semantics-editor").value);
      await ctx.client.confirmSemantics(ctx.sessionId, assignments);
      await ctx.client.setTask(
        ctx.sessionId,
        Number(el<HTMLInputElement>("delta-input").value),
        Number(el<HTMLInputElement>("horizon-input").value),
      );
      const result = await ctx.client.clean(ctx.sessionId);
      el("cleaning-report").textContent = JSON.stringify(result.cleaning_report, null, 1);
      setBanner("dataset cleaned", "info");
    } catch (error) {
      showError(error);
    }
  });
  el("btn-metric").addEventListener("click", async () => {
    try {
      if (!ctx.sessionId) throw new Error("no session");
      const metric = buildMetricFromForm();
      await ctx.client.setMetric(ctx.sessionId, metric);
      setBanner("metric saved; ready to optimize", "info");
    } catch (error) {
      showError(error);
    }
  });
  el("btn-optimize").addEventListener("click", async () => {
    try {
      if (!ctx.sessionId) throw new Error("no session");
      ctx.batchSize = Number(el<HTMLInputElement>("opt-batch").value);
      await ctx.client.optimize(ctx.sessionId, {
        max_trials: Number(el<HTMLInputElement>("opt-trials").value),
        init_samples: Number(el<HTMLInputElement>("opt-init").value),
        batch_size: ctx.batchSize,
        seed: Number(el<HTMLInputElement>("opt-seed").value),
      });
    } catch (error) {
      showError(error);
    }
  });
}

export function buildMetricFromForm(): Record<string, unknown> {
  const kind = el<HTMLSelectElement>("metric-kind").value;
  const base = el<HTMLSelectElement>("metric-base").value;
  const metric: Record<string, unknown> = { kind, base };
  if (kind === "time_weighted") {
    metric.weights = el<HTMLInputElement>("metric-weights")
      .value.split(",")
      .map((w) => Number(w.trim()))
      .filter((w) => !Number.isNaN(w));
  }
  if (kind === "condition_weighted") {
    metric.condition_rule = {
      column_role: el<HTMLInputElement>("metric-role").value,
      threshold: Number(el<HTMLInputElement>("metric-threshold").value),
      weight_if_true: Number(el<HTMLInputElement>("metric-wtrue").value),
      weight_if_false: Number(el<HTMLInputElement>("metric-wfalse").value),
    };
  }
  if (kind === "asymmetric") {
    metric.alpha = Number(el<HTMLInputElement>("metric-alpha").value);
    metric.beta = Number(el<HTMLInputElement>("metric-beta").value);
  }
  return metric;
}

function wireGuidance(): void {
  el("btn-guidance-prune").addEventListener("click", async () => {
    try {
      const excluded = Array.from(
        document.querySelectorAll<HTMLInputElement>("#prune-types input:checked"),
      ).map((node) => node.value);
      const dimension = el<HTMLInputElement>("prune-dim").value.trim();
      const restrictions = [];
      if (dimension) {
        restrictions.push({
          modelType: el<HTMLInputElement>("prune-model").value.trim(),
          dimension,
          low: numberOrUndefined(el<HTMLInputElement>("prune-low").value),
          high: numberOrUndefined(el<HTMLInputElement>("prune-high").value),
        });
      }
      await submitDirectives([pruneForm(excluded, restrictions)]);
    } catch (error) {
      showError(error);
    }
  });
  el("btn-guidance-allocate").addEventListener("click", async () => {
    try {
      const counts: Record<string, number> = {};
      for (const node of document.querySelectorAll<HTMLInputElement>("#allocate-counts input")) {
        const n = Number(node.value);
        if (n > 0) counts[node.dataset.type as string] = n;
      }
      await submitDirectives([allocateForm(counts, ctx.batchSize)]);
    } catch (error) {
      showError(error);
    }
  });
  el("btn-guidance-inject").addEventListener("click", async () => {
    try {
      const directive = injectForm(
        el<HTMLSelectElement>("inject-type").value,
        parseEditorJson(el<HTMLTextAreaElement>("inject-features").value),
        parseEditorJson(el<HTMLTextAreaElement>("inject-hyper").value),
      );
      await submitDirectives([directive]);
    } catch (error) {
      showError(error);
    }
  });
  el("btn-guidance-text").addEventListener("click", async () => {
    try {
      if (!ctx.sessionId) throw new Error("no session");
      const text = el<HTMLInputElement>("guidance-text").value;
      const result = await ctx.client.sendGuidance(ctx.sessionId, { text });
      setBanner(
        result.clarification ?? `queued ${result.queued.length} directive(s)`,
        result.clarification ? "error" : "info",
      );
    } catch (error) {
      showError(error);
    }
  });
}

function numberOrUndefined(raw: string): number | undefined {
  const trimmed = raw.trim();
  return trimmed ? Number(trimmed) : undefined;
}

async function submitDirectives(directives: GuidanceDirective[]): Promise<void> {
  if (!ctx.sessionId) throw new Error("no session");
  const result = await ctx.client.sendGuidance(ctx.sessionId, { directives });
  setBanner(`queued ${result.queued.length} directive(s) for the next batch`, "info");
}

async function renderLossCurves(): Promise<void> {
  if (!ctx.sessionId) return;
  try {
    const body = await ctx.client.best(ctx.sessionId);
    if (body.train_curve?.length) {
      el("loss-curves").innerHTML = lineChartSvg(
        [
          { name: "train", values: body.train_curve, color: "#2563eb" },
          { name: "val", values: body.val_curve, color: "#dc2626", dash: "4 3" },
        ],
        { width: 420, height: 180, padding: 24 },
      );
    }
  } catch {
    // no winning configuration yet
  }
}

function wireDeployment(): void {
  el("btn-deploy").addEventListener("click", async () => {
    try {
      if (!ctx.sessionId) throw new Error("no session");
      await ctx.client.deploy(ctx.sessionId);
      void renderLossCurves();
    } catch (error) {
      showError(error);
    }
  });
  el("btn-rule").addEventListener("click", async () => {
    try {
      if (!ctx.sessionId) throw new Error("no session");
      const kind = el<HTMLSelectElement>("rule-kind").value as
        | "manual_override"
        | "time_scaling"
        | "load_scaling"
        | "external_scaling";
      const rule: Record<string, unknown> = { kind };
      const hours = el<HTMLInputElement>("rule-hours").value.trim();
      if (hours) rule.hours = hours.split(",").map((h) => Number(h.trim()));
      const overrides = el<HTMLInputElement>("rule-overrides").value.trim();
      if (overrides) rule.override_values = overrides.split(",").map((v) => Number(v.trim()));
      if (kind !== "manual_override") rule.factor = Number(el<HTMLInputElement>("rule-factor").value);
      if (kind === "load_scaling" || kind === "external_scaling") {
        rule.threshold = Number(el<HTMLInputElement>("rule-threshold").value);
        rule.direction = el<HTMLSelectElement>("rule-direction").value;
      }
      if (kind === "external_scaling") {
        rule.external_role = el<HTMLInputElement>("rule-role").value;
      }
      await ctx.client.postprocess(ctx.sessionId, rule as never);
    } catch (error) {
      showError(error);
    }
  });
}

function wireChat(): void {
  el("btn-chat").addEventListener("click", async () => {
    try {
      if (!ctx.sessionId) throw new Error("no session");
      const input = el<HTMLInputElement>("chat-input");
      const text = input.value;
      input.value = "";
      // optimistic echo; the transcript event will follow
      ctx.state.chat.push({
        id: -1, sender: "user", topics: ["user.io"], role_marker: "user", content: text,
      });
      renderChat();
      await ctx.client.chat(ctx.sessionId, text);
    } catch (error) {
      showError(error);
    }
  });
}

export function main(): void {
  el("btn-session").addEventListener("click", () => void startSession().catch(showError));
  wireWizard();
  wireGuidance();
  wireDeployment();
  wireChat();
  renderAll();
}

if (typeof document !== "undefined" && document.getElementById("btn-session")) {
  main();
}
