import { describe, expect, it } from "vitest";

import { colorFor, importanceBarsSvg, lineChartSvg, trialScatterSvg } from "../src/charts.js";
import type { TrialPoint } from "../src/reducer.js";

function points(): TrialPoint[] {
  return [
    { index: 0, loss: 5.0, failed: false, modelType: "linear", origin: "random_init" },
    { index: 1, loss: 3.0, failed: false, modelType: "mlp", origin: "acquisition" },
    { index: 2, loss: null, failed: true, modelType: "gbt", origin: "acquisition" },
    { index: 3, loss: 4.0, failed: false, modelType: "gbt", origin: "user_injected" },
  ];
}

describe("charts", () => {
  it("scatter encodes one circle per completed trial, colored by type", () => {
    const svg = trialScatterSvg(points(), [5.0, 3.0, 3.0, 3.0]);
    expect((svg.match(/<circle/g) ?? []).length).toBe(3 + 1); // trials + best marker
    expect(svg).toContain(`fill="${colorFor("linear")}"`);
    expect(svg).toContain(`fill="${colorFor("mlp")}"`);
    expect(svg).toContain('data-type="gbt"');
    // injected trials get an outline
    expect(svg).toMatch(/data-index="3"[^/]*stroke="#000"/);
  });

  it("scatter overlays the best-so-far staircase", () => {
    const svg = trialScatterSvg(points(), [5.0, 3.0, 3.0, 3.0]);
    expect(svg).toContain("stroke-dasharray");
    expect((svg.match(/<path/g) ?? []).length).toBe(1);
  });

  it("empty scatter renders a placeholder", () => {
    expect(trialScatterSvg([], [])).toContain("no trials yet");
  });

  it("importance bars scale with the value", () => {
    const svg = importanceBarsSvg([
      ["learning_rate", 0.6],
      ["dropout", 0.4],
    ]);
    const widths = [...svg.matchAll(/<rect[^>]*width="([0-9.]+)"/g)].map((m) => Number(m[1]));
    expect(widths.length).toBe(2);
    expect(widths[0]).toBeGreaterThan(widths[1]);
  });

  it("line chart draws one path per series", () => {
    const svg = lineChartSvg([
      { name: "raw", values: [1, 2, 3], color: "#111" },
      { name: "adjusted", values: [1, 1.5, 2.5], color: "#222" },
    ]);
    expect((svg.match(/<path/g) ?? []).length).toBe(2);
    expect(svg).toContain('data-series="raw"');
  });
});
