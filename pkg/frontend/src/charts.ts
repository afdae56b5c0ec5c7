/**
 * Dependency-free SVG chart builders. Every number plotted comes straight
 * from service payloads; these functions only map values to coordinates.
 */

import type { TrialPoint } from "./reducer.js";

export const MODEL_COLORS: Record<string, string> = {
  linear: "#2563eb",
  mlp: "#dc2626",
  gbt: "#16a34a",
  svr: "#9333ea",
  lstm: "#ea580c",
  gru: "#0891b2",
  cnn: "#ca8a04",
};

const FALLBACK_COLORS = ["#2563eb", "#dc2626", "#16a34a", "#9333ea", "#ea580c", "#0891b2"];

export function colorFor(modelType: string, index = 0): string {
  return MODEL_COLORS[modelType] ?? FALLBACK_COLORS[index % FALLBACK_COLORS.length];
}

export interface ChartGeometry {
  width: number;
  height: number;
  padding: number;
}

const DEFAULT_GEOMETRY: ChartGeometry = { width: 640, height: 320, padding: 36 };

interface Scale {
  (value: number): number;
}

function linearScale(domainLo: number, domainHi: number, rangeLo: number, rangeHi: number): Scale {
  const span = domainHi - domainLo || 1;
  return (value) => rangeLo + ((value - domainLo) / span) * (rangeHi - rangeLo);
}

function svgOpen(geometry: ChartGeometry): string {
  return (
    `<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 ${geometry.width} ${geometry.height}"` +
    ` width="${geometry.width}" height="${geometry.height}">`
  );
}

/** Trial scatter (index vs loss), color-coded per model type, with the
 * best-so-far staircase overlaid and the final best marked. */
export function trialScatterSvg(
  trials: TrialPoint[],
  bestSoFar: number[],
  geometry: ChartGeometry = DEFAULT_GEOMETRY,
): string {
  const completed = trials.filter((t) => !t.failed && t.loss !== null);
  const { width, height, padding } = geometry;
  if (completed.length === 0) {
    return `${svgOpen(geometry)}<text x="${width / 2}" y="${height / 2}" text-anchor="middle">no trials yet</text></svg>`;
  }
  const losses = completed.map((t) => t.loss as number);
  const maxIndex = Math.max(...trials.map((t) => t.index), 1);
  const x = linearScale(0, maxIndex, padding, width - padding);
  const y = linearScale(Math.min(...losses), Math.max(...losses), height - padding, padding);

  const parts: string[] = [svgOpen(geometry)];
  parts.push(
    `<line x1="${padding}" y1="${height - padding}" x2="${width - padding}" y2="${height - padding}" stroke="#888"/>`,
    `<line x1="${padding}" y1="${padding}" x2="${padding}" y2="${height - padding}" stroke="#888"/>`,
  );
  for (const t of completed) {
    parts.push(
      `<circle cx="${x(t.index).toFixed(1)}" cy="${y(t.loss as number).toFixed(1)}" r="3.5"` +
        ` fill="${colorFor(t.modelType)}" opacity="0.8" data-type="${t.modelType}"` +
        ` data-index="${t.index}"${t.origin === "user_injected" ? ' stroke="#000" stroke-width="1.5"' : ""}/>`,
    );
  }
  if (bestSoFar.length) {
    const steps = bestSoFar
      .map((v, i) => [i, v] as const)
      .filter(([, v]) => Number.isFinite(v));
    const path = steps.map(([i, v], k) => `${k === 0 ? "M" : "L"}${x(i).toFixed(1)},${y(v).toFixed(1)}`).join(" ");
    parts.push(`<path d="${path}" fill="none" stroke="#111" stroke-width="1.5" stroke-dasharray="4 3"/>`);
    const [lastIndex, lastValue] = steps[steps.length - 1];
    parts.push(
      `<circle cx="${x(lastIndex).toFixed(1)}" cy="${y(lastValue).toFixed(1)}" r="6" fill="none" stroke="#111" stroke-width="2"/>`,
    );
  }
  parts.push("</svg>");
  return parts.join("");
}

/** Horizontal importance bars, already ranked by the service. */
export function importanceBarsSvg(
  importances: [string, number][],
  geometry: ChartGeometry = { width: 420, height: 26 * Math.max(importances.length, 1) + 20, padding: 10 },
): string {
  const { width, padding } = geometry;
  const labelWidth = 150;
  const parts = [svgOpen(geometry)];
  importances.forEach(([name, value], row) => {
    const yTop = padding + row * 26;
    const barWidth = Math.max(1, value * (width - labelWidth - 2 * padding));
    parts.push(
      `<text x="${labelWidth - 6}" y="${yTop + 13}" text-anchor="end" font-size="12">${name}</text>`,
      `<rect x="${labelWidth}" y="${yTop}" width="${barWidth.toFixed(1)}" height="16" fill="#2563eb"/>`,
      `<text x="${labelWidth + barWidth + 4}" y="${yTop + 13}" font-size="11">${(value * 100).toFixed(1)}%</text>`,
    );
  });
  parts.push("</svg>");
  return parts.join("");
}

/** Polyline chart for one or more aligned series (forecast, loss curves). */
export function lineChartSvg(
  series: { name: string; values: number[]; color: string; dash?: string }[],
  geometry: ChartGeometry = DEFAULT_GEOMETRY,
): string {
  const { width, height, padding } = geometry;
  const all = series.flatMap((s) => s.values).filter((v) => Number.isFinite(v));
  if (!all.length) {
    return `${svgOpen(geometry)}<text x="${width / 2}" y="${height / 2}" text-anchor="middle">no data</text></svg>`;
  }
  const maxLen = Math.max(...series.map((s) => s.values.length));
  const x = linearScale(0, Math.max(maxLen - 1, 1), padding, width - padding);
  const y = linearScale(Math.min(...all), Math.max(...all), height - padding, padding);
  const parts = [svgOpen(geometry)];
  parts.push(
    `<line x1="${padding}" y1="${height - padding}" x2="${width - padding}" y2="${height - padding}" stroke="#888"/>`,
  );
  for (const s of series) {
    const path = s.values
      .map((v, i) => `${i === 0 ? "M" : "L"}${x(i).toFixed(1)},${y(v).toFixed(1)}`)
      .join(" ");
    parts.push(
      `<path d="${path}" fill="none" stroke="${s.color}" stroke-width="1.8"` +
        `${s.dash ? ` stroke-dasharray="${s.dash}"` : ""} data-series="${s.name}"/>`,
    );
  }
  parts.push("</svg>");
  return parts.join("");
}
