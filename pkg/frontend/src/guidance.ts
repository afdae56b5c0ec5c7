/**
 * Guidance drawer forms mapped onto the canonical directive encoding.
 * Structured forms bypass LLM parsing entirely; only the free-text box is
 * routed through the service's natural-language interpreter.
 */

import type { GuidanceDirective } from "./types.js";

export interface RangeRestriction {
  modelType: string;
  dimension: string;
  low?: number;
  high?: number;
  choices?: unknown[];
}

export function pruneForm(
  excludeTypes: string[],
  restrictions: RangeRestriction[] = [],
): GuidanceDirective {
  if (excludeTypes.length === 0 && restrictions.length === 0) {
    throw new Error("prune form needs at least one exclusion or restriction");
  }
  const restrict: NonNullable<GuidanceDirective["restrict"]> = {};
  for (const r of restrictions) {
    const dims = (restrict[r.modelType] ??= {});
    const spec: { low?: number; high?: number; choices?: unknown[] } = {};
    if (r.choices !== undefined) {
      spec.choices = r.choices;
    } else {
      if (r.low !== undefined) spec.low = r.low;
      if (r.high !== undefined) spec.high = r.high;
      if (spec.low === undefined && spec.high === undefined) {
        throw new Error(`restriction on ${r.dimension} needs bounds or choices`);
      }
    }
    dims[r.dimension] = spec;
  }
  const directive: GuidanceDirective = { kind: "prune_space" };
  if (excludeTypes.length) directive.exclude_model_types = [...excludeTypes];
  if (restrictions.length) directive.restrict = restrict;
  return directive;
}

export function allocateForm(
  counts: Record<string, number>,
  batchSize: number,
): GuidanceDirective {
  const entries = Object.entries(counts).filter(([, n]) => n > 0);
  if (entries.length === 0) {
    throw new Error("allocate form needs at least one positive count");
  }
  const total = entries.reduce((acc, [, n]) => acc + n, 0);
  if (total > batchSize) {
    throw new Error(`allocations (${total}) exceed the batch size (${batchSize})`);
  }
  for (const [modelType, n] of entries) {
    if (!Number.isInteger(n) || n < 0) {
      throw new Error(`allocation for ${modelType} must be a non-negative integer`);
    }
  }
  return { kind: "allocate", counts: Object.fromEntries(entries) };
}

export function injectForm(
  modelType: string,
  features: Record<string, unknown>,
  hyperparams: Record<string, unknown>,
): GuidanceDirective {
  if (!modelType) {
    throw new Error("injected configurations must name a model type");
  }
  return {
    kind: "inject",
    configs: [{ model_type: modelType, features, hyperparams }],
  };
}

/** Parse the inject editor's JSON fields, tolerating empty boxes. */
export function parseEditorJson(text: string): Record<string, unknown> {
  const trimmed = text.trim();
  if (!trimmed) return {};
  const parsed = JSON.parse(trimmed) as unknown;
  if (typeof parsed !== "object" || parsed === null || Array.isArray(parsed)) {
    throw new Error("expected a JSON object of dimension values");
  }
  return parsed as Record<string, unknown>;
}
