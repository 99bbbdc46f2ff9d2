// Examine-panel breakdown of one interpreted command: four rows answering
// what (edit operation) | how (parameters) | where (frame) | when (timeline),
// each holding highlighted spans of the command text plus a reasoning line.
// Highlights carry the server's character offsets and surfaces verbatim;
// the row renderer layers overlapping spans instead of dropping any.

import type { CommandView, SpanView } from "./types";

export interface Highlight {
  charStart: number;
  charEnd: number;
  /** Exactly the server-reported surface (or operation token) at the offsets. */
  surface: string;
  /** Reference category or operation name, for styling. */
  label: string;
}

export type RowTitle = "what" | "how" | "where" | "when";

export interface BreakdownRow {
  title: RowTitle;
  reasoning: string;
  highlights: Highlight[];
  /** Shown when the row has nothing to highlight (e.g. no spatial ref). */
  placeholder: string | null;
}

export interface BreakdownView {
  commandId: string;
  /** Resolved command text; all highlight offsets index into this string. */
  text: string;
  rows: Record<RowTitle, BreakdownRow>;
  parentCommandId: string | null;
  lowConfidence: boolean;
}

function fromSpan(span: SpanView, label: string): Highlight {
  return {
    charStart: span.char_start,
    charEnd: span.char_end,
    surface: span.surface,
    label
  };
}

function row(
  title: RowTitle,
  reasoning: string,
  highlights: Highlight[],
  placeholder: string | null = null
): BreakdownRow {
  return {
    title,
    reasoning,
    highlights,
    placeholder: highlights.length > 0 ? null : placeholder
  };
}

function unique(values: string[]): string[] {
  return [...new Set(values.filter((v) => v.length > 0))];
}

/**
 * First standalone occurrence of an operation token in the text, or null
 * when the command used a synonym ("remove" for cut). Case-sensitive: a
 * highlight must reproduce the server-reported token character-for-character.
 */
function locateOperation(text: string, op: string): Highlight | null {
  const m = new RegExp(`\\b${op}\\b`).exec(text);
  if (m === null) {
    return null;
  }
  return { charStart: m.index, charEnd: m.index + op.length, surface: op, label: op };
}

export function renderBreakdown(record: CommandView): BreakdownView {
  const parse = record.parse;
  const text = parse.resolved_text;

  const whatHighlights: Highlight[] = [];
  for (const op of parse.operations) {
    const h = locateOperation(text, op);
    if (h !== null) {
      whatHighlights.push(h);
    }
  }
  const what = row(
    "what",
    `operations: ${parse.operations.join(", ") || "(none)"}`,
    whatHighlights,
    "no edit operation stated"
  );

  const paramOps = Object.keys(parse.param_refs).filter(
    (op) => parse.param_refs[op].length > 0
  );
  const howHighlights = paramOps.flatMap((op) =>
    parse.param_refs[op].map((s) => fromSpan(s, op))
  );
  const how = row(
    "how",
    paramOps.length > 0 ? `parameters for ${paramOps.join(", ")}` : "defaults only",
    howHighlights,
    "default parameters"
  );

  const spatialMethods = unique(
    record.suggestions.map((e) => e.provenance.spatial_method)
  );
  const where = row(
    "where",
    spatialMethods.join("; ") || "whole frame",
    parse.spatial_refs.map((r) => fromSpan(r.span, r.category)),
    "whole frame (no region referenced)"
  );

  const temporalExplanations = unique(
    record.suggestions.map((e) => e.provenance.temporal_explanation)
  );
  const temporalFallback =
    parse.temporal_refs.length > 0
      ? `${parse.temporal_refs.length} timing reference(s), nothing matched`
      : "no timing stated; playhead used";
  const when = row(
    "when",
    temporalExplanations.join("; ") || temporalFallback,
    parse.temporal_refs.map((r) => fromSpan(r.span, r.category)),
    "whole timeline"
  );

  return {
    commandId: record.id,
    text,
    rows: { what, how, where, when },
    parentCommandId: record.parent_command_id,
    lowConfidence: parse.low_confidence
  };
}

/** One run of row text under a constant emphasis depth. */
export interface RowSegment {
  text: string;
  /** Number of highlights covering this run; 0 means plain text. */
  depth: number;
}

/**
 * Split the row text into runs by highlight coverage. Overlapping spans
 * stack depth (layered emphasis); none are dropped.
 */
export function rowSegments(text: string, highlights: Highlight[]): RowSegment[] {
  const cuts = new Set<number>([0, text.length]);
  for (const h of highlights) {
    cuts.add(Math.min(Math.max(h.charStart, 0), text.length));
    cuts.add(Math.min(Math.max(h.charEnd, 0), text.length));
  }
  const points = [...cuts].sort((a, b) => a - b);
  const segments: RowSegment[] = [];
  for (let i = 0; i + 1 < points.length; i++) {
    const a = points[i];
    const b = points[i + 1];
    if (a === b) {
      continue;
    }
    const depth = highlights.filter((h) => h.charStart <= a && b <= h.charEnd).length;
    segments.push({ text: text.slice(a, b), depth });
  }
  return segments;
}

/** Plain-text preview of a row, emphasis depth shown as nested brackets. */
export function rowText(text: string, highlights: Highlight[]): string {
  return rowSegments(text, highlights)
    .map((s) => "«".repeat(s.depth) + s.text + "»".repeat(s.depth))
    .join("");
}
