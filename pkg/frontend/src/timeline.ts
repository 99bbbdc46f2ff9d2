// Timeline markers and prev/next navigation over suggestion boundaries.
// While undecided suggestions exist the buttons jump between those; once
// every suggestion is decided they jump between the applied edits.

import type { TimelineView } from "./types";
import { EDIT_STATUS } from "./types";

const EPS = 1e-9;

export interface Marker {
  editId: string;
  layerId: string;
  operation: string;
  startS: number;
  endS: number;
  status: string;
  superseded: boolean;
}

/** Flatten the timeline into draw-ready markers, ordered by start time. */
export function markers(timeline: TimelineView): Marker[] {
  const out: Marker[] = [];
  for (const layer of timeline.layers) {
    for (const e of layer.edits) {
      out.push({
        editId: e.id,
        layerId: layer.id,
        operation: e.operation,
        startS: e.start_s,
        endS: e.end_s,
        status: e.status,
        superseded: e.superseded
      });
    }
  }
  out.sort((a, b) => a.startS - b.startS || (a.editId < b.editId ? -1 : 1));
  return out;
}

/**
 * Sorted, deduplicated jump targets: starts of open suggestions, or starts
 * of accepted edits once nothing is left to decide.
 */
export function suggestionBoundaries(timeline: TimelineView): number[] {
  const all = markers(timeline);
  const open = all.filter(
    (m) => m.status === EDIT_STATUS.suggested && !m.superseded
  );
  const pool = open.length > 0 ? open : all.filter((m) => m.status === EDIT_STATUS.accepted);
  return [...new Set(pool.map((m) => m.startS))].sort((a, b) => a - b);
}

/** Smallest boundary strictly after t, or null. */
export function nextBoundary(boundaries: number[], t: number): number | null {
  for (const b of boundaries) {
    if (b > t + EPS) {
      return b;
    }
  }
  return null;
}

/** Largest boundary strictly before t, or null. */
export function prevBoundary(boundaries: number[], t: number): number | null {
  let found: number | null = null;
  for (const b of boundaries) {
    if (b < t - EPS) {
      found = b;
    }
  }
  return found;
}
