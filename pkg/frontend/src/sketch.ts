// Sketch capture: reduce a free-form pointer drag over the paused video to
// an axis-aligned rectangle, normalized against the video's display size.
// The normalized rect is what the rest of the pipeline consumes; the canvas
// rect is just its projection at the current display size, so resizing the
// player never changes what was sketched.

import { clampNorm, normToDisplay } from "./geometry";
import type { DisplayRect, NormRect } from "./geometry";

/** One pointer sample in display (CSS) pixels, relative to the video box. */
export interface DragPoint {
  x: number;
  y: number;
}

/** Size of the video element on screen when the drag happened. */
export interface VideoDisplayGeometry {
  displayWidth: number;
  displayHeight: number;
}

/** Drags whose bounding box is under this many display px are discarded. */
export const MIN_DRAG_PX = 3;

export interface SketchState {
  /** Timestamp of the paused frame the rect was drawn on. */
  frameT: number;
  /** The rect in display pixels at the geometry it was last projected to. */
  canvasRect: DisplayRect;
  /** The authoritative normalized mirror; display-size invariant. */
  normalized: NormRect;
}

/**
 * Bounding box of a drag, clipped to the video box and normalized to [0,1].
 * Returns null for a click without drag or a degenerate (near-zero area)
 * drag.
 */
export function captureSketch(
  points: DragPoint[],
  geometry: VideoDisplayGeometry
): NormRect | null {
  if (points.length < 2) {
    return null;
  }
  const { displayWidth, displayHeight } = geometry;
  if (!(displayWidth > 0) || !(displayHeight > 0)) {
    throw new Error(`bad display geometry: ${displayWidth}x${displayHeight}`);
  }
  let minX = Infinity;
  let minY = Infinity;
  let maxX = -Infinity;
  let maxY = -Infinity;
  for (const p of points) {
    const x = Math.min(Math.max(p.x, 0), displayWidth);
    const y = Math.min(Math.max(p.y, 0), displayHeight);
    minX = Math.min(minX, x);
    minY = Math.min(minY, y);
    maxX = Math.max(maxX, x);
    maxY = Math.max(maxY, y);
  }
  if (maxX - minX < MIN_DRAG_PX || maxY - minY < MIN_DRAG_PX) {
    return null;
  }
  return clampNorm(
    minX / displayWidth,
    minY / displayHeight,
    (maxX - minX) / displayWidth,
    (maxY - minY) / displayHeight
  );
}

/** Build the sketch state for a completed drag; null if the drag was moot. */
export function makeSketchState(
  points: DragPoint[],
  geometry: VideoDisplayGeometry,
  frameT: number
): SketchState | null {
  const normalized = captureSketch(points, geometry);
  if (normalized === null) {
    return null;
  }
  return {
    frameT,
    canvasRect: normToDisplay(normalized, geometry.displayWidth, geometry.displayHeight),
    normalized
  };
}

/** Re-project after a player resize; the normalized rect is untouched. */
export function sketchStateAtDisplay(
  state: SketchState,
  geometry: VideoDisplayGeometry
): SketchState {
  return {
    frameT: state.frameT,
    canvasRect: normToDisplay(
      state.normalized,
      geometry.displayWidth,
      geometry.displayHeight
    ),
    normalized: state.normalized
  };
}
