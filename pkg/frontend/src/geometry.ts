// Rect conversions between display pixels, normalized [0,1] coordinates,
// and the integer frame pixels the wire protocol carries. The pixel
// rounding here mirrors the server exactly (round half up, 1 px floor on
// width and height) so a client-side projection agrees with what the
// service will echo back.

import type { FrameDims, PixelRect } from "./types";

/** Axis-aligned rect in normalized [0,1] frame coordinates. */
export interface NormRect {
  x: number;
  y: number;
  w: number;
  h: number;
}

/** Rect in display (CSS) pixels; fractional values allowed. */
export interface DisplayRect {
  x: number;
  y: number;
  w: number;
  h: number;
}

export function roundHalfUp(v: number): number {
  return Math.floor(v + 0.5);
}

/**
 * Fit a rect into the unit frame: translate fully into bounds, shrink only
 * when larger than the frame. Degenerate sizes are a caller bug.
 */
export function clampNorm(x: number, y: number, w: number, h: number): NormRect {
  if (!(w > 0) || !(h > 0)) {
    throw new Error(`cannot clamp degenerate rect: w=${w}, h=${h}`);
  }
  const cw = Math.min(w, 1);
  const ch = Math.min(h, 1);
  return {
    x: Math.min(Math.max(x, 0), 1 - cw),
    y: Math.min(Math.max(y, 0), 1 - ch),
    w: cw,
    h: ch
  };
}

/** Normalized -> integer frame pixels, matching the server's conversion. */
export function toWirePixels(r: NormRect, dims: FrameDims): PixelRect {
  return {
    x: roundHalfUp(r.x * dims.width_px),
    y: roundHalfUp(r.y * dims.height_px),
    w: Math.max(1, roundHalfUp(r.w * dims.width_px)),
    h: Math.max(1, roundHalfUp(r.h * dims.height_px))
  };
}

/** Integer frame pixels -> normalized, clamped in-bounds like the server. */
export function fromWirePixels(p: PixelRect, dims: FrameDims): NormRect {
  return clampNorm(
    p.x / dims.width_px,
    p.y / dims.height_px,
    p.w / dims.width_px,
    p.h / dims.height_px
  );
}

/** Project a normalized rect onto a display surface of the given size. */
export function normToDisplay(
  r: NormRect,
  displayWidth: number,
  displayHeight: number
): DisplayRect {
  return {
    x: r.x * displayWidth,
    y: r.y * displayHeight,
    w: r.w * displayWidth,
    h: r.h * displayHeight
  };
}
