// Sketch round trip: a scripted drag over a mock video element becomes a
// normalized rect, goes to the server as frame pixels, and its re-projection
// back to display pixels must sit within 1 px per edge of the drawn box, at
// two display sizes. Plus the pure capture rules: clicks and degenerate
// drags produce no sketch, and resizing never changes the normalized rect.

import { beforeAll, describe, expect, test } from "vitest";

import { ApiClient } from "../src/api";
import { fromWirePixels, normToDisplay, toWirePixels } from "../src/geometry";
import {
  captureSketch,
  makeSketchState,
  sketchStateAtDisplay,
  type DragPoint,
  type VideoDisplayGeometry
} from "../src/sketch";
import type { ProjectView } from "../src/types";
import { runtime } from "./runtime";

let client: ApiClient;
let project: ProjectView;

beforeAll(async () => {
  client = new ApiClient(runtime().oracleUrl);
  project = await client.createProject({ bundle_path: "vid-fe.json" });
});

function bbox(points: DragPoint[]) {
  const xs = points.map((p) => p.x);
  const ys = points.map((p) => p.y);
  const minX = Math.min(...xs);
  const minY = Math.min(...ys);
  return {
    left: minX,
    top: minY,
    right: Math.max(...xs),
    bottom: Math.max(...ys)
  };
}

describe("sketch capture", () => {
  test("click without drag produces no sketch", () => {
    const geo: VideoDisplayGeometry = { displayWidth: 1280, displayHeight: 720 };
    expect(captureSketch([{ x: 400, y: 300 }], geo)).toBeNull();
  });

  test("degenerate drag is discarded", () => {
    const geo: VideoDisplayGeometry = { displayWidth: 1280, displayHeight: 720 };
    expect(
      captureSketch(
        [
          { x: 400, y: 300 },
          { x: 401, y: 301 }
        ],
        geo
      )
    ).toBeNull();
    // Thin horizontal sweep: wide but no height.
    expect(
      captureSketch(
        [
          { x: 100, y: 300 },
          { x: 900, y: 301 }
        ],
        geo
      )
    ).toBeNull();
  });

  test("dragging the bottom half of a 1280x720 display yields (0, 0.5, 1, 0.5)", () => {
    const geo: VideoDisplayGeometry = { displayWidth: 1280, displayHeight: 720 };
    const rect = captureSketch(
      [
        { x: 0, y: 360 },
        { x: 1280, y: 720 }
      ],
      geo
    );
    expect(rect).toEqual({ x: 0, y: 0.5, w: 1, h: 0.5 });
  });

  test("window resize leaves the normalized rect unchanged", () => {
    const geo: VideoDisplayGeometry = { displayWidth: 960, displayHeight: 540 };
    const state = makeSketchState(
      [
        { x: 153, y: 77 },
        { x: 700, y: 449 }
      ],
      geo,
      30.0
    );
    expect(state).not.toBeNull();
    const resized = sketchStateAtDisplay(state!, {
      displayWidth: 480,
      displayHeight: 270
    });
    expect(resized.normalized).toEqual(state!.normalized);
    expect(resized.frameT).toBe(30.0);
    expect(resized.canvasRect.x).toBeCloseTo(state!.canvasRect.x / 2, 9);
    expect(resized.canvasRect.w).toBeCloseTo(state!.canvasRect.w / 2, 9);
  });
});

describe("sketch round trip through the server", () => {
  const displays: Array<{ geo: VideoDisplayGeometry; points: DragPoint[] }> = [
    {
      geo: { displayWidth: 960, displayHeight: 540 },
      points: [
        { x: 153, y: 77 },
        { x: 411, y: 133 },
        { x: 700, y: 449 },
        { x: 222, y: 401 }
      ]
    },
    {
      geo: { displayWidth: 640, displayHeight: 360 },
      points: [
        { x: 97, y: 33 },
        { x: 411, y: 255 },
        { x: 233, y: 101 }
      ]
    }
  ];

  test.each(displays)(
    "re-projection differs from the drawn rect by <= 1 px per edge ($geo.displayWidth x $geo.displayHeight)",
    async ({ geo, points }) => {
      const drawn = bbox(points);
      const normalized = captureSketch(points, geo);
      expect(normalized).not.toBeNull();

      const wire = toWirePixels(normalized!, project.frame_dims);
      const job = await client.postCommand(project.id, {
        text: "blur this area at 0:30",
        playhead_t: 30.0,
        sketch_px: wire,
        sketch_frame_t: 30.0
      });
      const done = await client.waitForJob(job.job_id);
      const view = await client.getCommand(done.command_id as string);

      const echoed = view.command.sketch_px;
      expect(echoed).not.toBeNull();
      // In-bounds integer rects survive the server's own round trip intact.
      expect(echoed).toEqual(wire);

      const back = fromWirePixels(echoed!, project.frame_dims);
      const disp = normToDisplay(back, geo.displayWidth, geo.displayHeight);
      expect(Math.abs(disp.x - drawn.left)).toBeLessThanOrEqual(1);
      expect(Math.abs(disp.y - drawn.top)).toBeLessThanOrEqual(1);
      expect(Math.abs(disp.x + disp.w - drawn.right)).toBeLessThanOrEqual(1);
      expect(Math.abs(disp.y + disp.h - drawn.bottom)).toBeLessThanOrEqual(1);
    }
  );

  test("the grounded suggestion uses the sketched region, not the full frame", async () => {
    const geo: VideoDisplayGeometry = { displayWidth: 960, displayHeight: 540 };
    const points: DragPoint[] = [
      { x: 240, y: 135 },
      { x: 720, y: 405 }
    ];
    const wire = toWirePixels(captureSketch(points, geo)!, project.frame_dims);
    const job = await client.postCommand(project.id, {
      text: "blur this spot at 0:20",
      playhead_t: 20.0,
      sketch_px: wire,
      sketch_frame_t: 20.0
    });
    const done = await client.waitForJob(job.job_id);
    const view = await client.getCommand(done.command_id as string);
    expect(view.suggestions.length).toBeGreaterThan(0);
    for (const edit of view.suggestions) {
      expect(edit.provenance.spatial_method).toBe("sketch");
      expect(edit.rect_px).toEqual(wire);
    }
  });
});
