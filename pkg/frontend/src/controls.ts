// Suggestion-loop store: one project session's view of server state plus
// the in-flight optimistic deltas. Mutations apply optimistically, reconcile
// from the response, then re-pull project/timeline/commands so markers and
// lists always re-render from server state; a conflict (stale revision)
// refetches everything and surfaces a toast. The render() projection covers
// server-owned state only, so after any action sequence it must equal what
// a cold refetch of the same project renders.

import { ApiClient, ApiError, JobFailed } from "./api";
import { nextBoundary, prevBoundary, suggestionBoundaries } from "./timeline";
import type {
  CommandInput,
  CommandView,
  EditMutationResult,
  EditPatchInput,
  EditView,
  PixelRect,
  ProjectView,
  TimelineView
} from "./types";
import { EDIT_STATUS } from "./types";

export interface Toast {
  kind: "error" | "info";
  message: string;
}

/** JSON with object keys sorted recursively, for stable render comparison. */
export function canonicalJson(value: unknown): string {
  const sortValue = (v: unknown): unknown => {
    if (Array.isArray(v)) {
      return v.map(sortValue);
    }
    if (v !== null && typeof v === "object") {
      const entries = Object.entries(v as Record<string, unknown>).sort(
        ([a], [b]) => (a < b ? -1 : a > b ? 1 : 0)
      );
      return Object.fromEntries(entries.map(([k, inner]) => [k, sortValue(inner)]));
    }
    return v;
  };
  return JSON.stringify(sortValue(value));
}

export interface SubmitOptions {
  playheadT?: number;
  layerId?: string;
  sketchPx?: PixelRect;
  sketchFrameT?: number;
  parentCommandId?: string;
}

export class ProjectStore {
  readonly api: ApiClient;
  projectId: string | null = null;
  project: ProjectView | null = null;
  timeline: TimelineView | null = null;
  commands = new Map<string, CommandView>();
  /** Client-side playhead; prev/next move it, submits anchor to it. */
  localPlayheadT = 0;
  toasts: Toast[] = [];
  private readonly inflight = new Set<string>();

  constructor(api: ApiClient) {
    this.api = api;
  }

  private pid(): string {
    if (this.projectId === null) {
      throw new Error("no project open");
    }
    return this.projectId;
  }

  /** Create a fresh project session on the server. */
  async open(body: {
    bundle?: Record<string, unknown>;
    bundle_path?: string;
  }): Promise<ProjectView> {
    const view = await this.api.createProject(body);
    this.projectId = view.id;
    await this.refresh();
    return this.project as ProjectView;
  }

  /** Attach to an existing project (cold refetch path). */
  async hydrate(projectId: string): Promise<void> {
    this.projectId = projectId;
    await this.refresh();
  }

  /** Re-pull everything the render projection depends on. */
  async refresh(): Promise<void> {
    const id = this.pid();
    this.project = await this.api.getProject(id);
    this.timeline = await this.api.getTimeline(id);
    const fresh = new Map<string, CommandView>();
    for (const commandId of this.project.command_ids) {
      fresh.set(commandId, await this.api.getCommand(commandId));
    }
    this.commands = fresh;
  }

  /** Server-owned state only; view-local state (toasts, playhead) excluded. */
  render(): string {
    return canonicalJson({
      project: this.project,
      timeline: this.timeline,
      commands: (this.project?.command_ids ?? []).map(
        (id) => this.commands.get(id) ?? null
      )
    });
  }

  findEdit(editId: string): EditView | null {
    for (const layer of this.project?.layers ?? []) {
      for (const e of layer.edits) {
        if (e.id === editId) {
          return e;
        }
      }
    }
    return null;
  }

  async submit(text: string, options: SubmitOptions = {}): Promise<CommandView | null> {
    const body: CommandInput = {
      text,
      playhead_t: options.playheadT ?? this.localPlayheadT
    };
    if (options.layerId !== undefined) {
      body.layer_id = options.layerId;
    }
    if (options.sketchPx !== undefined) {
      body.sketch_px = options.sketchPx;
      body.sketch_frame_t = options.sketchFrameT;
    }
    if (options.parentCommandId !== undefined) {
      body.parent_command_id = options.parentCommandId;
    }
    let commandId: string;
    try {
      const job = await this.api.postCommand(this.pid(), body);
      const finished = await this.api.waitForJob(job.job_id);
      commandId = finished.command_id as string;
    } catch (err) {
      await this.onActionError(err);
      return null;
    }
    await this.refresh();
    // The engine parks the playhead at the first suggestion; follow it.
    this.localPlayheadT = this.project?.playhead_t ?? this.localPlayheadT;
    return this.commands.get(commandId) ?? null;
  }

  async accept(editId: string): Promise<EditView | null> {
    return this.transition(editId, EDIT_STATUS.accepted, (rev) =>
      this.api.acceptEdit(editId, rev)
    );
  }

  async reject(editId: string): Promise<EditView | null> {
    return this.transition(editId, EDIT_STATUS.rejected, (rev) =>
      this.api.rejectEdit(editId, rev)
    );
  }

  private async transition(
    editId: string,
    optimisticStatus: string,
    call: (expectedRevision: number | undefined) => Promise<EditMutationResult>
  ): Promise<EditView | null> {
    this.guard(editId);
    try {
      const edit = this.findEdit(editId);
      if (edit !== null) {
        edit.status = optimisticStatus; // optimistic; reconciled below
      }
      let result: EditMutationResult;
      try {
        result = await call(this.project?.revision);
      } catch (err) {
        await this.onActionError(err);
        return null;
      }
      this.reconcileEdit(result);
      await this.refresh();
      return this.findEdit(editId);
    } finally {
      this.inflight.delete(editId);
    }
  }

  async adjust(editId: string, patch: EditPatchInput): Promise<EditView | null> {
    this.guard(editId);
    try {
      const edit = this.findEdit(editId);
      if (edit !== null) {
        // optimistic; reconciled below
        if (patch.start_s !== undefined) {
          edit.start_s = patch.start_s;
        }
        if (patch.end_s !== undefined) {
          edit.end_s = patch.end_s;
        }
        if (patch.rect_px !== undefined) {
          edit.rect_px = patch.rect_px;
        }
        if (patch.operation !== undefined) {
          edit.operation = patch.operation;
        }
      }
      let result: EditMutationResult;
      try {
        result = await this.api.patchEdit(editId, {
          ...patch,
          expected_revision: patch.expected_revision ?? this.project?.revision
        });
      } catch (err) {
        await this.onActionError(err);
        return null;
      }
      this.reconcileEdit(result);
      await this.refresh();
      return this.findEdit(editId);
    } finally {
      this.inflight.delete(editId);
    }
  }

  /** Ask for more material near the current playhead. Returns new edit ids. */
  async searchMore(commandId: string, nearT?: number): Promise<string[]> {
    const t = nearT ?? this.localPlayheadT;
    let newIds: string[];
    try {
      const result = await this.api.searchMore(commandId, t, this.project?.revision);
      newIds = result.new_edits.map((e) => e.id);
      if (this.project !== null) {
        this.project.revision = result.revision;
        for (const e of result.new_edits) {
          const layer = this.project.layers.find((l) => l.id === e.layer_id);
          layer?.edits.push(e); // best effort; refresh below is authoritative
        }
      }
    } catch (err) {
      await this.onActionError(err);
      return [];
    }
    await this.refresh();
    return newIds;
  }

  async undoAction(): Promise<boolean> {
    try {
      await this.api.undo(this.pid());
    } catch (err) {
      await this.onActionError(err);
      return false;
    }
    await this.refresh();
    return true;
  }

  async redoAction(): Promise<boolean> {
    try {
      await this.api.redo(this.pid());
    } catch (err) {
      await this.onActionError(err);
      return false;
    }
    await this.refresh();
    return true;
  }

  /** Move the playhead to the next suggestion boundary; null at the end. */
  next(): number | null {
    if (this.timeline === null) {
      return null;
    }
    const t = nextBoundary(suggestionBoundaries(this.timeline), this.localPlayheadT);
    if (t !== null) {
      this.localPlayheadT = t;
    }
    return t;
  }

  /** Move the playhead to the previous suggestion boundary; null at the start. */
  prev(): number | null {
    if (this.timeline === null) {
      return null;
    }
    const t = prevBoundary(suggestionBoundaries(this.timeline), this.localPlayheadT);
    if (t !== null) {
      this.localPlayheadT = t;
    }
    return t;
  }

  private guard(editId: string): void {
    if (this.inflight.has(editId)) {
      throw new Error(`mutation already in flight for ${editId}`);
    }
    this.inflight.add(editId);
  }

  private reconcileEdit(result: EditMutationResult): void {
    const { revision, ...view } = result;
    if (this.project === null) {
      return;
    }
    this.project.revision = revision;
    for (const layer of this.project.layers) {
      const i = layer.edits.findIndex((e) => e.id === view.id);
      if (i >= 0) {
        layer.edits[i] = view;
        return;
      }
    }
  }

  private async onActionError(err: unknown): Promise<void> {
    if (err instanceof ApiError && err.isConflict) {
      this.toasts.push({ kind: "error", message: `out of date: ${err.message}` });
    } else if (err instanceof ApiError || err instanceof JobFailed) {
      this.toasts.push({ kind: "error", message: err.message });
    } else {
      throw err;
    }
    // Drop any optimistic delta; server state is the truth.
    if (this.projectId !== null) {
      await this.refresh();
    }
  }
}
