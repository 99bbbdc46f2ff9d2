// Typed fetch client for the sketchedit service. This is the only place the
// client talks to the network; everything above it consumes wire views.

import type {
  CommandInput,
  CommandView,
  EditMutationResult,
  EditPatchInput,
  JobView,
  ProjectView,
  SearchMoreResult,
  TimelineView,
  TranscriptView
} from "./types";

/** Non-2xx response, decoded from the service's error envelope. */
export class ApiError extends Error {
  readonly status: number;
  readonly code: string;
  readonly details: Record<string, unknown>;

  constructor(
    status: number,
    code: string,
    message: string,
    details: Record<string, unknown> = {}
  ) {
    super(message);
    this.name = "ApiError";
    this.status = status;
    this.code = code;
    this.details = details;
  }

  get isConflict(): boolean {
    return this.status === 409;
  }
}

/** A command job reached the failed state. */
export class JobFailed extends Error {
  readonly diagnostics: string[];

  constructor(job: JobView) {
    super(`job ${job.job_id} failed: ${job.diagnostics.join("; ") || "no detail"}`);
    this.name = "JobFailed";
    this.diagnostics = [...job.diagnostics];
  }
}

function sleep(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}

export interface ApiClientOptions {
  authToken?: string;
  /** Delay between job polls, default 25 ms. */
  jobPollMs?: number;
  /** Give up waiting for a job after this long, default 30 s. */
  jobTimeoutMs?: number;
}

export class ApiClient {
  readonly baseUrl: string;
  private readonly authToken: string | undefined;
  private readonly jobPollMs: number;
  private readonly jobTimeoutMs: number;

  constructor(baseUrl: string, options: ApiClientOptions = {}) {
    this.baseUrl = baseUrl.replace(/\/+$/, "");
    this.authToken = options.authToken;
    this.jobPollMs = options.jobPollMs ?? 25;
    this.jobTimeoutMs = options.jobTimeoutMs ?? 30_000;
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const headers: Record<string, string> = {};
    if (body !== undefined) {
      headers["content-type"] = "application/json";
    }
    if (this.authToken !== undefined) {
      headers["authorization"] = `Bearer ${this.authToken}`;
    }
    const res = await fetch(this.baseUrl + path, {
      method,
      headers,
      body: body === undefined ? undefined : JSON.stringify(body)
    });
    const raw = await res.text();
    if (!res.ok) {
      let code = "http_error";
      let message = raw || res.statusText;
      let details: Record<string, unknown> = {};
      try {
        const doc = JSON.parse(raw);
        if (doc && typeof doc === "object" && doc.error) {
          code = String(doc.error.code);
          message = String(doc.error.message);
          details = doc.error.details ?? {};
        }
      } catch {
        // not an envelope; keep the raw body as the message
      }
      throw new ApiError(res.status, code, message, details);
    }
    return JSON.parse(raw) as T;
  }

  health(): Promise<{ status: string; provider_mode: string; projects: number }> {
    return this.request("GET", "/health");
  }

  createProject(body: {
    bundle?: Record<string, unknown>;
    bundle_path?: string;
  }): Promise<ProjectView> {
    return this.request("POST", "/projects", body);
  }

  getProject(projectId: string): Promise<ProjectView> {
    return this.request("GET", `/projects/${projectId}`);
  }

  getTimeline(projectId: string): Promise<TimelineView> {
    return this.request("GET", `/projects/${projectId}/timeline`);
  }

  getTranscript(projectId: string): Promise<TranscriptView> {
    return this.request("GET", `/projects/${projectId}/transcript`);
  }

  async getExport(projectId: string): Promise<string> {
    const res = await fetch(`${this.baseUrl}/projects/${projectId}/export`, {
      headers:
        this.authToken === undefined
          ? undefined
          : { authorization: `Bearer ${this.authToken}` }
    });
    const raw = await res.text();
    if (!res.ok) {
      throw new ApiError(res.status, "http_error", raw);
    }
    return raw;
  }

  createLayer(
    projectId: string,
    expectedRevision?: number
  ): Promise<{ id: string; operation: string | null; revision: number }> {
    return this.request(
      "POST",
      `/projects/${projectId}/layers`,
      expectedRevision === undefined ? {} : { expected_revision: expectedRevision }
    );
  }

  postCommand(projectId: string, body: CommandInput): Promise<JobView> {
    return this.request("POST", `/projects/${projectId}/commands`, body);
  }

  getJob(jobId: string): Promise<JobView> {
    return this.request("GET", `/jobs/${jobId}`);
  }

  /** Poll a command job until it is terminal; throw JobFailed on failure. */
  async waitForJob(jobId: string): Promise<JobView> {
    const deadline = Date.now() + this.jobTimeoutMs;
    for (;;) {
      const job = await this.getJob(jobId);
      if (job.state === "done") {
        return job;
      }
      if (job.state === "failed") {
        throw new JobFailed(job);
      }
      if (Date.now() > deadline) {
        throw new Error(`job ${jobId} still ${job.state} after ${this.jobTimeoutMs} ms`);
      }
      await sleep(this.jobPollMs);
    }
  }

  getCommand(commandId: string): Promise<CommandView> {
    return this.request("GET", `/commands/${commandId}`);
  }

  searchMore(
    commandId: string,
    nearT: number,
    expectedRevision?: number
  ): Promise<SearchMoreResult> {
    const body: { near_t: number; expected_revision?: number } = { near_t: nearT };
    if (expectedRevision !== undefined) {
      body.expected_revision = expectedRevision;
    }
    return this.request("POST", `/commands/${commandId}/search-more`, body);
  }

  acceptEdit(editId: string, expectedRevision?: number): Promise<EditMutationResult> {
    return this.request(
      "POST",
      `/edits/${editId}/accept`,
      expectedRevision === undefined ? {} : { expected_revision: expectedRevision }
    );
  }

  rejectEdit(editId: string, expectedRevision?: number): Promise<EditMutationResult> {
    return this.request(
      "POST",
      `/edits/${editId}/reject`,
      expectedRevision === undefined ? {} : { expected_revision: expectedRevision }
    );
  }

  patchEdit(editId: string, patch: EditPatchInput): Promise<EditMutationResult> {
    return this.request("PATCH", `/edits/${editId}`, patch);
  }

  undo(projectId: string, expectedRevision?: number): Promise<ProjectView> {
    return this.request(
      "POST",
      `/projects/${projectId}/undo`,
      expectedRevision === undefined ? {} : { expected_revision: expectedRevision }
    );
  }

  redo(projectId: string, expectedRevision?: number): Promise<ProjectView> {
    return this.request(
      "POST",
      `/projects/${projectId}/redo`,
      expectedRevision === undefined ? {} : { expected_revision: expectedRevision }
    );
  }
}
