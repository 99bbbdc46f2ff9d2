"""HTTP facade over the edit engine.

One process hosts many project sessions. Command interpretation runs as a
job (asynchronous under a live provider, completed before the response in
replay and oracle modes). All mutating endpoints accept an optional
expected_revision for optimistic concurrency; mutations to one project are
serialized by a per-project lock either way. Rectangles travel as integer
pixels and are converted at this boundary.

Edit and command ids are project-local inside the engine, so the wire form
qualifies them with the project id ("p1.e3"); clients treat ids as opaque.
"""

from __future__ import annotations

import json
import logging
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Mapping, Optional

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse, Response
from pydantic import BaseModel, Field, ValidationError as PydanticValidationError

from sketchedit.bundle import BundleError, MetadataBundle, load_bundle
from sketchedit.core import (
    EditOperation,
    PixelRect,
    TimeInterval,
    ValidationError,
    rect_from_pixels,
    rect_to_pixels,
)
from sketchedit.engine import (
    CommandRecord,
    Edit,
    EditPatch,
    EngineError,
    HistoryExhausted,
    IllegalTransition,
    OutOfBounds,
    OverlapViolation,
    Project,
    SchemaMismatch,
    UnknownId,
    accept,
    add_layer,
    adjust_edit,
    export_edl,
    iterate_command,
    new_project,
    redo,
    reject,
    search_more,
    submit_command,
    undo,
)
from sketchedit.parsing import EditCommand, parsed_to_dict
from sketchedit.providers import (
    LiveConfig,
    LiveProvider,
    OracleProvider,
    Provider,
    ProviderMode,
    ReplayProvider,
)
from sketchedit.serde import canonical_json, params_from_dict, params_to_dict

logger = logging.getLogger(__name__)

ENV_PREFIX = "SKETCHEDIT_"


# ---------------------------------------------------------------------------
# Configuration.


class ServiceConfig(BaseModel):
    host: str = "127.0.0.1"
    port: int = 8787
    provider_mode: ProviderMode = ProviderMode.ORACLE
    bundle_dir: Optional[Path] = None
    replay_cache: Optional[Path] = None
    live: Optional[dict] = None
    auth_token: Optional[str] = None
    workers: int = 4


class ConfigError(ValueError):
    pass


_ENV_FIELDS = {
    "HOST": "host",
    "PORT": "port",
    "PROVIDER_MODE": "provider_mode",
    "BUNDLE_DIR": "bundle_dir",
    "REPLAY_CACHE": "replay_cache",
    "AUTH_TOKEN": "auth_token",
    "WORKERS": "workers",
}


def load_config(
    path: Optional[Path] = None, env: Optional[Mapping[str, str]] = None
) -> ServiceConfig:
    """Config file (JSON) with environment overrides on top."""
    doc: dict = {}
    if path is not None:
        try:
            doc = json.loads(Path(path).read_text("utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(doc, dict):
            raise ConfigError(f"config {path} must hold a JSON object")
    if env is not None:
        for suffix, field_name in _ENV_FIELDS.items():
            value = env.get(ENV_PREFIX + suffix)
            if value is not None:
                doc[field_name] = value
    try:
        config = ServiceConfig(**doc)
    except PydanticValidationError as exc:
        raise ConfigError(f"bad config: {exc}") from exc
    validate_config(config)
    return config


def validate_config(config: ServiceConfig) -> None:
    if config.provider_mode == ProviderMode.REPLAY:
        if config.replay_cache is None:
            raise ConfigError("replay mode needs replay_cache")
        if not Path(config.replay_cache).exists():
            raise ConfigError(f"replay cache {config.replay_cache} does not exist")
    if config.provider_mode == ProviderMode.LIVE:
        live = config.live or {}
        for key in ("chat_url", "chat_model", "embed_url", "embed_model"):
            if not live.get(key):
                raise ConfigError(f"live mode needs live.{key}")
        for key in ("chat_url", "embed_url"):
            if not str(live[key]).startswith(("http://", "https://")):
                raise ConfigError(f"live.{key} is not an http(s) URL")
    if config.workers < 1:
        raise ConfigError("workers must be >= 1")


def build_provider(config: ServiceConfig) -> Provider:
    if config.provider_mode == ProviderMode.ORACLE:
        return OracleProvider()
    if config.provider_mode == ProviderMode.REPLAY:
        return ReplayProvider(config.replay_cache)
    live = dict(config.live or {})
    return LiveProvider(LiveConfig(**live))


# ---------------------------------------------------------------------------
# Errors on the wire.


class ErrorCode(str, Enum):
    UNKNOWN_ID = "unknown_id"
    REVISION_CONFLICT = "revision_conflict"
    ILLEGAL_TRANSITION = "illegal_transition"
    OVERLAP_VIOLATION = "overlap_violation"
    SCHEMA_MISMATCH = "schema_mismatch"
    OUT_OF_BOUNDS = "out_of_bounds"
    HISTORY_EXHAUSTED = "history_exhausted"
    VALIDATION_ERROR = "validation_error"
    UNAUTHORIZED = "unauthorized"
    BAD_REQUEST = "bad_request"


class ApiError(Exception):
    def __init__(
        self,
        status_code: int,
        code: ErrorCode,
        message: str,
        details: Optional[dict] = None,
    ):
        self.status_code = status_code
        self.code = code
        self.message = message
        self.details = details or {}
        super().__init__(message)

    def body(self) -> dict:
        return {
            "error": {
                "code": self.code.value,
                "message": self.message,
                "details": self.details,
            }
        }


_ENGINE_STATUS = [
    (UnknownId, 404, ErrorCode.UNKNOWN_ID),
    (IllegalTransition, 409, ErrorCode.ILLEGAL_TRANSITION),
    (OverlapViolation, 409, ErrorCode.OVERLAP_VIOLATION),
    (SchemaMismatch, 422, ErrorCode.SCHEMA_MISMATCH),
    (OutOfBounds, 422, ErrorCode.OUT_OF_BOUNDS),
    (HistoryExhausted, 409, ErrorCode.HISTORY_EXHAUSTED),
]


def _api_error_from(exc: Exception) -> ApiError:
    for cls, status, code in _ENGINE_STATUS:
        if isinstance(exc, cls):
            return ApiError(status, code, str(exc))
    if isinstance(exc, BundleError):
        return ApiError(
            422,
            ErrorCode.VALIDATION_ERROR,
            str(exc),
            {"path": exc.path, "constraint": exc.constraint},
        )
    if isinstance(exc, ValidationError):
        return ApiError(422, ErrorCode.VALIDATION_ERROR, str(exc))
    raise exc


# ---------------------------------------------------------------------------
# Request bodies.


class PixelRectIn(BaseModel):
    x: int = Field(ge=0)
    y: int = Field(ge=0)
    w: int = Field(ge=1)
    h: int = Field(ge=1)


class ProjectIn(BaseModel):
    bundle: Optional[dict] = None
    bundle_path: Optional[str] = None


class CommandIn(BaseModel):
    text: str
    playhead_t: float = Field(ge=0)
    layer_id: str = "L1"
    sketch_px: Optional[PixelRectIn] = None
    sketch_frame_t: Optional[float] = None
    parent_command_id: Optional[str] = None
    expected_revision: Optional[int] = None


class MutateIn(BaseModel):
    expected_revision: Optional[int] = None


class EditPatchIn(BaseModel):
    start_s: Optional[float] = None
    end_s: Optional[float] = None
    rect_px: Optional[PixelRectIn] = None
    operation: Optional[str] = None
    params: Optional[dict] = None
    expected_revision: Optional[int] = None


class SearchMoreIn(BaseModel):
    near_t: float = Field(ge=0)
    expected_revision: Optional[int] = None


# ---------------------------------------------------------------------------
# Jobs and per-project sessions.


class JobState(str, Enum):
    PENDING = "pending"
    RUNNING = "running"
    DONE = "done"
    FAILED = "failed"


TERMINAL_STATES = (JobState.DONE, JobState.FAILED)


@dataclass
class Job:
    id: str
    project_id: str
    state: JobState = JobState.PENDING
    command_id: Optional[str] = None  # wire-qualified when set
    diagnostics: list[str] = field(default_factory=list)

    def start(self) -> None:
        if self.state in TERMINAL_STATES:
            raise RuntimeError(f"job {self.id} already terminal")
        self.state = JobState.RUNNING

    def finish(
        self, state: JobState, command_id: Optional[str], diagnostics: list[str]
    ) -> None:
        if self.state in TERMINAL_STATES:
            raise RuntimeError(f"job {self.id} already terminal")
        self.state = state
        self.command_id = command_id
        self.diagnostics = diagnostics

    def view(self) -> dict:
        return {
            "job_id": self.id,
            "project_id": self.project_id,
            "state": self.state.value,
            "command_id": self.command_id,
            "diagnostics": list(self.diagnostics),
        }


@dataclass
class Session:
    id: str
    project: Project
    lock: threading.RLock = field(default_factory=threading.RLock)


class RevisionConflict(Exception):
    def __init__(self, expected: int, actual: int):
        self.expected = expected
        self.actual = actual
        super().__init__(f"expected revision {expected}, project is at {actual}")


class ServiceState:
    """Everything behind the endpoints: sessions, jobs, the provider."""

    def __init__(self, config: ServiceConfig):
        self.config = config
        self.provider = build_provider(config)
        self.sessions: dict[str, Session] = {}
        self.jobs: dict[str, Job] = {}
        self._registry_lock = threading.Lock()
        self._next_project = 1
        self._next_job = 1
        self.synchronous = config.provider_mode != ProviderMode.LIVE
        self.pool: Optional[ThreadPoolExecutor] = None
        if not self.synchronous:
            self.pool = ThreadPoolExecutor(max_workers=config.workers)

    def register(self, bundle: MetadataBundle) -> Session:
        with self._registry_lock:
            project_id = f"p{self._next_project}"
            self._next_project += 1
        session = Session(id=project_id, project=new_project(bundle))
        self.sessions[project_id] = session
        if isinstance(self.provider, OracleProvider):
            self.provider.add_bundle(bundle)
        return session

    def new_job(self, project_id: str) -> Job:
        with self._registry_lock:
            job = Job(id=f"j{self._next_job}", project_id=project_id)
            self._next_job += 1
        self.jobs[job.id] = job
        return job

    def session(self, project_id: str) -> Session:
        session = self.sessions.get(project_id)
        if session is None:
            raise ApiError(
                404, ErrorCode.UNKNOWN_ID, f"no project {project_id!r}"
            )
        return session


def _split_wire_id(state: ServiceState, wire_id: str) -> tuple[Session, str]:
    project_id, dot, local = wire_id.partition(".")
    if not dot or not local:
        raise ApiError(
            404,
            ErrorCode.UNKNOWN_ID,
            f"id {wire_id!r} is not of the form <project>.<id>",
        )
    return state.session(project_id), local


def _check_revision(session: Session, expected: Optional[int]) -> None:
    if expected is not None and expected != session.project.revision:
        raise RevisionConflict(expected, session.project.revision)


def _conflict(exc: RevisionConflict) -> ApiError:
    return ApiError(
        409,
        ErrorCode.REVISION_CONFLICT,
        str(exc),
        {"expected": exc.expected, "actual": exc.actual},
    )


# ---------------------------------------------------------------------------
# Wire views.


def _px(rect, dims) -> dict:
    p = rect_to_pixels(rect, dims)
    return {"x": p.x, "y": p.y, "w": p.w, "h": p.h}


def edit_view(session: Session, edit: Edit, layer_id: str) -> dict:
    dims = session.project.bundle.frame_dims
    return {
        "id": f"{session.id}.{edit.id}",
        "layer_id": layer_id,
        "operation": edit.operation.value,
        "start_s": edit.interval.start_s,
        "end_s": edit.interval.end_s,
        "rect_px": _px(edit.rect, dims),
        "params": params_to_dict(edit.params),
        "status": edit.status.value,
        "superseded": edit.superseded,
        "provenance": {
            "command_id": f"{session.id}.{edit.provenance.command_id}",
            "temporal_explanation": edit.provenance.temporal_explanation,
            "spatial_method": edit.provenance.spatial_method,
        },
    }


def _edit_view_by_id(session: Session, edit_id: str) -> dict:
    for layer in session.project.layers:
        for edit in layer.edits:
            if edit.id == edit_id:
                return edit_view(session, edit, layer.id)
    raise UnknownId(f"no edit {edit_id!r}")


def command_view(session: Session, record: CommandRecord) -> dict:
    cmd = record.command
    dims = session.project.bundle.frame_dims
    sketch_px = None if cmd.sketch is None else _px(cmd.sketch, dims)
    return {
        "id": f"{session.id}.{record.id}",
        "project_id": session.id,
        "command": {
            "text": cmd.text,
            "playhead_t": cmd.playhead_t,
            "layer_id": cmd.layer_id,
            "sketch_px": sketch_px,
            "sketch_frame_t": cmd.sketch_frame_t,
        },
        "parse": parsed_to_dict(record.parse),
        "suggestions": [
            _edit_view_by_id(session, eid) for eid in record.suggestion_ids
        ],
        "summary": record.summary,
        "diagnostics": list(record.diagnostics),
        "parent_command_id": (
            None
            if record.parent_command_id is None
            else f"{session.id}.{record.parent_command_id}"
        ),
    }


def project_view(session: Session) -> dict:
    project = session.project
    dims = project.bundle.frame_dims
    return {
        "id": session.id,
        "revision": project.revision,
        "video_id": project.bundle.video_id,
        "duration_s": project.bundle.duration_s,
        "frame_dims": {"width_px": dims.width_px, "height_px": dims.height_px},
        "playhead_t": project.playhead_t,
        "layers": [
            {
                "id": layer.id,
                "operation": None if layer.operation is None else layer.operation.value,
                "edits": [edit_view(session, e, layer.id) for e in layer.edits],
            }
            for layer in project.layers
        ],
        "command_ids": [f"{session.id}.{r.id}" for r in project.commands],
        "undo_available": len(project.history) >= 2,
        "redo_available": bool(project.redo_stack),
    }


def timeline_view(session: Session) -> dict:
    project = session.project
    return {
        "project_id": session.id,
        "revision": project.revision,
        "duration_s": project.bundle.duration_s,
        "playhead_t": project.playhead_t,
        "layers": [
            {
                "id": layer.id,
                "operation": None if layer.operation is None else layer.operation.value,
                "edits": [
                    {
                        "id": f"{session.id}.{e.id}",
                        "operation": e.operation.value,
                        "start_s": e.interval.start_s,
                        "end_s": e.interval.end_s,
                        "status": e.status.value,
                        "superseded": e.superseded,
                    }
                    for e in sorted(
                        layer.edits, key=lambda e: (e.interval.start_s, e.id)
                    )
                ],
            }
            for layer in project.layers
        ],
    }


def transcript_view(session: Session) -> dict:
    bundle = session.project.bundle
    return {
        "project_id": session.id,
        "video_id": bundle.video_id,
        "segments": [
            {
                "start_s": seg.interval.start_s,
                "end_s": seg.interval.end_s,
                "text": seg.text,
            }
            for seg in bundle.transcript
        ],
    }


# ---------------------------------------------------------------------------
# Command jobs.


def _command_from_body(session: Session, body: CommandIn) -> EditCommand:
    dims = session.project.bundle.frame_dims
    sketch = None
    if body.sketch_px is not None:
        sketch = rect_from_pixels(
            PixelRect(body.sketch_px.x, body.sketch_px.y, body.sketch_px.w, body.sketch_px.h),
            dims,
        )
    return EditCommand(
        text=body.text,
        playhead_t=body.playhead_t,
        layer_id=body.layer_id,
        sketch=sketch,
        sketch_frame_t=body.sketch_frame_t,
    )


def _run_command_job(
    state: ServiceState,
    job: Job,
    session: Session,
    body: CommandIn,
) -> None:
    """Interpret one command under the project lock; job ends terminal."""
    with session.lock:
        job.start()
        try:
            _check_revision(session, body.expected_revision)
            cmd = _command_from_body(session, body)
            if body.parent_command_id is not None:
                parent_session, parent_local = _split_wire_id(
                    state, body.parent_command_id
                )
                if parent_session.id != session.id:
                    raise ApiError(
                        422,
                        ErrorCode.BAD_REQUEST,
                        "parent command belongs to another project",
                    )
                record = iterate_command(
                    session.project, parent_local, cmd, state.provider
                )
            else:
                record = submit_command(session.project, cmd, state.provider)
        except RevisionConflict as exc:
            job.finish(JobState.FAILED, None, [str(exc)])
            raise
        except ApiError as exc:
            job.finish(JobState.FAILED, None, [exc.message])
            raise
        except (EngineError, ValidationError) as exc:
            job.finish(JobState.FAILED, None, [str(exc)])
            raise
        except Exception as exc:  # job must reach a terminal state
            job.finish(JobState.FAILED, None, [f"internal error: {exc}"])
            raise
        job.finish(
            JobState.DONE, f"{session.id}.{record.id}", list(record.diagnostics)
        )


def _run_command_job_async(
    state: ServiceState, job: Job, session: Session, body: CommandIn
) -> None:
    try:
        _run_command_job(state, job, session, body)
    except Exception:
        logger.exception("command job %s failed", job.id)


# ---------------------------------------------------------------------------
# The application.


def create_app(config: ServiceConfig) -> FastAPI:
    validate_config(config)
    state = ServiceState(config)
    app = FastAPI(title="sketchedit service", version="1.0")
    app.state.service = state

    @app.exception_handler(ApiError)
    async def on_api_error(request: Request, exc: ApiError):
        return JSONResponse(exc.body(), status_code=exc.status_code)

    @app.exception_handler(RequestValidationError)
    async def on_request_validation(request: Request, exc: RequestValidationError):
        details = {
            "fields": [
                {
                    "path": ".".join(str(p) for p in err.get("loc", ())),
                    "message": err.get("msg", ""),
                }
                for err in exc.errors()
            ]
        }
        body = ApiError(
            422, ErrorCode.VALIDATION_ERROR, "request body failed validation", details
        ).body()
        return JSONResponse(body, status_code=422)

    if config.auth_token:

        @app.middleware("http")
        async def check_token(request: Request, call_next):
            if request.url.path != "/health":
                header = request.headers.get("authorization", "")
                if header != f"Bearer {config.auth_token}":
                    body = ApiError(
                        401, ErrorCode.UNAUTHORIZED, "missing or wrong token"
                    ).body()
                    return JSONResponse(body, status_code=401)
            return await call_next(request)

    @app.get("/health")
    def health():
        return {
            "status": "ok",
            "provider_mode": config.provider_mode.value,
            "projects": len(state.sessions),
        }

    # -- projects ----------------------------------------------------------

    @app.post("/projects", status_code=201)
    def create_project(body: ProjectIn):
        if (body.bundle is None) == (body.bundle_path is None):
            raise ApiError(
                422,
                ErrorCode.BAD_REQUEST,
                "exactly one of bundle, bundle_path is required",
            )
        try:
            if body.bundle is not None:
                bundle = load_bundle(json.dumps(body.bundle))
            else:
                if config.bundle_dir is None:
                    raise ApiError(
                        422, ErrorCode.BAD_REQUEST, "service has no bundle_dir"
                    )
                target = (Path(config.bundle_dir) / body.bundle_path).resolve()
                if Path(config.bundle_dir).resolve() not in target.parents:
                    raise ApiError(
                        422, ErrorCode.BAD_REQUEST, "bundle_path escapes bundle_dir"
                    )
                if not target.exists():
                    raise ApiError(
                        404, ErrorCode.UNKNOWN_ID, f"no bundle {body.bundle_path!r}"
                    )
                bundle = load_bundle(target.read_bytes())
        except BundleError as exc:
            raise _api_error_from(exc)
        session = state.register(bundle)
        return project_view(session)

    @app.get("/projects/{project_id}")
    def get_project(project_id: str):
        session = state.session(project_id)
        with session.lock:
            return project_view(session)

    @app.post("/projects/{project_id}/layers", status_code=201)
    def create_layer(project_id: str, body: Optional[MutateIn] = None):
        session = state.session(project_id)
        with session.lock:
            try:
                _check_revision(session, body.expected_revision if body else None)
            except RevisionConflict as exc:
                raise _conflict(exc)
            layer = add_layer(session.project)
            return {
                "id": layer.id,
                "operation": None,
                "revision": session.project.revision,
            }

    @app.get("/projects/{project_id}/timeline")
    def get_timeline(project_id: str):
        session = state.session(project_id)
        with session.lock:
            return timeline_view(session)

    @app.get("/projects/{project_id}/transcript")
    def get_transcript(project_id: str):
        session = state.session(project_id)
        with session.lock:
            return transcript_view(session)

    @app.get("/projects/{project_id}/export")
    def get_export(project_id: str):
        session = state.session(project_id)
        with session.lock:
            doc = export_edl(session.project)
        return Response(canonical_json(doc), media_type="application/json")

    @app.post("/projects/{project_id}/undo")
    def post_undo(project_id: str, body: Optional[MutateIn] = None):
        return _history_step(project_id, body, undo)

    @app.post("/projects/{project_id}/redo")
    def post_redo(project_id: str, body: Optional[MutateIn] = None):
        return _history_step(project_id, body, redo)

    def _history_step(project_id: str, body: Optional[MutateIn], step):
        session = state.session(project_id)
        with session.lock:
            try:
                _check_revision(session, body.expected_revision if body else None)
                step(session.project)
            except RevisionConflict as exc:
                raise _conflict(exc)
            except EngineError as exc:
                raise _api_error_from(exc)
            return project_view(session)

    # -- commands and jobs ---------------------------------------------------

    @app.post("/projects/{project_id}/commands", status_code=202)
    def post_command(project_id: str, body: CommandIn):
        session = state.session(project_id)
        try:
            cmd_probe = _command_from_body(session, body)  # fail fast on bad input
        except ValidationError as exc:
            raise _api_error_from(exc)
        del cmd_probe
        job = state.new_job(session.id)
        if state.synchronous:
            try:
                _run_command_job(state, job, session, body)
            except RevisionConflict as exc:
                raise _conflict(exc)
            except ApiError:
                raise
            except (EngineError, ValidationError) as exc:
                raise _api_error_from(exc)
        else:
            state.pool.submit(_run_command_job_async, state, job, session, body)
        return job.view()

    @app.get("/jobs/{job_id}")
    def get_job(job_id: str):
        job = state.jobs.get(job_id)
        if job is None:
            raise ApiError(404, ErrorCode.UNKNOWN_ID, f"no job {job_id!r}")
        return job.view()

    @app.get("/commands/{wire_id}")
    def get_command(wire_id: str):
        session, local = _split_wire_id(state, wire_id)
        with session.lock:
            try:
                record = next(
                    r for r in session.project.commands if r.id == local
                )
            except StopIteration:
                raise ApiError(404, ErrorCode.UNKNOWN_ID, f"no command {wire_id!r}")
            return command_view(session, record)

    @app.post("/commands/{wire_id}/search-more")
    def post_search_more(wire_id: str, body: SearchMoreIn):
        session, local = _split_wire_id(state, wire_id)
        with session.lock:
            try:
                _check_revision(session, body.expected_revision)
                edits = search_more(
                    session.project, local, body.near_t, state.provider
                )
            except RevisionConflict as exc:
                raise _conflict(exc)
            except EngineError as exc:
                raise _api_error_from(exc)
            return {
                "command_id": wire_id,
                "revision": session.project.revision,
                "new_edits": [
                    _edit_view_by_id(session, e.id) for e in edits
                ],
            }

    # -- edits ---------------------------------------------------------------

    @app.post("/edits/{wire_id}/accept")
    def post_accept(wire_id: str, body: Optional[MutateIn] = None):
        return _transition(wire_id, body, accept)

    @app.post("/edits/{wire_id}/reject")
    def post_reject(wire_id: str, body: Optional[MutateIn] = None):
        return _transition(wire_id, body, reject)

    def _transition(wire_id: str, body: Optional[MutateIn], op):
        session, local = _split_wire_id(state, wire_id)
        with session.lock:
            try:
                _check_revision(session, body.expected_revision if body else None)
                op(session.project, local)
            except RevisionConflict as exc:
                raise _conflict(exc)
            except EngineError as exc:
                raise _api_error_from(exc)
            view = _edit_view_by_id(session, local)
            view["revision"] = session.project.revision
            return view

    @app.patch("/edits/{wire_id}")
    def patch_edit(wire_id: str, body: EditPatchIn):
        session, local = _split_wire_id(state, wire_id)
        with session.lock:
            try:
                _check_revision(session, body.expected_revision)
                patch = _patch_from_body(session, local, body)
                adjust_edit(session.project, local, patch)
            except RevisionConflict as exc:
                raise _conflict(exc)
            except (EngineError, ValidationError) as exc:
                raise _api_error_from(exc)
            view = _edit_view_by_id(session, local)
            view["revision"] = session.project.revision
            return view

    def _patch_from_body(
        session: Session, edit_id: str, body: EditPatchIn
    ) -> EditPatch:
        interval = None
        if body.start_s is not None or body.end_s is not None:
            current = None
            for layer in session.project.layers:
                for e in layer.edits:
                    if e.id == edit_id:
                        current = e.interval
            if current is None:
                raise UnknownId(f"no edit {edit_id!r}")
            start = body.start_s if body.start_s is not None else current.start_s
            end = body.end_s if body.end_s is not None else current.end_s
            try:
                interval = TimeInterval(start, end)
            except ValidationError as exc:
                raise ApiError(
                    422,
                    ErrorCode.VALIDATION_ERROR,
                    str(exc),
                    {"fields": [{"path": "start_s/end_s", "message": str(exc)}]},
                )
        rect = None
        if body.rect_px is not None:
            rect = rect_from_pixels(
                PixelRect(body.rect_px.x, body.rect_px.y, body.rect_px.w, body.rect_px.h),
                session.project.bundle.frame_dims,
            )
        operation = None
        if body.operation is not None:
            try:
                operation = EditOperation(body.operation)
            except ValueError:
                raise ApiError(
                    422,
                    ErrorCode.VALIDATION_ERROR,
                    f"unknown operation {body.operation!r}",
                    {"fields": [{"path": "operation", "message": "unknown operation"}]},
                )
        params = None
        if body.params is not None:
            try:
                params = params_from_dict(body.params)
            except (ValidationError, KeyError, TypeError) as exc:
                raise ApiError(
                    422,
                    ErrorCode.VALIDATION_ERROR,
                    f"bad params: {exc}",
                    {"fields": [{"path": "params", "message": str(exc)}]},
                )
        return EditPatch(
            interval=interval, rect=rect, params=params, operation=operation
        )

    return app


def serve(config: ServiceConfig) -> None:
    """Run the service until interrupted. Raises ConfigError on bad config."""
    import uvicorn

    validate_config(config)
    app = create_app(config)
    uvicorn.run(app, host=config.host, port=config.port, log_level="info")
