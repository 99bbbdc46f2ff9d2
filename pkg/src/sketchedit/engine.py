"""Project engine: stages 1-4 orchestrated into reviewable edit suggestions.

Owns the mutable editing state: layers holding edits, command records, the
suggestion lifecycle (accept / reject / adjust / search more / iterate),
snapshot history with undo/redo, and the exported edit decision list.

The binding rule for the layer non-overlap invariant: accepted edits in one
layer never intersect temporally. Suggestions may overlap freely until the
moment one of them is accepted.
"""

from __future__ import annotations

import dataclasses
import json
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

from sketchedit.bundle import MetadataBundle, clips_overlapping, snippets_in_range
from sketchedit.core import (
    EditOperation,
    EditParameters,
    Rect,
    TimeInterval,
    ValidationError,
    interval_intersects,
    params_match_operation,
    rect_to_pixels,
)
from sketchedit.params import (
    apply_changes,
    classify_changes,
    default_params,
    generate_image_query,
    generate_text_content,
)
from sketchedit.parsing import (
    EditCommand,
    ParsedCommand,
    command_from_dict,
    command_to_dict,
    fallback_parse,
    parse,
    parsed_from_dict,
    parsed_to_dict,
)
from sketchedit.providers import Provider, ProviderError
from sketchedit.serde import (
    canonical_json,
    interval_from_dict,
    interval_to_dict,
    params_from_dict,
    params_to_dict,
    rect_from_dict,
    rect_to_dict,
)
from sketchedit.spatial import resolve
from sketchedit.temporal import (
    CandidateSegment,
    ground_ref,
    merge_candidates,
    playhead_candidate,
)

logger = logging.getLogger(__name__)

SEARCH_WINDOW_S = 60.0
EDL_FORMAT = "sketchedit-edl"
EDL_VERSION = 1


class EngineError(Exception):
    """Base for all engine-level failures; state is unchanged when raised."""


class UnknownId(EngineError):
    pass


class IllegalTransition(EngineError):
    pass


class OverlapViolation(EngineError):
    pass


class OutOfBounds(EngineError):
    pass


class SchemaMismatch(EngineError):
    pass


class HistoryExhausted(EngineError):
    pass


class EditStatus(str, Enum):
    SUGGESTED = "suggested"
    ACCEPTED = "accepted"
    REJECTED = "rejected"


@dataclass(frozen=True)
class Provenance:
    """Why this edit exists: the command and the reasoning per stage."""

    command_id: str
    temporal_explanation: str
    spatial_method: str
    parse_snapshot: dict


@dataclass(frozen=True)
class Edit:
    id: str
    operation: EditOperation
    interval: TimeInterval
    rect: Rect
    params: EditParameters
    status: EditStatus
    provenance: Provenance
    superseded: bool = False

    def __post_init__(self):
        if not params_match_operation(self.params, self.operation):
            raise ValidationError(
                f"params {type(self.params).__name__} do not fit {self.operation.value}"
            )


@dataclass
class EditLayer:
    """One track of non-conflicting edits of a single operation.

    operation is pinned by the first non-rejected edit and recomputed when
    edits change status, so a fully rejected layer can be reused.
    """

    id: str
    operation: Optional[EditOperation] = None
    edits: list[Edit] = field(default_factory=list)


@dataclass
class CommandRecord:
    """A submitted command, its parse, and the suggestions it produced."""

    id: str
    command: EditCommand
    parse: ParsedCommand
    suggestion_ids: list[str] = field(default_factory=list)
    parent_command_id: Optional[str] = None
    summary: str = ""
    diagnostics: list[str] = field(default_factory=list)


@dataclass
class Project:
    """Mutable editing session over one immutable metadata bundle.

    history holds canonical snapshots of the mutable state; the last entry
    always equals the current state. revision counts every mutation,
    including undo and redo, and is deliberately excluded from snapshots.
    """

    bundle: MetadataBundle
    layers: list[EditLayer] = field(default_factory=list)
    commands: list[CommandRecord] = field(default_factory=list)
    history: list[str] = field(default_factory=list)
    revision: int = 0
    playhead_t: float = 0.0
    counters: dict[str, int] = field(default_factory=dict)
    redo_stack: list[str] = field(default_factory=list)


@dataclass(frozen=True)
class EditPatch:
    """Partial update for adjust_edit; None leaves the field alone."""

    interval: Optional[TimeInterval] = None
    rect: Optional[Rect] = None
    params: Optional[EditParameters] = None
    operation: Optional[EditOperation] = None

    def is_empty(self) -> bool:
        return (
            self.interval is None
            and self.rect is None
            and self.params is None
            and self.operation is None
        )


# ---------------------------------------------------------------------------
# Construction, lookup, snapshots.


def new_project(bundle: MetadataBundle) -> Project:
    project = Project(
        bundle=bundle,
        layers=[EditLayer(id="L1")],
        counters={"edit": 1, "layer": 2, "command": 1},
    )
    project.history.append(snapshot(project))
    return project


def _take_id(project: Project, kind: str, prefix: str) -> str:
    n = project.counters[kind]
    project.counters[kind] = n + 1
    return f"{prefix}{n}"


def _find_layer(project: Project, layer_id: str) -> EditLayer:
    for layer in project.layers:
        if layer.id == layer_id:
            return layer
    raise UnknownId(f"no layer {layer_id!r}")


def _find_edit(project: Project, edit_id: str) -> tuple[EditLayer, int, Edit]:
    for layer in project.layers:
        for i, edit in enumerate(layer.edits):
            if edit.id == edit_id:
                return layer, i, edit
    raise UnknownId(f"no edit {edit_id!r}")


def _find_record(project: Project, command_id: str) -> CommandRecord:
    for record in project.commands:
        if record.id == command_id:
            return record
    raise UnknownId(f"no command {command_id!r}")


def _refresh_layer_operation(layer: EditLayer) -> None:
    for edit in layer.edits:
        if edit.status != EditStatus.REJECTED:
            layer.operation = edit.operation
            return
    layer.operation = None


def edit_to_dict(e: Edit) -> dict:
    return {
        "id": e.id,
        "operation": e.operation.value,
        "interval": interval_to_dict(e.interval),
        "rect": rect_to_dict(e.rect),
        "params": params_to_dict(e.params),
        "status": e.status.value,
        "superseded": e.superseded,
        "provenance": {
            "command_id": e.provenance.command_id,
            "temporal_explanation": e.provenance.temporal_explanation,
            "spatial_method": e.provenance.spatial_method,
            "parse_snapshot": e.provenance.parse_snapshot,
        },
    }


def edit_from_dict(d: dict) -> Edit:
    prov = d["provenance"]
    return Edit(
        id=d["id"],
        operation=EditOperation(d["operation"]),
        interval=interval_from_dict(d["interval"]),
        rect=rect_from_dict(d["rect"]),
        params=params_from_dict(d["params"]),
        status=EditStatus(d["status"]),
        provenance=Provenance(
            command_id=prov["command_id"],
            temporal_explanation=prov["temporal_explanation"],
            spatial_method=prov["spatial_method"],
            parse_snapshot=prov["parse_snapshot"],
        ),
        superseded=bool(d.get("superseded", False)),
    )


def _record_to_dict(r: CommandRecord) -> dict:
    return {
        "id": r.id,
        "command": command_to_dict(r.command),
        "parse": parsed_to_dict(r.parse),
        "suggestion_ids": list(r.suggestion_ids),
        "parent_command_id": r.parent_command_id,
        "summary": r.summary,
        "diagnostics": list(r.diagnostics),
    }


def _record_from_dict(d: dict) -> CommandRecord:
    return CommandRecord(
        id=d["id"],
        command=command_from_dict(d["command"]),
        parse=parsed_from_dict(d["parse"]),
        suggestion_ids=list(d["suggestion_ids"]),
        parent_command_id=d.get("parent_command_id"),
        summary=d.get("summary", ""),
        diagnostics=list(d.get("diagnostics", [])),
    )


def _state_to_dict(project: Project) -> dict:
    return {
        "layers": [
            {
                "id": layer.id,
                "operation": None if layer.operation is None else layer.operation.value,
                "edits": [edit_to_dict(e) for e in layer.edits],
            }
            for layer in project.layers
        ],
        "commands": [_record_to_dict(r) for r in project.commands],
        "playhead_t": project.playhead_t,
        "counters": dict(project.counters),
    }


def snapshot(project: Project) -> str:
    """Canonical serialization of the mutable state, excluding revision."""
    return canonical_json(_state_to_dict(project))


def _restore(project: Project, state_json: str) -> None:
    state = json.loads(state_json)
    project.layers = [
        EditLayer(
            id=ld["id"],
            operation=None if ld["operation"] is None else EditOperation(ld["operation"]),
            edits=[edit_from_dict(ed) for ed in ld["edits"]],
        )
        for ld in state["layers"]
    ]
    project.commands = [_record_from_dict(rd) for rd in state["commands"]]
    project.playhead_t = float(state["playhead_t"])
    project.counters = {k: int(v) for k, v in state["counters"].items()}


def _commit(project: Project) -> None:
    project.history.append(snapshot(project))
    project.redo_stack.clear()
    project.revision += 1


def add_layer(project: Project) -> EditLayer:
    """Append an empty, unpinned layer; useful for manual track management."""
    layer = EditLayer(id=_take_id(project, "layer", "L"))
    project.layers.append(layer)
    _commit(project)
    return layer


# ---------------------------------------------------------------------------
# Suggestion pipeline.


def _ground(
    parsed: ParsedCommand,
    anchor_t: float,
    bundle: MetadataBundle,
    provider: Provider,
    diagnostics: list[str],
    window: Optional[TimeInterval] = None,
) -> list[CandidateSegment]:
    if not parsed.temporal_refs:
        cand = playhead_candidate(anchor_t, bundle.duration_s)
        if window is not None and not interval_intersects(cand.interval, window):
            return []
        return [cand]
    per_ref: list[list[CandidateSegment]] = []
    for ref in parsed.temporal_refs:
        try:
            per_ref.append(ground_ref(ref, bundle, provider, window=window))
        except ProviderError as exc:
            diagnostics.append(
                f"could not ground '{ref.span.surface}' in time: {exc}"
            )
            per_ref.append([])
    merged = merge_candidates(per_ref)
    if not merged and window is None:
        diagnostics.append("no video segment matched the stated timing")
    return merged


def _build_params(
    op: EditOperation,
    parsed: ParsedCommand,
    cmd: EditCommand,
    candidate: CandidateSegment,
    spatial_rect_result,
    bundle: MetadataBundle,
    provider: Provider,
    diagnostics: list[str],
) -> tuple[EditParameters, TimeInterval]:
    params = default_params(op, spatial_rect_result, candidate.interval, bundle.frame_dims)
    ref_spans = parsed.param_refs.get(op, ())
    ref_text = "; ".join(s.surface for s in ref_spans)

    if op in (EditOperation.TEXT, EditOperation.IMAGE):
        relevant = " ".join(
            s.text for s in snippets_in_range(bundle, candidate.interval)
        )
        if not relevant:
            relevant = " ".join(
                c.abstract_caption
                for c in clips_overlapping(bundle, candidate.interval)
            )
        if op == EditOperation.TEXT:
            content = generate_text_content(
                ref_text or cmd.text, cmd.text, relevant, provider
            )
            params = dataclasses.replace(params, content=content)
        else:
            query = generate_image_query(
                ref_text or cmd.text, cmd.text, relevant, provider
            )
            params = dataclasses.replace(params, visual_keywords=query)

    interval = candidate.interval
    if ref_spans:
        change_set = classify_changes(
            ref_text, op, params, interval.length_s, cmd.text, provider
        )
        if change_set.low_confidence:
            diagnostics.append(
                f"parameter request '{ref_text}' was unreadable; defaults kept"
            )
        applied = apply_changes(params, change_set.changes, interval)
        params, interval = applied.params, applied.interval
        diagnostics.extend(applied.rejected)
        if interval.end_s > bundle.duration_s:
            interval = TimeInterval(interval.start_s, bundle.duration_s)
    return params, interval


def _route_layer(
    project: Project,
    cmd: EditCommand,
    head_op: EditOperation,
    op: EditOperation,
    layer_map: dict[EditOperation, str],
) -> EditLayer:
    if op in layer_map:
        return _find_layer(project, layer_map[op])
    if op == head_op:
        target = _find_layer(project, cmd.layer_id)
        if target.operation is None or target.operation == op:
            layer_map[op] = target.id
            return target
    sibling = EditLayer(id=_take_id(project, "layer", "L"))
    project.layers.append(sibling)
    layer_map[op] = sibling.id
    return sibling


def _materialize(
    project: Project,
    record_id: str,
    parsed: ParsedCommand,
    cmd: EditCommand,
    candidates: list[CandidateSegment],
    provider: Provider,
    diagnostics: list[str],
    layer_map: Optional[dict[EditOperation, str]] = None,
) -> list[Edit]:
    if layer_map is None:
        layer_map = {}
    head_op = parsed.operations[0]
    parse_doc = parsed_to_dict(parsed)
    made: list[Edit] = []
    for candidate in candidates:
        placed = resolve(candidate.interval, parsed, cmd, project.bundle, provider)
        if placed.low_confidence:
            diagnostics.append(
                f"placement near {candidate.interval.start_s:.1f}s is low confidence"
            )
        for op in parsed.operations:
            params, interval = _build_params(
                op, parsed, cmd, candidate, placed, project.bundle, provider, diagnostics
            )
            edit = Edit(
                id=_take_id(project, "edit", "e"),
                operation=op,
                interval=interval,
                rect=placed.rect,
                params=params,
                status=EditStatus.SUGGESTED,
                provenance=Provenance(
                    command_id=record_id,
                    temporal_explanation=candidate.explanation,
                    spatial_method=placed.method.value,
                    parse_snapshot=parse_doc,
                ),
            )
            layer = _route_layer(project, cmd, head_op, op, layer_map)
            layer.edits.append(edit)
            _refresh_layer_operation(layer)
            made.append(edit)
    return made


def _summary(parsed: ParsedCommand, edits: list[Edit], diagnostics: list[str]) -> str:
    ops = ", ".join(op.value for op in parsed.operations)
    if edits:
        return f"{len(edits)} suggestion(s) for {ops}"
    reason = diagnostics[-1] if diagnostics else "nothing matched"
    return f"no suggestions for {ops}: {reason}"


def _submit(
    project: Project,
    cmd: EditCommand,
    provider: Provider,
    parent_command_id: Optional[str],
) -> CommandRecord:
    _find_layer(project, cmd.layer_id)
    diagnostics: list[str] = []
    try:
        parsed = parse(cmd, provider)
    except ProviderError as exc:
        parsed = dataclasses.replace(fallback_parse(cmd), low_confidence=True)
        diagnostics.append(f"parsing unavailable ({exc}); used keyword fallback")
    candidates = _ground(parsed, cmd.playhead_t, project.bundle, provider, diagnostics)
    record_id = _take_id(project, "command", "c")
    edits = _materialize(project, record_id, parsed, cmd, candidates, provider, diagnostics)
    record = CommandRecord(
        id=record_id,
        command=cmd,
        parse=parsed,
        suggestion_ids=[e.id for e in edits],
        parent_command_id=parent_command_id,
        summary=_summary(parsed, edits, diagnostics),
        diagnostics=diagnostics,
    )
    project.commands.append(record)
    if edits:
        project.playhead_t = edits[0].interval.start_s
    _commit(project)
    return record


def submit_command(project: Project, cmd: EditCommand, provider: Provider) -> CommandRecord:
    """Run the full pipeline and attach one suggested edit per operation per
    matched segment. Hard grounding failures leave a record with diagnostics
    and zero suggestions; accepted edits are never touched."""
    return _submit(project, cmd, provider, parent_command_id=None)


def iterate_command(
    project: Project, parent_command_id: str, cmd: EditCommand, provider: Provider
) -> CommandRecord:
    """Re-describe an earlier command. The parent's still-open suggestions stay
    visible but are marked superseded; a child record holds the new ones."""
    parent = _find_record(project, parent_command_id)
    for edit_id in parent.suggestion_ids:
        layer, i, edit = _find_edit(project, edit_id)
        if edit.status == EditStatus.SUGGESTED and not edit.superseded:
            layer.edits[i] = dataclasses.replace(edit, superseded=True)
    return _submit(project, cmd, provider, parent_command_id=parent.id)


# ---------------------------------------------------------------------------
# Suggestion lifecycle.


def accept(project: Project, edit_id: str) -> Edit:
    layer, i, edit = _find_edit(project, edit_id)
    if edit.status != EditStatus.SUGGESTED:
        raise IllegalTransition(f"cannot accept {edit_id}: status {edit.status.value}")
    for other in layer.edits:
        if (
            other.id != edit.id
            and other.status == EditStatus.ACCEPTED
            and interval_intersects(other.interval, edit.interval)
        ):
            raise OverlapViolation(
                f"{edit_id} [{edit.interval.start_s:g},{edit.interval.end_s:g}) "
                f"overlaps accepted {other.id}"
            )
    if layer.operation is not None and layer.operation != edit.operation:
        raise SchemaMismatch(
            f"layer {layer.id} holds {layer.operation.value} edits, "
            f"not {edit.operation.value}"
        )
    updated = dataclasses.replace(edit, status=EditStatus.ACCEPTED)
    layer.edits[i] = updated
    _refresh_layer_operation(layer)
    _commit(project)
    return updated


def reject(project: Project, edit_id: str) -> Edit:
    layer, i, edit = _find_edit(project, edit_id)
    if edit.status != EditStatus.SUGGESTED:
        raise IllegalTransition(f"cannot reject {edit_id}: status {edit.status.value}")
    updated = dataclasses.replace(edit, status=EditStatus.REJECTED)
    layer.edits[i] = updated
    _refresh_layer_operation(layer)
    _commit(project)
    return updated


def adjust_edit(project: Project, edit_id: str, patch: EditPatch) -> Edit:
    """Apply a partial update atomically; any violation rejects the whole patch."""
    layer, i, edit = _find_edit(project, edit_id)
    if patch.is_empty():
        raise SchemaMismatch("patch changes nothing")

    operation = patch.operation if patch.operation is not None else edit.operation
    interval = patch.interval if patch.interval is not None else edit.interval
    rect = patch.rect if patch.rect is not None else edit.rect
    params = patch.params if patch.params is not None else edit.params

    if not params_match_operation(params, operation):
        raise SchemaMismatch(
            f"params {type(params).__name__} do not fit {operation.value}"
        )
    if interval.end_s > project.bundle.duration_s:
        raise OutOfBounds(
            f"interval ends at {interval.end_s:g}s in a "
            f"{project.bundle.duration_s:g}s video"
        )
    if edit.status != EditStatus.REJECTED:
        for other in layer.edits:
            if other.id == edit.id or other.status == EditStatus.REJECTED:
                continue
            if other.operation != operation:
                raise SchemaMismatch(
                    f"layer {layer.id} holds {other.operation.value} edits, "
                    f"not {operation.value}"
                )
        for other in layer.edits:
            if (
                other.id != edit.id
                and other.status == EditStatus.ACCEPTED
                and interval_intersects(other.interval, interval)
            ):
                raise OverlapViolation(f"{edit_id} would overlap accepted {other.id}")

    updated = dataclasses.replace(
        edit, operation=operation, interval=interval, rect=rect, params=params
    )
    layer.edits[i] = updated
    _refresh_layer_operation(layer)
    _commit(project)
    return updated


def search_more(
    project: Project, command_id: str, near_t: float, provider: Provider
) -> list[Edit]:
    """Look again near near_t, skipping segments this command already offered.

    Retrieval is restricted to [near_t - 60, near_t + 60) clipped to the
    video, so locally relevant material the global pass ranked out can
    surface. Returns [] (and mutates nothing) when there is nothing new.
    """
    record = _find_record(project, command_id)
    duration = project.bundle.duration_s
    lo = max(0.0, near_t - SEARCH_WINDOW_S)
    hi = min(duration, near_t + SEARCH_WINDOW_S)
    if hi <= lo:
        return []
    window = TimeInterval(lo, hi)

    diagnostics: list[str] = []
    try:
        candidates = _ground(
            record.parse, near_t, project.bundle, provider, diagnostics, window=window
        )
    except ProviderError as exc:
        logger.warning("search more failed: %s", exc)
        return []

    existing = [
        _find_edit(project, eid)[2].interval for eid in record.suggestion_ids
    ]
    fresh = [
        c
        for c in candidates
        if not any(interval_intersects(c.interval, iv) for iv in existing)
    ]
    if not fresh:
        return []

    layer_map: dict[EditOperation, str] = {}
    for eid in record.suggestion_ids:
        layer, _, edit = _find_edit(project, eid)
        layer_map.setdefault(edit.operation, layer.id)

    edits = _materialize(
        project,
        record.id,
        record.parse,
        record.command,
        fresh,
        provider,
        diagnostics,
        layer_map,
    )
    record.suggestion_ids.extend(e.id for e in edits)
    record.diagnostics.extend(diagnostics)
    _commit(project)
    return edits


# ---------------------------------------------------------------------------
# History.


def undo(project: Project) -> Project:
    if len(project.history) < 2:
        raise HistoryExhausted("nothing to undo")
    project.redo_stack.append(project.history.pop())
    _restore(project, project.history[-1])
    project.revision += 1
    return project


def redo(project: Project) -> Project:
    if not project.redo_stack:
        raise HistoryExhausted("nothing to redo")
    state = project.redo_stack.pop()
    project.history.append(state)
    _restore(project, state)
    project.revision += 1
    return project


# ---------------------------------------------------------------------------
# Edit decision list.


def export_edl(project: Project) -> dict:
    """Accepted edits as a standalone document, ordered by (layer, start)."""
    dims = project.bundle.frame_dims
    entries = []
    for layer_index, layer in enumerate(project.layers):
        for edit in layer.edits:
            if edit.status != EditStatus.ACCEPTED:
                continue
            px = rect_to_pixels(edit.rect, dims)
            entries.append(
                (
                    (layer_index, edit.interval.start_s, edit.id),
                    {
                        "layer_id": layer.id,
                        "edit_id": edit.id,
                        "operation": edit.operation.value,
                        "start_s": edit.interval.start_s,
                        "end_s": edit.interval.end_s,
                        "rect_px": {"x": px.x, "y": px.y, "w": px.w, "h": px.h},
                        "params": params_to_dict(edit.params),
                        "provenance": {
                            "command_id": edit.provenance.command_id,
                            "temporal_explanation": edit.provenance.temporal_explanation,
                            "spatial_method": edit.provenance.spatial_method,
                        },
                    },
                )
            )
    entries.sort(key=lambda pair: pair[0])
    return {
        "format": EDL_FORMAT,
        "version": EDL_VERSION,
        "video_id": project.bundle.video_id,
        "frame_dims": {"width_px": dims.width_px, "height_px": dims.height_px},
        "edits": [doc for _, doc in entries],
    }


def import_edl(data) -> dict:
    """Validate an exported document and rebuild it in canonical shape.

    Accepts a dict, JSON text, or JSON bytes. The result re-serializes to
    the same bytes the original export produced.
    """
    if isinstance(data, (bytes, bytearray)):
        data = data.decode("utf-8")
    if isinstance(data, str):
        data = json.loads(data)
    if not isinstance(data, dict):
        raise ValidationError("edit list document must be a JSON object")
    if data.get("format") != EDL_FORMAT:
        raise ValidationError(f"unknown document format {data.get('format')!r}")
    if data.get("version") != EDL_VERSION:
        raise ValidationError(f"unsupported document version {data.get('version')!r}")
    dims = data.get("frame_dims")
    if (
        not isinstance(dims, dict)
        or not isinstance(dims.get("width_px"), int)
        or not isinstance(dims.get("height_px"), int)
    ):
        raise ValidationError("frame_dims must carry integer width_px/height_px")
    edits_out = []
    for n, entry in enumerate(data.get("edits", [])):
        try:
            params = params_from_dict(entry["params"])
            if EditOperation(entry["operation"]) != params.operation:
                raise ValidationError("operation tag disagrees with params")
            TimeInterval(float(entry["start_s"]), float(entry["end_s"]))
            px = entry["rect_px"]
            edits_out.append(
                {
                    "layer_id": str(entry["layer_id"]),
                    "edit_id": str(entry["edit_id"]),
                    "operation": entry["operation"],
                    "start_s": float(entry["start_s"]),
                    "end_s": float(entry["end_s"]),
                    "rect_px": {
                        "x": int(px["x"]),
                        "y": int(px["y"]),
                        "w": int(px["w"]),
                        "h": int(px["h"]),
                    },
                    "params": params_to_dict(params),
                    "provenance": {
                        "command_id": str(entry["provenance"]["command_id"]),
                        "temporal_explanation": str(
                            entry["provenance"]["temporal_explanation"]
                        ),
                        "spatial_method": str(entry["provenance"]["spatial_method"]),
                    },
                }
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"edit entry {n} is malformed: {exc}") from exc
    return {
        "format": EDL_FORMAT,
        "version": EDL_VERSION,
        "video_id": str(data["video_id"]),
        "frame_dims": {
            "width_px": dims["width_px"],
            "height_px": dims["height_px"],
        },
        "edits": edits_out,
    }
