"""Stage 1: split a multimodal command into categorized references.

The provider does the heavy lifting; this module turns its structured
answer into span-anchored references over the resolved command text, and
carries a deterministic lexical fallback for when the model output cannot
be repaired.
"""

from __future__ import annotations

import dataclasses
import logging
import math
from dataclasses import dataclass, field
from typing import Optional

from sketchedit.core import (
    EditOperation,
    Rect,
    SpatialRefCategory,
    TemporalRefCategory,
    ValidationError,
)
from sketchedit.lexical import classify_operations, find_time_tokens
from sketchedit.prompts import TemplateId
from sketchedit.providers import ChatRequest, MalformedResponse, Provider
from sketchedit.serde import rect_from_dict, rect_to_dict

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class EditCommand:
    """One user request: text, optional sketch, playhead, target layer."""

    text: str
    playhead_t: float
    layer_id: str
    sketch: Optional[Rect] = None
    sketch_frame_t: Optional[float] = None

    def __post_init__(self):
        if not self.text.strip():
            raise ValidationError("command text must be non-empty")
        if not (math.isfinite(self.playhead_t) and self.playhead_t >= 0):
            raise ValidationError(f"bad playhead_t {self.playhead_t}")
        if (self.sketch is None) != (self.sketch_frame_t is None):
            raise ValidationError("sketch and sketch_frame_t go together")
        if self.sketch_frame_t is not None and self.sketch_frame_t < 0:
            raise ValidationError("sketch_frame_t must be >= 0")


@dataclass(frozen=True)
class RefSpan:
    """A substring of the resolved command text, by character offsets."""

    char_start: int
    char_end: int
    surface: str

    def __post_init__(self):
        if not 0 <= self.char_start < self.char_end:
            raise ValidationError(
                f"bad span offsets [{self.char_start},{self.char_end})"
            )
        if not self.surface:
            raise ValidationError("span surface must be non-empty")


@dataclass(frozen=True)
class TemporalRef:
    span: RefSpan
    category: TemporalRefCategory


@dataclass(frozen=True)
class SpatialRef:
    span: RefSpan
    category: SpatialRefCategory


@dataclass(frozen=True)
class ParsedCommand:
    """Stage-1 result: operations plus span-anchored references.

    Spans index into resolved_text; original_text is kept so a UI can map
    highlights back when noun substitution changed the wording.
    """

    resolved_text: str
    original_text: str
    operations: tuple[EditOperation, ...]
    temporal_refs: tuple[TemporalRef, ...] = ()
    spatial_refs: tuple[SpatialRef, ...] = ()
    param_refs: dict[EditOperation, tuple[RefSpan, ...]] = field(default_factory=dict)
    low_confidence: bool = False

    def __post_init__(self):
        if not self.operations:
            raise ValidationError("parsed command needs at least one operation")


def validate_spans(p: ParsedCommand) -> list[str]:
    """All span-invariant violations; empty for well-formed parses."""
    issues: list[str] = []
    n = len(p.resolved_text)

    def check(span: RefSpan, kind: str) -> None:
        if span.char_end > n:
            issues.append(f"{kind} span [{span.char_start},{span.char_end}) "
                          f"exceeds text length {n}")
            return
        slice_ = p.resolved_text[span.char_start : span.char_end]
        if slice_ != span.surface:
            issues.append(
                f"{kind} span surface {span.surface!r} != text slice {slice_!r}"
            )

    def overlaps(spans: list[RefSpan], kind: str) -> None:
        ordered = sorted(spans, key=lambda s: s.char_start)
        for a, b in zip(ordered, ordered[1:]):
            if b.char_start < a.char_end:
                issues.append(f"{kind} spans overlap at {b.char_start}")

    temporal = [r.span for r in p.temporal_refs]
    spatial = [r.span for r in p.spatial_refs]
    params = [s for spans in p.param_refs.values() for s in spans]
    for span in temporal:
        check(span, "temporal")
    for span in spatial:
        check(span, "spatial")
    for span in params:
        check(span, "param")
    overlaps(temporal, "temporal")
    overlaps(spatial, "spatial")
    overlaps(params, "param")

    for op in p.param_refs:
        if op not in p.operations:
            issues.append(f"param_refs key {op.value} not among operations")
    return issues


def _locate(text: str, fragment: str, taken: list[tuple[int, int]]) -> Optional[RefSpan]:
    """First occurrence of fragment not overlapping already-taken spans."""
    for haystack, needle in ((text, fragment), (text.lower(), fragment.lower())):
        start = 0
        while True:
            i = haystack.find(needle, start)
            if i < 0:
                break
            j = i + len(needle)
            if not any(i < e and s < j for s, e in taken):
                taken.append((i, j))
                return RefSpan(i, j, text[i:j])
            start = i + 1
    return None


def fallback_parse(cmd: EditCommand) -> ParsedCommand:
    """Deterministic lexical degraded mode: timecodes + keyword table."""
    text = cmd.text
    ops = tuple(classify_operations(text))
    temporal = tuple(
        TemporalRef(
            RefSpan(tok.char_start, tok.char_end, tok.surface),
            TemporalRefCategory.POSITION,
        )
        for tok in find_time_tokens(text)
    )
    param_refs = {ops[0]: (RefSpan(0, len(text), text),)}
    return ParsedCommand(
        resolved_text=text,
        original_text=text,
        operations=ops,
        temporal_refs=temporal,
        spatial_refs=(),
        param_refs=param_refs,
    )


_TEMPORAL_CATEGORIES = {c.value: c for c in TemporalRefCategory}
_SPATIAL_CATEGORIES = {c.value: c for c in SpatialRefCategory}


def parse(cmd: EditCommand, provider: Provider) -> ParsedCommand:
    """Stage-1 parse via the provider; lexical fallback on malformed output."""
    req = ChatRequest(
        template=TemplateId.STAGE1_PARSE,
        payload={
            "command_text": cmd.text,
            "sketch_attached": cmd.sketch is not None,
        },
    )
    try:
        resp = provider.complete(req)
    except MalformedResponse as exc:
        logger.warning("stage1 output unusable (%s); using lexical fallback", exc)
        return dataclasses.replace(fallback_parse(cmd), low_confidence=True)

    payload = resp.payload
    resolved = payload.get("resolved_text") or cmd.text
    seen: list[EditOperation] = []
    for name in payload["operations"]:
        op = EditOperation(name)
        if op not in seen:
            seen.append(op)
    operations = tuple(seen)

    temporal: list[TemporalRef] = []
    taken_t: list[tuple[int, int]] = []
    for ref in payload.get("temporal_references", ()):
        span = _locate(resolved, ref["text"], taken_t)
        if span is None:
            logger.debug("temporal ref %r not present in resolved text", ref["text"])
            continue
        temporal.append(TemporalRef(span, _TEMPORAL_CATEGORIES[ref["category"]]))

    spatial: list[SpatialRef] = []
    taken_s: list[tuple[int, int]] = []
    for ref in payload.get("spatial_references", ()):
        span = _locate(resolved, ref["text"], taken_s)
        if span is None:
            logger.debug("spatial ref %r not present in resolved text", ref["text"])
            continue
        spatial.append(SpatialRef(span, _SPATIAL_CATEGORIES[ref["category"]]))

    param_refs: dict[EditOperation, tuple[RefSpan, ...]] = {}
    taken_p: list[tuple[int, int]] = []
    for ref in payload.get("parameter_references", ()):
        op = EditOperation(ref["operation"])
        if op not in operations:
            logger.debug("param ref for %s outside chosen operations", op.value)
            continue
        span = _locate(resolved, ref["text"], taken_p)
        if span is None:
            logger.debug("param ref %r not present in resolved text", ref["text"])
            continue
        param_refs[op] = param_refs.get(op, ()) + (span,)

    parsed = ParsedCommand(
        resolved_text=resolved,
        original_text=cmd.text,
        operations=operations,
        temporal_refs=tuple(temporal),
        spatial_refs=tuple(spatial),
        param_refs=param_refs,
    )
    issues = validate_spans(parsed)
    if issues:  # construction above should make this unreachable
        raise ValidationError(f"internal span bookkeeping failed: {issues}")
    return parsed


# ---------------------------------------------------------------------------
# Wire/document serialization.


def command_to_dict(cmd: EditCommand) -> dict:
    return {
        "text": cmd.text,
        "playhead_t": cmd.playhead_t,
        "layer_id": cmd.layer_id,
        "sketch": None if cmd.sketch is None else rect_to_dict(cmd.sketch),
        "sketch_frame_t": cmd.sketch_frame_t,
    }


def command_from_dict(d: dict) -> EditCommand:
    sketch = d.get("sketch")
    return EditCommand(
        text=d["text"],
        playhead_t=float(d["playhead_t"]),
        layer_id=d["layer_id"],
        sketch=None if sketch is None else rect_from_dict(sketch),
        sketch_frame_t=(
            None if d.get("sketch_frame_t") is None else float(d["sketch_frame_t"])
        ),
    )


def span_to_dict(s: RefSpan) -> dict:
    return {"char_start": s.char_start, "char_end": s.char_end, "surface": s.surface}


def span_from_dict(d: dict) -> RefSpan:
    return RefSpan(int(d["char_start"]), int(d["char_end"]), d["surface"])


def parsed_to_dict(p: ParsedCommand) -> dict:
    return {
        "resolved_text": p.resolved_text,
        "original_text": p.original_text,
        "operations": [op.value for op in p.operations],
        "temporal_refs": [
            {"span": span_to_dict(r.span), "category": r.category.value}
            for r in p.temporal_refs
        ],
        "spatial_refs": [
            {"span": span_to_dict(r.span), "category": r.category.value}
            for r in p.spatial_refs
        ],
        "param_refs": {
            op.value: [span_to_dict(s) for s in spans]
            for op, spans in sorted(p.param_refs.items(), key=lambda kv: kv[0].value)
        },
        "low_confidence": p.low_confidence,
    }


def parsed_from_dict(d: dict) -> ParsedCommand:
    return ParsedCommand(
        resolved_text=d["resolved_text"],
        original_text=d["original_text"],
        operations=tuple(EditOperation(o) for o in d["operations"]),
        temporal_refs=tuple(
            TemporalRef(span_from_dict(r["span"]), TemporalRefCategory(r["category"]))
            for r in d["temporal_refs"]
        ),
        spatial_refs=tuple(
            SpatialRef(span_from_dict(r["span"]), SpatialRefCategory(r["category"]))
            for r in d["spatial_refs"]
        ),
        param_refs={
            EditOperation(op): tuple(span_from_dict(s) for s in spans)
            for op, spans in d["param_refs"].items()
        },
        low_confidence=bool(d.get("low_confidence", False)),
    )
