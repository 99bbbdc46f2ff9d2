"""Stage 4: concrete edit parameters from references and defaults.

Covers the default-value table per operation, classification of requested
changes (explicit value, relative offset/proportion, abstract direction),
their application with schema clamping, and generation of display text and
image search queries.
"""

from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass
from typing import NamedTuple, Optional, Union

from sketchedit.core import (
    MAX_CONTENT_CHARS,
    BlurParams,
    CropParams,
    CutParams,
    EditOperation,
    EditParameters,
    FrameDims,
    ImageParams,
    ParamChangeKind,
    ShapeKind,
    ShapeParams,
    TextParams,
    TimeInterval,
    ValidationError,
    ZoomParams,
)
from sketchedit.prompts import TemplateId
from sketchedit.providers import ChatRequest, MalformedResponse, Provider, ProviderError
from sketchedit.serde import params_to_dict
from sketchedit.spatial import SpatialResult

logger = logging.getLogger(__name__)

ABSTRACT_STEP = 0.2  # one abstract nudge moves a value by 20%
DURATION_FIELD = "duration_s"
MIN_DURATION_S = 0.1
FONT_HEIGHT_FRACTION = 0.05


@dataclass(frozen=True)
class ParamChange:
    """One requested adjustment to a parameter field."""

    field_name: str
    kind: ParamChangeKind
    value: Optional[Union[float, str]] = None  # explicit
    delta: Optional[float] = None  # relative offset
    factor: Optional[float] = None  # relative proportion
    direction: Optional[str] = None  # abstract: increase | decrease

    def __post_init__(self):
        if self.kind == ParamChangeKind.EXPLICIT and self.value is None:
            raise ValidationError("explicit change needs a value")
        if self.kind == ParamChangeKind.RELATIVE and (
            (self.delta is None) == (self.factor is None)
        ):
            raise ValidationError("relative change needs exactly one of delta/factor")
        if self.kind == ParamChangeKind.ABSTRACT and self.direction not in (
            "increase",
            "decrease",
        ):
            raise ValidationError("abstract change needs a direction")


class ChangeSet(NamedTuple):
    changes: list[ParamChange]
    low_confidence: bool


class ApplyResult(NamedTuple):
    params: EditParameters
    interval: TimeInterval
    rejected: list[str]


def default_params(
    op: EditOperation,
    spatial: SpatialResult,
    segment: TimeInterval,
    dims: FrameDims,
) -> EditParameters:
    """Schema-valid starting values before any requested change applies."""
    if op == EditOperation.TEXT:
        return TextParams(
            content="",
            font_style="",
            font_color="white",
            font_size=FONT_HEIGHT_FRACTION * dims.height_px,
        )
    if op == EditOperation.IMAGE:
        return ImageParams()
    if op == EditOperation.SHAPE:
        return ShapeParams(kind=ShapeKind.RECTANGLE)
    if op == EditOperation.BLUR:
        return BlurParams(degree=0.5)
    if op == EditOperation.CUT:
        return CutParams()
    if op == EditOperation.CROP:
        return CropParams(crop_rect=spatial.rect)
    if op == EditOperation.ZOOM:
        return ZoomParams(animation_duration_s=segment.length_s)
    raise ValidationError(f"no defaults for operation {op}")


def classify_changes(
    param_ref_text: str,
    op: EditOperation,
    current: EditParameters,
    current_duration_s: float,
    command_text: str,
    provider: Provider,
) -> ChangeSet:
    """Provider-tagged changes; unusable output yields an empty low-confidence set."""
    current_doc = params_to_dict(current)
    current_doc.pop("operation", None)
    try:
        resp = provider.complete(
            ChatRequest(
                template=TemplateId.STAGE4_PARAMS,
                payload={
                    "operation": op.value,
                    "reference_text": param_ref_text,
                    "command_text": command_text,
                    "current_params": current_doc,
                    "current_duration_s": current_duration_s,
                },
            )
        )
    except (MalformedResponse, ProviderError) as exc:
        logger.warning("parameter classification unavailable: %s", exc)
        return ChangeSet([], True)
    changes = []
    for c in resp.payload["changes"]:
        changes.append(
            ParamChange(
                field_name=c["field"],
                kind=ParamChangeKind(c["kind"]),
                value=c.get("value"),
                delta=c.get("delta"),
                factor=c.get("factor"),
                direction=c.get("direction"),
            )
        )
    return ChangeSet(changes, False)


# Per-field handling: how to coerce explicit values and clamp results.
# Numeric fields admit relative/abstract changes; string-ish fields do not.


def _clamp_font_size(v: float) -> float:
    return max(1.0, float(v))


def _clamp_degree(v: float) -> float:
    return min(1.0, max(0.01, float(v)))


def _clamp_anim(v: float) -> float:
    return max(MIN_DURATION_S, float(v))


_NUMERIC_CLAMPS = {
    "font_size": _clamp_font_size,
    "degree": _clamp_degree,
    "animation_duration_s": _clamp_anim,
}

_STRING_FIELDS = {"font_color", "font_style", "source_uri"}
_CAPPED_FIELDS = {"content", "visual_keywords"}


def _apply_one(
    params: EditParameters, change: ParamChange, interval: TimeInterval
) -> tuple[EditParameters, TimeInterval]:
    """Apply one change or raise ValidationError explaining the rejection."""
    name = change.field_name

    if name == DURATION_FIELD:
        length = interval.length_s
        if change.kind == ParamChangeKind.EXPLICIT:
            length = float(change.value)
        elif change.kind == ParamChangeKind.RELATIVE:
            length = (
                length + change.delta if change.delta is not None
                else length * change.factor
            )
        else:
            step = 1 + ABSTRACT_STEP if change.direction == "increase" else 1 - ABSTRACT_STEP
            length *= step
        length = max(MIN_DURATION_S, length)
        return params, TimeInterval(interval.start_s, interval.start_s + length)

    known = {f.name for f in dataclasses.fields(params)}
    if name not in known:
        raise ValidationError(
            f"field '{name}' does not exist on {type(params).__name__}"
        )

    if name in _STRING_FIELDS or name in _CAPPED_FIELDS:
        if change.kind != ParamChangeKind.EXPLICIT:
            raise ValidationError(f"field '{name}' only accepts explicit values")
        value = str(change.value)
        if name in _CAPPED_FIELDS:
            value = value[:MAX_CONTENT_CHARS]
        return dataclasses.replace(params, **{name: value}), interval

    if name == "kind":
        if change.kind != ParamChangeKind.EXPLICIT:
            raise ValidationError("shape kind only accepts explicit values")
        try:
            return (
                dataclasses.replace(params, kind=ShapeKind(str(change.value))),
                interval,
            )
        except ValueError as exc:
            raise ValidationError(f"unknown shape kind {change.value!r}") from exc

    if name == "crop_rect":
        raise ValidationError("crop_rect is set spatially, not via parameters")

    if name in _NUMERIC_CLAMPS:
        current = float(getattr(params, name))
        if change.kind == ParamChangeKind.EXPLICIT:
            try:
                value = float(change.value)
            except (TypeError, ValueError) as exc:
                raise ValidationError(
                    f"field '{name}' needs a numeric value, got {change.value!r}"
                ) from exc
        elif change.kind == ParamChangeKind.RELATIVE:
            value = (
                current + change.delta if change.delta is not None
                else current * change.factor
            )
        else:
            step = 1 + ABSTRACT_STEP if change.direction == "increase" else 1 - ABSTRACT_STEP
            value = current * step
        return (
            dataclasses.replace(params, **{name: _NUMERIC_CLAMPS[name](value)}),
            interval,
        )

    raise ValidationError(f"field '{name}' cannot be changed")


def apply_changes(
    initial: EditParameters,
    changes: list[ParamChange],
    interval: TimeInterval,
) -> ApplyResult:
    """Apply every applicable change; unknown/invalid ones are reported.

    Explicit changes overwrite, relative ones offset or scale the current
    value, abstract ones nudge it by 20%. Duration changes keep the interval
    start fixed. Results are clamped into each field's valid range.
    """
    params = initial
    rejected: list[str] = []
    for change in changes:
        try:
            params, interval = _apply_one(params, change, interval)
        except ValidationError as exc:
            rejected.append(str(exc))
    return ApplyResult(params, interval, rejected)


def _generate(
    template: TemplateId,
    out_key: str,
    ref_text: str,
    command_text: str,
    relevant_content: str,
    provider: Provider,
) -> str:
    try:
        resp = provider.complete(
            ChatRequest(
                template=template,
                payload={
                    "reference_text": ref_text,
                    "command_text": command_text,
                    "relevant_content": relevant_content,
                },
            )
        )
        text = resp.payload[out_key].strip()
    except (MalformedResponse, ProviderError) as exc:
        logger.warning("%s generation unavailable: %s", out_key, exc)
        text = ""
    if not text:
        text = command_text
    return text[:MAX_CONTENT_CHARS]


def generate_text_content(
    ref_text: str, command_text: str, relevant_content: str, provider: Provider
) -> str:
    """Display string for a text edit, capped at 100 characters."""
    return _generate(
        TemplateId.STAGE4_TEXT_CONTENT,
        "text",
        ref_text,
        command_text,
        relevant_content,
        provider,
    )


def generate_image_query(
    ref_text: str, command_text: str, relevant_content: str, provider: Provider
) -> str:
    """Image search query for an image edit, capped at 100 characters."""
    return _generate(
        TemplateId.STAGE4_IMAGE_QUERY,
        "query",
        ref_text,
        command_text,
        relevant_content,
        provider,
    )
