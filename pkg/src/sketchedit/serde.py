"""Canonical JSON helpers for the value types that cross file/wire boundaries.

All documents the package emits (bundles, EDL exports, reports, caches) are
serialized with sorted keys and compact separators so that identical state
always produces identical bytes.
"""

from __future__ import annotations

import json
from typing import Any

from .core import (
    PARAMS_BY_OPERATION,
    BlurParams,
    CropParams,
    CutParams,
    EditOperation,
    EditParameters,
    ImageParams,
    Rect,
    ShapeKind,
    ShapeParams,
    TextParams,
    TimeInterval,
    ValidationError,
    ZoomParams,
)


def canonical_json(doc: Any) -> str:
    """Serialize with a stable key order and no insignificant whitespace."""
    return json.dumps(doc, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def interval_to_dict(t: TimeInterval) -> dict[str, float]:
    return {"start_s": t.start_s, "end_s": t.end_s}


def interval_from_dict(d: dict[str, Any]) -> TimeInterval:
    return TimeInterval(float(d["start_s"]), float(d["end_s"]))


def rect_to_dict(r: Rect) -> dict[str, float]:
    return {"x": r.x, "y": r.y, "w": r.w, "h": r.h}


def rect_from_dict(d: dict[str, Any]) -> Rect:
    return Rect(float(d["x"]), float(d["y"]), float(d["w"]), float(d["h"]))


def params_to_dict(params: EditParameters) -> dict[str, Any]:
    """Serialize an edit-parameter variant, tagged with its operation."""
    if isinstance(params, TextParams):
        return {
            "operation": "text",
            "content": params.content,
            "font_style": params.font_style,
            "font_color": params.font_color,
            "font_size": params.font_size,
        }
    if isinstance(params, ImageParams):
        return {
            "operation": "image",
            "visual_keywords": params.visual_keywords,
            "source_uri": params.source_uri,
        }
    if isinstance(params, ShapeParams):
        return {"operation": "shape", "kind": params.kind.value}
    if isinstance(params, BlurParams):
        return {"operation": "blur", "degree": params.degree}
    if isinstance(params, CutParams):
        return {"operation": "cut"}
    if isinstance(params, CropParams):
        return {"operation": "crop", "crop_rect": rect_to_dict(params.crop_rect)}
    if isinstance(params, ZoomParams):
        return {"operation": "zoom", "animation_duration_s": params.animation_duration_s}
    raise ValidationError(f"unknown parameter variant: {type(params).__name__}")


def params_from_dict(d: dict[str, Any]) -> EditParameters:
    try:
        op = EditOperation(d["operation"])
    except (KeyError, ValueError) as exc:
        raise ValidationError(f"bad params operation tag: {d.get('operation')!r}") from exc
    if op is EditOperation.TEXT:
        return TextParams(
            content=str(d.get("content", "")),
            font_style=str(d.get("font_style", "")),
            font_color=str(d.get("font_color", "white")),
            font_size=float(d.get("font_size", 36.0)),
        )
    if op is EditOperation.IMAGE:
        uri = d.get("source_uri")
        return ImageParams(
            visual_keywords=str(d.get("visual_keywords", "")),
            source_uri=None if uri is None else str(uri),
        )
    if op is EditOperation.SHAPE:
        return ShapeParams(kind=ShapeKind(d.get("kind", "rectangle")))
    if op is EditOperation.BLUR:
        return BlurParams(degree=float(d.get("degree", 0.5)))
    if op is EditOperation.CUT:
        return CutParams()
    if op is EditOperation.CROP:
        return CropParams(crop_rect=rect_from_dict(d["crop_rect"]))
    if op is EditOperation.ZOOM:
        return ZoomParams(animation_duration_s=float(d.get("animation_duration_s", 1.0)))
    raise ValidationError(f"unhandled operation: {op}")


def default_params_class(op: EditOperation) -> type:
    return PARAMS_BY_OPERATION[op]
