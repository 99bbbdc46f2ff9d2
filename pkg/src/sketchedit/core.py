"""Shared domain vocabulary: time intervals, frame rectangles, edit operations.

Everything here is an immutable value object. Intervals are half-open
[start_s, end_s) so that segments sharing only an endpoint do not count as
intersecting. Rectangles are stored normalized to [0, 1]; pixel coordinates
appear only at provider prompts and wire formats.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum


class ValidationError(ValueError):
    """A value object violated one of its invariants."""


class EditOperation(str, Enum):
    """The seven supported edit operations."""

    TEXT = "text"
    IMAGE = "image"
    SHAPE = "shape"
    BLUR = "blur"
    CUT = "cut"
    CROP = "crop"
    ZOOM = "zoom"


class TemporalRefCategory(str, Enum):
    POSITION = "position"
    TRANSCRIPT = "transcript"
    VIDEO = "video"
    OTHER = "other"


class SpatialRefCategory(str, Enum):
    VISUAL_DEPENDENT = "visual_dependent"
    INDEPENDENT = "independent"
    OTHER = "other"


class ParamChangeKind(str, Enum):
    EXPLICIT = "explicit"
    RELATIVE = "relative"
    ABSTRACT = "abstract"


@dataclass(frozen=True)
class TimeInterval:
    """Half-open interval [start_s, end_s) in seconds."""

    start_s: float
    end_s: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.start_s) and math.isfinite(self.end_s)):
            raise ValidationError(f"interval endpoints must be finite: {self}")
        if self.start_s < 0:
            raise ValidationError(f"interval start must be >= 0: {self}")
        if not self.start_s < self.end_s:
            raise ValidationError(
                f"interval start must be < end: [{self.start_s}, {self.end_s})"
            )

    @property
    def length_s(self) -> float:
        return self.end_s - self.start_s

    @property
    def midpoint_s(self) -> float:
        return (self.start_s + self.end_s) / 2.0


@dataclass(frozen=True)
class FrameDims:
    """Pixel dimensions of the video frame."""

    width_px: int
    height_px: int

    def __post_init__(self) -> None:
        if self.width_px <= 0 or self.height_px <= 0:
            raise ValidationError(f"frame dims must be positive: {self}")


@dataclass(frozen=True)
class Rect:
    """Axis-aligned rectangle in normalized frame units.

    (x, y) is the top-left corner; all of x, y, w, h are in [0, 1] and the
    rectangle must lie fully inside the frame.
    """

    x: float
    y: float
    w: float
    h: float

    def __post_init__(self) -> None:
        for name in ("x", "y", "w", "h"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise ValidationError(f"rect.{name} must be finite: {self}")
        if self.w <= 0 or self.h <= 0:
            raise ValidationError(f"rect must have positive size: {self}")
        if self.x < 0 or self.y < 0:
            raise ValidationError(f"rect origin must be >= 0: {self}")
        if self.x + self.w > 1 + 1e-9 or self.y + self.h > 1 + 1e-9:
            raise ValidationError(f"rect exceeds frame bounds: {self}")

    @property
    def area(self) -> float:
        return self.w * self.h


FULL_FRAME = Rect(0.0, 0.0, 1.0, 1.0)


@dataclass(frozen=True)
class PixelRect:
    """Rectangle in integer pixel coordinates (wire/prompt representation)."""

    x: int
    y: int
    w: int
    h: int


@dataclass(frozen=True)
class Embedding:
    """Fixed-length vector in the shared text/region embedding space."""

    values: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.values) == 0:
            raise ValidationError("embedding must be non-empty")
        if not all(math.isfinite(v) for v in self.values):
            raise ValidationError("embedding entries must be finite")

    @property
    def dim(self) -> int:
        return len(self.values)

    def norm(self) -> float:
        return math.sqrt(sum(v * v for v in self.values))


class ShapeKind(str, Enum):
    CIRCLE = "circle"
    RECTANGLE = "rectangle"
    STAR = "star"


# Cap on user-facing generated strings (text content, image queries).
MAX_CONTENT_CHARS = 100


@dataclass(frozen=True)
class TextParams:
    """Parameters for the text-insertion operation. font_size is in pixels."""

    content: str = ""
    font_style: str = ""
    font_color: str = "white"
    font_size: float = 36.0

    operation = EditOperation.TEXT

    def __post_init__(self) -> None:
        if len(self.content) > MAX_CONTENT_CHARS:
            raise ValidationError(
                f"text content exceeds {MAX_CONTENT_CHARS} chars: {len(self.content)}"
            )
        if self.font_size <= 0:
            raise ValidationError(f"font_size must be positive: {self.font_size}")


@dataclass(frozen=True)
class ImageParams:
    """Parameters for image insertion: a search query plus an optional source."""

    visual_keywords: str = ""
    source_uri: str | None = None

    operation = EditOperation.IMAGE

    def __post_init__(self) -> None:
        if len(self.visual_keywords) > MAX_CONTENT_CHARS:
            raise ValidationError(
                f"image query exceeds {MAX_CONTENT_CHARS} chars: "
                f"{len(self.visual_keywords)}"
            )


@dataclass(frozen=True)
class ShapeParams:
    kind: ShapeKind = ShapeKind.RECTANGLE

    operation = EditOperation.SHAPE

    def __post_init__(self) -> None:
        if not isinstance(self.kind, ShapeKind):
            raise ValidationError(f"unknown shape kind: {self.kind!r}")


@dataclass(frozen=True)
class BlurParams:
    """Blur strength normalized to (0, 1]."""

    degree: float = 0.5

    operation = EditOperation.BLUR

    def __post_init__(self) -> None:
        if not (0.0 < self.degree <= 1.0):
            raise ValidationError(f"blur degree must be in (0, 1]: {self.degree}")


@dataclass(frozen=True)
class CutParams:
    """Cut has no parameters."""

    operation = EditOperation.CUT


@dataclass(frozen=True)
class CropParams:
    """The kept region after cropping, as a normalized rect."""

    crop_rect: Rect = FULL_FRAME

    operation = EditOperation.CROP


@dataclass(frozen=True)
class ZoomParams:
    animation_duration_s: float = 1.0

    operation = EditOperation.ZOOM

    def __post_init__(self) -> None:
        if self.animation_duration_s <= 0:
            raise ValidationError(
                f"zoom animation duration must be positive: {self.animation_duration_s}"
            )


EditParameters = (
    TextParams
    | ImageParams
    | ShapeParams
    | BlurParams
    | CutParams
    | CropParams
    | ZoomParams
)

PARAMS_BY_OPERATION: dict[EditOperation, type] = {
    EditOperation.TEXT: TextParams,
    EditOperation.IMAGE: ImageParams,
    EditOperation.SHAPE: ShapeParams,
    EditOperation.BLUR: BlurParams,
    EditOperation.CUT: CutParams,
    EditOperation.CROP: CropParams,
    EditOperation.ZOOM: ZoomParams,
}


def params_match_operation(params: EditParameters, op: EditOperation) -> bool:
    """True iff the parameter variant belongs to the given operation."""
    return isinstance(params, PARAMS_BY_OPERATION[op])


def interval_intersects(a: TimeInterval, b: TimeInterval) -> bool:
    """True iff the half-open intervals share a nonzero-length overlap."""
    return max(a.start_s, b.start_s) < min(a.end_s, b.end_s)


def interval_distance(a: TimeInterval, b: TimeInterval) -> float:
    """Gap in seconds between the nearest endpoints; 0 when intersecting."""
    return max(0.0, a.start_s - b.end_s, b.start_s - a.end_s)


def rect_iou(a: Rect, b: Rect) -> float:
    """Intersection-over-union of two rectangles; 0 when disjoint.

    Areas are derived from the same edge coordinates used for the overlap so
    that identical rectangles score exactly 1.0 under float arithmetic.
    """
    ax2, ay2 = a.x + a.w, a.y + a.h
    bx2, by2 = b.x + b.w, b.y + b.h
    ix = max(0.0, min(ax2, bx2) - max(a.x, b.x))
    iy = max(0.0, min(ay2, by2) - max(a.y, b.y))
    inter = ix * iy
    area_a = (ax2 - a.x) * (ay2 - a.y)
    area_b = (bx2 - b.x) * (by2 - b.y)
    union = area_a + area_b - inter
    if union <= 0:
        return 0.0
    return min(1.0, inter / union)


def rect_clamp(x: float, y: float, w: float, h: float) -> Rect:
    """Fit a possibly out-of-range rectangle into the unit frame.

    The rectangle is translated fully into bounds first; it is shrunk only
    when it is larger than the frame, preserving the requested size whenever
    it fits. Raises ValidationError for degenerate (w or h <= 0) input.
    """
    if not all(math.isfinite(v) for v in (x, y, w, h)):
        raise ValidationError(f"rect fields must be finite: ({x}, {y}, {w}, {h})")
    if w <= 0 or h <= 0:
        raise ValidationError(f"cannot clamp degenerate rect: w={w}, h={h}")
    w = min(w, 1.0)
    h = min(h, 1.0)
    x = min(max(x, 0.0), 1.0 - w)
    y = min(max(y, 0.0), 1.0 - h)
    return Rect(x, y, w, h)


def _round_half_up(v: float) -> int:
    return math.floor(v + 0.5)


def rect_to_pixels(r: Rect, dims: FrameDims) -> PixelRect:
    """Convert a normalized rect to integer pixels (round half up).

    Width and height are floored at 1 px so the result never degenerates.
    """
    return PixelRect(
        x=_round_half_up(r.x * dims.width_px),
        y=_round_half_up(r.y * dims.height_px),
        w=max(1, _round_half_up(r.w * dims.width_px)),
        h=max(1, _round_half_up(r.h * dims.height_px)),
    )


def rect_from_pixels(p: PixelRect, dims: FrameDims) -> Rect:
    """Convert a pixel rect back to normalized coordinates, clamped in-bounds."""
    return rect_clamp(
        p.x / dims.width_px,
        p.y / dims.height_px,
        p.w / dims.width_px,
        p.h / dims.height_px,
    )
