"""Stage 3: resolve where in the frame an edit applies.

The decision chain per candidate segment: visual-content matching against
stored instance crops, then the user's sketch, then the full frame; if the
command names a frame region in words, the provider refines the rectangle
afterwards. The chain is total: every segment gets a valid in-bounds rect.
"""

from __future__ import annotations

import logging
import statistics
from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple, Optional

from sketchedit.bundle import FrameMetadata, InstanceCrop, MetadataBundle, frame_nearest
from sketchedit.core import (
    FULL_FRAME,
    FrameDims,
    Rect,
    SpatialRefCategory,
    TimeInterval,
    ValidationError,
    rect_clamp,
    rect_to_pixels,
)
from sketchedit.embeddings import cosine
from sketchedit.parsing import EditCommand, ParsedCommand
from sketchedit.prompts import TemplateId
from sketchedit.providers import (
    ChatRequest,
    FrameRef,
    MalformedResponse,
    Provider,
    ProviderError,
)

logger = logging.getLogger(__name__)


class SpatialMethod(str, Enum):
    CROP_MATCH = "crop_match"
    SKETCH = "sketch"
    FULL_FRAME = "full_frame"
    LLM_REFINED = "llm_refined"


@dataclass(frozen=True)
class SpatialResult:
    rect: Rect
    method: SpatialMethod
    frame_t: float
    explanation: str
    score: Optional[float] = None  # crop-match similarity, else None
    low_confidence: bool = False

    def __post_init__(self):
        if (self.score is not None) != (self.method == SpatialMethod.CROP_MATCH):
            raise ValidationError("score present iff method is crop_match")


class NoCrops(Exception):
    """The representative frame carries no instance crops."""


class ScoredCrop(NamedTuple):
    crop: InstanceCrop
    score: float


class Refinement(NamedTuple):
    rect: Rect
    explanation: str
    low_confidence: bool


def representative_frame(segment: TimeInterval, bundle: MetadataBundle) -> FrameMetadata:
    """The sampled frame nearest to the segment midpoint."""
    return frame_nearest(bundle, segment.midpoint_s)


def rank_crops(
    text_ref: Optional[str],
    sketch: Optional[Rect],
    frame: FrameMetadata,
    video_id: str,
    provider: Provider,
) -> list[ScoredCrop]:
    """Crops scored by similarity to the textual and sketched inputs.

    The score is the mean of the text and sketch cosine similarities over
    whichever inputs exist. Sorted descending; equal scores put the larger
    crop first.
    """
    if text_ref is None and sketch is None:
        raise ValidationError("rank_crops needs a text ref or a sketch")
    if not frame.crops:
        raise NoCrops(f"frame at {frame.timestamp_s} has no crops")
    anchors = []
    if text_ref is not None:
        anchors.append(provider.embed_text(text_ref))
    if sketch is not None:
        anchors.append(
            provider.embed_region(FrameRef(video_id, frame.timestamp_s), sketch)
        )
    scored = [
        ScoredCrop(crop, statistics.fmean(cosine(a, crop.embedding) for a in anchors))
        for crop in frame.crops
    ]
    scored.sort(key=lambda s: (-s.score, -s.crop.rect.area))
    return scored


def refine_independent(
    initial: Rect,
    ref_text: str,
    command_context: str,
    dims: FrameDims,
    provider: Provider,
) -> Refinement:
    """Provider-proposed rectangle for a named frame region, clamped in-bounds.

    Unusable provider output falls back to the clamped initial rectangle
    with the low-confidence flag set.
    """
    initial = rect_clamp(initial.x, initial.y, initial.w, initial.h)
    px = rect_to_pixels(initial, dims)
    try:
        resp = provider.complete(
            ChatRequest(
                template=TemplateId.STAGE3_SPATIAL_REFINE,
                payload={
                    "reference_text": ref_text,
                    "command_text": command_context,
                    "frame_width_px": dims.width_px,
                    "frame_height_px": dims.height_px,
                    "initial_rect_px": {
                        "x": px.x,
                        "y": px.y,
                        "width": px.w,
                        "height": px.h,
                    },
                },
            )
        )
    except (MalformedResponse, ProviderError) as exc:
        logger.warning("spatial refinement unavailable (%s); keeping rect", exc)
        return Refinement(initial, f"kept prior placement for '{ref_text}'", True)
    out = resp.payload["rect_px"]
    try:
        rect = rect_clamp(
            out["x"] / dims.width_px,
            out["y"] / dims.height_px,
            out["width"] / dims.width_px,
            out["height"] / dims.height_px,
        )
    except ValidationError as exc:
        logger.warning("refined rect unusable (%s); keeping rect", exc)
        return Refinement(initial, f"kept prior placement for '{ref_text}'", True)
    explanation = resp.payload.get("explanation") or f"placed at '{ref_text}'"
    return Refinement(rect, explanation, False)


def resolve(
    segment: TimeInterval,
    parsed: ParsedCommand,
    cmd: EditCommand,
    bundle: MetadataBundle,
    provider: Provider,
) -> SpatialResult:
    """Total decision chain: crop match, else sketch, else full frame; then
    word-described regions pass through provider refinement."""
    frame = representative_frame(segment, bundle)
    vd_texts = [
        r.span.surface
        for r in parsed.spatial_refs
        if r.category == SpatialRefCategory.VISUAL_DEPENDENT
    ]
    ind_texts = [
        r.span.surface
        for r in parsed.spatial_refs
        if r.category == SpatialRefCategory.INDEPENDENT
    ]

    rect = FULL_FRAME
    method = SpatialMethod.FULL_FRAME
    score: Optional[float] = None
    explanation = "no frame location stated; using the full frame"
    low_confidence = False

    if vd_texts:
        try:
            ranked = rank_crops(
                "; ".join(vd_texts), cmd.sketch, frame, bundle.video_id, provider
            )
            best = ranked[0]
            rect = best.crop.rect
            method = SpatialMethod.CROP_MATCH
            score = best.score
            explanation = f"matched a detected region for '{'; '.join(vd_texts)}'"
        except NoCrops:
            logger.info("no crops at frame %.1f; falling through", frame.timestamp_s)
        except ProviderError as exc:
            logger.warning("crop matching unavailable (%s); falling through", exc)
            low_confidence = True

    if method == SpatialMethod.FULL_FRAME and cmd.sketch is not None:
        rect = cmd.sketch
        method = SpatialMethod.SKETCH
        explanation = "user-sketched rectangle"

    if ind_texts:
        refined = refine_independent(
            rect, "; ".join(ind_texts), parsed.resolved_text,
            bundle.frame_dims, provider,
        )
        rect = refined.rect
        method = SpatialMethod.LLM_REFINED
        score = None
        explanation = refined.explanation
        low_confidence = low_confidence or refined.low_confidence

    return SpatialResult(
        rect=rect,
        method=method,
        frame_t=frame.timestamp_s,
        explanation=explanation,
        score=score,
        low_confidence=low_confidence,
    )
