"""Stage 2: ground temporal references into candidate video segments.

Position references resolve through a deterministic timecode grammar with no
provider involvement. Transcript and video references run a cosine top-k
prefilter over the bundle text, then ask the provider which filtered items
satisfy the reference.
"""

from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence

from sketchedit.bundle import MetadataBundle
from sketchedit.core import (
    Embedding,
    TemporalRefCategory,
    TimeInterval,
    interval_intersects,
)
from sketchedit.embeddings import cosine
from sketchedit.lexical import find_abstract_position, find_time_tokens
from sketchedit.parsing import RefSpan, TemporalRef
from sketchedit.prompts import TemplateId
from sketchedit.providers import ChatRequest, Provider

logger = logging.getLogger(__name__)

DEFAULT_TOP_K = 10
BARE_TIMECODE_SPAN_S = 10.0
ABSTRACT_EXTENT_S = 60.0


@dataclass(frozen=True)
class CandidateSegment:
    """A grounded interval with the reasoning that produced it."""

    interval: TimeInterval
    source_category: TemporalRefCategory
    explanation: str
    source_ref: Optional[RefSpan] = None
    duplicated: bool = False

    def __post_init__(self):
        if not self.explanation:
            raise ValueError("candidate explanation must be non-empty")


class PositionParse(NamedTuple):
    intervals: list[TimeInterval]
    diagnostics: list[str]


def _centered_interval(t: float, duration_s: float) -> Optional[TimeInterval]:
    span = BARE_TIMECODE_SPAN_S
    start = min(max(t - span / 2, 0.0), max(0.0, duration_s - span))
    end = min(duration_s, start + span)
    if end <= start:
        return None
    return TimeInterval(start, end)


def parse_position_ref(span_text: str, duration_s: float) -> PositionParse:
    """Timecodes, ranges, and intro/ending words into concrete intervals.

    Bare timecodes become the 10 s interval centered on them, clamped into
    the video; explicit ranges are kept verbatim (clamped); "intro"-like and
    "ending"-like words become the first/last 60 s. Unparseable text yields
    no intervals plus a diagnostic.
    """
    intervals: list[TimeInterval] = []
    diagnostics: list[str] = []
    for tok in find_time_tokens(span_text):
        if tok.is_range:
            start = max(0.0, tok.start_s)
            end = min(duration_s, tok.end_s)
            if end <= start:
                diagnostics.append(
                    f"range '{tok.surface}' lies outside the {duration_s} s video"
                )
                continue
            intervals.append(TimeInterval(start, end))
        else:
            if tok.start_s >= duration_s:
                diagnostics.append(
                    f"timecode '{tok.surface}' is past the {duration_s} s video end"
                )
                continue
            got = _centered_interval(tok.start_s, duration_s)
            if got is None:
                diagnostics.append(f"could not place '{tok.surface}'")
                continue
            intervals.append(got)
    if not intervals and not diagnostics:
        where = find_abstract_position(span_text)
        extent = min(ABSTRACT_EXTENT_S, duration_s)
        if where == "intro":
            intervals.append(TimeInterval(0.0, extent))
        elif where == "ending":
            intervals.append(TimeInterval(duration_s - extent, duration_s))
        else:
            diagnostics.append(f"no timecode or position word in {span_text!r}")
    return PositionParse(intervals, diagnostics)


def ground_position_ref(
    ref: TemporalRef,
    duration_s: float,
    window: Optional[TimeInterval] = None,
) -> list[CandidateSegment]:
    """Deterministic grounding for position references; never calls a provider."""
    parsed = parse_position_ref(ref.span.surface, duration_s)
    for d in parsed.diagnostics:
        logger.info("position ref: %s", d)
    return [
        CandidateSegment(
            interval=iv,
            source_category=TemporalRefCategory.POSITION,
            explanation=f"stated position '{ref.span.surface}'",
            source_ref=ref.span,
        )
        for iv in parsed.intervals
        if window is None or interval_intersects(iv, window)
    ]


def filter_top_k(
    query: Embedding,
    items: Sequence[tuple[object, Embedding]],
    k: int = DEFAULT_TOP_K,
) -> list[object]:
    """Ids of the <= k items most cosine-similar to the query.

    Items must be supplied in temporal order; equal scores fall back to the
    earlier item.
    """
    scored = [
        (cosine(query, emb), pos, item_id)
        for pos, (item_id, emb) in enumerate(items)
    ]
    scored.sort(key=lambda s: (-s[0], s[1]))
    return [item_id for _, _, item_id in scored[:k]]


def _grounded_from_matches(
    ref: TemporalRef,
    category: TemporalRefCategory,
    intervals: list[TimeInterval],
    matches: list[dict],
) -> list[CandidateSegment]:
    out = []
    for m in matches:
        idx = m["index"]
        if not 0 <= idx < len(intervals):
            logger.warning("provider match index %d out of range, dropped", idx)
            continue
        out.append(
            CandidateSegment(
                interval=intervals[idx],
                source_category=category,
                explanation=m["explanation"],
                source_ref=ref.span,
            )
        )
    return out


def ground_transcript_ref(
    ref: TemporalRef,
    bundle: MetadataBundle,
    provider: Provider,
    k: int = DEFAULT_TOP_K,
    window: Optional[TimeInterval] = None,
) -> list[CandidateSegment]:
    """Candidates among the top-k transcript snippets the provider selects.

    A window restricts the retrieval pool to snippets intersecting it, so a
    localized re-search can surface items the global top-k crowded out.
    """
    snippets = [
        s
        for s in bundle.transcript
        if window is None or interval_intersects(s.interval, window)
    ]
    if not snippets:
        return []
    query = provider.embed_text(ref.span.surface)
    items = [(i, provider.embed_text(seg.text)) for i, seg in enumerate(snippets)]
    kept = sorted(filter_top_k(query, items, k))  # temporal order for the prompt
    payload_snippets = [
        {
            "index": j,
            "start_s": snippets[i].interval.start_s,
            "end_s": snippets[i].interval.end_s,
            "text": snippets[i].text,
        }
        for j, i in enumerate(kept)
    ]
    resp = provider.complete(
        ChatRequest(
            template=TemplateId.STAGE2_TRANSCRIPT,
            payload={
                "reference_text": ref.span.surface,
                "snippets": payload_snippets,
            },
        )
    )
    intervals = [snippets[i].interval for i in kept]
    return _grounded_from_matches(
        ref, TemporalRefCategory.TRANSCRIPT, intervals, resp.payload["matches"]
    )


def ground_video_ref(
    ref: TemporalRef,
    bundle: MetadataBundle,
    provider: Provider,
    k: int = DEFAULT_TOP_K,
    window: Optional[TimeInterval] = None,
) -> list[CandidateSegment]:
    """Candidates among the top-k clip descriptions the provider selects."""
    clips = [
        c
        for c in bundle.clips
        if window is None or interval_intersects(c.interval, window)
    ]
    if not clips:
        return []
    query = provider.embed_text(ref.span.surface)
    items = [
        (i, provider.embed_text(clip.description_text())) for i, clip in enumerate(clips)
    ]
    kept = sorted(filter_top_k(query, items, k))
    payload_clips = [
        {
            "index": j,
            "start_s": clips[i].interval.start_s,
            "end_s": clips[i].interval.end_s,
            "description": clips[i].description_text(),
        }
        for j, i in enumerate(kept)
    ]
    resp = provider.complete(
        ChatRequest(
            template=TemplateId.STAGE2_VIDEO,
            payload={"reference_text": ref.span.surface, "clips": payload_clips},
        )
    )
    intervals = [clips[i].interval for i in kept]
    return _grounded_from_matches(
        ref, TemporalRefCategory.VIDEO, intervals, resp.payload["matches"]
    )


def ground_ref(
    ref: TemporalRef,
    bundle: MetadataBundle,
    provider: Provider,
    k: int = DEFAULT_TOP_K,
    window: Optional[TimeInterval] = None,
) -> list[CandidateSegment]:
    """Dispatch one temporal reference to its category's grounding rule."""
    if ref.category == TemporalRefCategory.POSITION:
        return ground_position_ref(ref, bundle.duration_s, window)
    if ref.category == TemporalRefCategory.TRANSCRIPT:
        return ground_transcript_ref(ref, bundle, provider, k, window)
    if ref.category == TemporalRefCategory.VIDEO:
        return ground_video_ref(ref, bundle, provider, k, window)
    # "other": the grammar may still find something literal; no provider call.
    return ground_position_ref(ref, bundle.duration_s, window)


def playhead_candidate(playhead_t: float, duration_s: float) -> CandidateSegment:
    """Default segment when a command states no timing: 10 s at the playhead."""
    interval = _centered_interval(min(playhead_t, duration_s), duration_s)
    if interval is None:
        interval = TimeInterval(0.0, duration_s)
    return CandidateSegment(
        interval=interval,
        source_category=TemporalRefCategory.OTHER,
        explanation="no timing stated; anchored at the playhead",
        source_ref=None,
    )


def merge_candidates(
    per_ref: list[list[CandidateSegment]],
) -> list[CandidateSegment]:
    """Union candidates across references.

    Overlapping or touching intervals coming from the same reference merge
    into one candidate with concatenated explanations; overlaps across
    different references are kept but flagged duplicated.
    """
    merged_lists: list[list[CandidateSegment]] = []
    for cands in per_ref:
        ordered = sorted(cands, key=lambda c: (c.interval.start_s, c.interval.end_s))
        merged: list[CandidateSegment] = []
        for c in ordered:
            if merged and c.interval.start_s <= merged[-1].interval.end_s:
                prev = merged[-1]
                explanation = prev.explanation
                if c.explanation not in explanation:
                    explanation = f"{explanation}; {c.explanation}"
                merged[-1] = dataclasses.replace(
                    prev,
                    interval=TimeInterval(
                        prev.interval.start_s,
                        max(prev.interval.end_s, c.interval.end_s),
                    ),
                    explanation=explanation,
                )
            else:
                merged.append(c)
        merged_lists.append(merged)

    flat: list[tuple[int, CandidateSegment]] = [
        (ref_idx, c) for ref_idx, cands in enumerate(merged_lists) for c in cands
    ]
    out: list[CandidateSegment] = []
    for i, (ri, c) in enumerate(flat):
        dup = any(
            rj != ri
            and c.interval.start_s < other.interval.end_s
            and other.interval.start_s < c.interval.end_s
            for j, (rj, other) in enumerate(flat)
            if j != i
        )
        out.append(dataclasses.replace(c, duplicated=dup) if dup else c)
    out.sort(key=lambda c: (c.interval.start_s, c.interval.end_s))
    return out
