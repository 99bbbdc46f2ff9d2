"""Pre-computed per-video metadata: schema, validation, queries, synthesis.

A bundle captures everything the interpretation pipeline needs to know about
a video without decoding media: the transcript, 10-second clip descriptions,
and per-second frames with instance crops plus their embeddings. Vision and
caption models run elsewhere; this module only owns the document format.
"""

from __future__ import annotations

import json
import logging
import math
import random
from dataclasses import dataclass, field
from importlib import resources
from typing import Any, BinaryIO, Union

import jsonschema

from sketchedit.core import (
    Embedding,
    FrameDims,
    Rect,
    TimeInterval,
    ValidationError,
    interval_intersects,
)
from sketchedit.embeddings import hash_embedding
from sketchedit.serde import interval_to_dict, rect_from_dict, rect_to_dict

logger = logging.getLogger(__name__)

BUNDLE_FORMAT_VERSION = 1
_AREA_TOL = 1e-6
_TIME_TOL = 1e-6
_CLIP_NOMINAL_S = 10.0


class BundleError(ValidationError):
    """Bundle document violates the schema or a semantic invariant."""

    def __init__(self, path: str, constraint: str):
        self.path = path
        self.constraint = constraint
        super().__init__(f"{path}: {constraint}")


class EmbeddingDimMismatch(BundleError):
    """An embedding's length disagrees with the bundle's declared dim."""


@dataclass(frozen=True)
class TranscriptSegment:
    interval: TimeInterval
    text: str

    def __post_init__(self):
        if not self.text:
            raise ValidationError("transcript segment text must be non-empty")


@dataclass(frozen=True)
class ClipMetadata:
    interval: TimeInterval
    action_label: str
    abstract_caption: str
    dense_captions: tuple[str, ...]
    summary: str

    def __post_init__(self):
        if self.interval.length_s > _CLIP_NOMINAL_S + _TIME_TOL:
            raise ValidationError(
                f"clip length {self.interval.length_s} exceeds {_CLIP_NOMINAL_S} s"
            )

    def description_text(self) -> str:
        """Searchable text: action label, captions, and summary combined."""
        parts = [self.action_label, self.abstract_caption, *self.dense_captions,
                 self.summary]
        return ". ".join(p for p in parts if p)


@dataclass(frozen=True)
class InstanceCrop:
    rect: Rect
    area_fraction: float
    granularity_level: int
    embedding: Embedding

    def __post_init__(self):
        if not 0 < self.area_fraction <= 1:
            raise ValidationError(
                f"area_fraction must be in (0,1], got {self.area_fraction}"
            )
        if abs(self.area_fraction - self.rect.area) > _AREA_TOL:
            raise ValidationError(
                f"area_fraction {self.area_fraction} disagrees with rect area "
                f"{self.rect.area}"
            )
        if self.granularity_level < 0:
            raise ValidationError("granularity_level must be >= 0")


@dataclass(frozen=True)
class FrameMetadata:
    timestamp_s: float
    crops: tuple[InstanceCrop, ...]

    def __post_init__(self):
        if not (math.isfinite(self.timestamp_s) and self.timestamp_s >= 0):
            raise ValidationError(f"bad frame timestamp {self.timestamp_s}")


@dataclass(frozen=True)
class MetadataBundle:
    video_id: str
    duration_s: float
    frame_dims: FrameDims
    transcript: tuple[TranscriptSegment, ...]
    clips: tuple[ClipMetadata, ...]
    frames: tuple[FrameMetadata, ...]
    embedding_dim: int
    min_crop_area_fraction: float = 0.005

    def __post_init__(self):
        _validate_bundle(self)


def _validate_bundle(b: MetadataBundle) -> None:
    if not b.video_id:
        raise BundleError("video_id", "must be non-empty")
    if not (math.isfinite(b.duration_s) and b.duration_s > 0):
        raise BundleError("duration_s", f"must be positive, got {b.duration_s}")
    if b.embedding_dim < 1:
        raise BundleError("embedding_dim", "must be >= 1")
    if not 0 < b.min_crop_area_fraction <= 1:
        raise BundleError("min_crop_area_fraction", "must be in (0, 1]")

    prev_end = None
    for i, seg in enumerate(b.transcript):
        path = f"transcript[{i}]"
        if seg.interval.end_s > b.duration_s + _TIME_TOL:
            raise BundleError(path, "interval exceeds video duration")
        if prev_end is not None and seg.interval.start_s < prev_end - _TIME_TOL:
            raise BundleError(path, "transcript segments overlap or are unsorted")
        prev_end = seg.interval.end_s

    for i, clip in enumerate(b.clips):
        path = f"clips[{i}]"
        if i == 0 and abs(clip.interval.start_s) > _TIME_TOL:
            raise BundleError(path, "first clip must start at 0")
        if i > 0:
            gap = clip.interval.start_s - b.clips[i - 1].interval.end_s
            if gap < -_TIME_TOL:
                raise BundleError(path, "clips overlap")
            if gap > _TIME_TOL:
                raise BundleError(path, "gap between clips")
        if clip.interval.end_s > b.duration_s + _TIME_TOL:
            raise BundleError(path, "interval exceeds video duration")
        expected = int(math.ceil(clip.interval.length_s - _TIME_TOL))
        if len(clip.dense_captions) != expected:
            raise BundleError(
                path,
                f"expected {expected} dense captions (one per second), "
                f"got {len(clip.dense_captions)}",
            )
    if b.clips and abs(b.clips[-1].interval.end_s - b.duration_s) > _TIME_TOL:
        raise BundleError("clips", "clips do not tile the full duration")

    for i, frame in enumerate(b.frames):
        path = f"frames[{i}]"
        if frame.timestamp_s >= b.duration_s:
            raise BundleError(path, "timestamp past video end")
        if i == 0 and abs(frame.timestamp_s) > _TIME_TOL:
            raise BundleError(path, "first frame must sit at 0.0")
        if i > 0:
            gap = frame.timestamp_s - b.frames[i - 1].timestamp_s
            if gap <= 0:
                raise BundleError(path, "frame timestamps must strictly increase")
            # The final frame may fall short of the grid; all others are 1.0 s.
            if i < len(b.frames) - 1 and abs(gap - 1.0) > _TIME_TOL:
                raise BundleError(path, f"frame spacing {gap} is not 1.0 s")
            if i == len(b.frames) - 1 and gap > 1.0 + _TIME_TOL:
                raise BundleError(path, f"final frame gap {gap} exceeds 1.0 s")
        for k, crop in enumerate(frame.crops):
            cpath = f"{path}.crops[{k}]"
            if crop.area_fraction < b.min_crop_area_fraction - _AREA_TOL:
                raise BundleError(
                    cpath,
                    f"area_fraction {crop.area_fraction} below declared minimum "
                    f"{b.min_crop_area_fraction}",
                )
            if crop.embedding.dim != b.embedding_dim:
                raise EmbeddingDimMismatch(
                    cpath,
                    f"embedding dim {crop.embedding.dim} != declared "
                    f"{b.embedding_dim}",
                )


_SCHEMA_CACHE: dict[str, Any] = {}


def bundle_schema() -> dict:
    """The JSON Schema document shipped with the package."""
    if "doc" not in _SCHEMA_CACHE:
        text = (
            resources.files("sketchedit") / "schemas" / "bundle.schema.json"
        ).read_text(encoding="utf-8")
        _SCHEMA_CACHE["doc"] = json.loads(text)
    return _SCHEMA_CACHE["doc"]


def load_bundle(source: Union[bytes, str, BinaryIO]) -> MetadataBundle:
    """Parse and fully validate a bundle document.

    Accepts raw bytes, a JSON string, or a binary stream. Raises BundleError
    (with .path and .constraint) on any schema or semantic violation;
    embedding size problems raise the EmbeddingDimMismatch subclass.
    """
    if hasattr(source, "read"):
        raw = source.read()
    else:
        raw = source
    if isinstance(raw, bytes):
        raw = raw.decode("utf-8")
    try:
        doc = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise BundleError("$", f"not valid JSON: {exc}") from exc

    validator = jsonschema.Draft202012Validator(bundle_schema())
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        first = errors[0]
        path = "$" + "".join(
            f"[{p}]" if isinstance(p, int) else f".{p}" for p in first.absolute_path
        )
        raise BundleError(path, first.message)
    return bundle_from_dict(doc)


def bundle_from_dict(doc: dict) -> MetadataBundle:
    version = doc.get("format_version", BUNDLE_FORMAT_VERSION)
    if version != BUNDLE_FORMAT_VERSION:
        raise BundleError("format_version", f"unsupported version {version}")

    def _interval(d: dict, path: str) -> TimeInterval:
        try:
            return TimeInterval(float(d["start_s"]), float(d["end_s"]))
        except ValidationError as exc:
            raise BundleError(path, str(exc)) from exc

    try:
        transcript = tuple(
            TranscriptSegment(_interval(t, f"transcript[{i}]"), t["text"])
            for i, t in enumerate(doc["transcript"])
        )
        clips = tuple(
            ClipMetadata(
                _interval(c, f"clips[{i}]"),
                c["action_label"],
                c["abstract_caption"],
                tuple(c["dense_captions"]),
                c["summary"],
            )
            for i, c in enumerate(doc["clips"])
        )
        frames = tuple(
            FrameMetadata(
                float(f["timestamp_s"]),
                tuple(
                    InstanceCrop(
                        rect_from_dict(cr["rect"]),
                        float(cr["area_fraction"]),
                        int(cr["granularity_level"]),
                        Embedding(tuple(float(v) for v in cr["embedding"])),
                    )
                    for cr in f["crops"]
                ),
            )
            for f in doc["frames"]
        )
        return MetadataBundle(
            video_id=doc["video_id"],
            duration_s=float(doc["duration_s"]),
            frame_dims=FrameDims(
                int(doc["frame_dims"]["width_px"]),
                int(doc["frame_dims"]["height_px"]),
            ),
            transcript=transcript,
            clips=clips,
            frames=frames,
            embedding_dim=int(doc["embedding_dim"]),
            min_crop_area_fraction=float(doc["min_crop_area_fraction"]),
        )
    except BundleError:
        raise
    except ValidationError as exc:
        raise BundleError("$", str(exc)) from exc


def bundle_to_dict(b: MetadataBundle) -> dict:
    """Serialize back to the document format (load -> dump is a fixed point)."""
    return {
        "format_version": BUNDLE_FORMAT_VERSION,
        "video_id": b.video_id,
        "duration_s": b.duration_s,
        "frame_dims": {
            "width_px": b.frame_dims.width_px,
            "height_px": b.frame_dims.height_px,
        },
        "embedding_dim": b.embedding_dim,
        "min_crop_area_fraction": b.min_crop_area_fraction,
        "transcript": [
            {**interval_to_dict(s.interval), "text": s.text} for s in b.transcript
        ],
        "clips": [
            {
                **interval_to_dict(c.interval),
                "action_label": c.action_label,
                "abstract_caption": c.abstract_caption,
                "dense_captions": list(c.dense_captions),
                "summary": c.summary,
            }
            for c in b.clips
        ],
        "frames": [
            {
                "timestamp_s": f.timestamp_s,
                "crops": [
                    {
                        "rect": rect_to_dict(cr.rect),
                        "area_fraction": cr.area_fraction,
                        "granularity_level": cr.granularity_level,
                        "embedding": list(cr.embedding.values),
                    }
                    for cr in f.crops
                ],
            }
            for f in b.frames
        ],
    }


def snippets_in_range(
    bundle: MetadataBundle, window: TimeInterval
) -> list[TranscriptSegment]:
    """Transcript segments intersecting the half-open window, in order."""
    return [s for s in bundle.transcript if interval_intersects(s.interval, window)]


def clips_overlapping(bundle: MetadataBundle, window: TimeInterval) -> list[ClipMetadata]:
    return [c for c in bundle.clips if interval_intersects(c.interval, window)]


def frame_nearest(bundle: MetadataBundle, t: float) -> FrameMetadata:
    """Frame minimizing |timestamp - t|; equidistant ties pick the earlier one."""
    if not bundle.frames:
        raise ValidationError("bundle has no frames")
    if not 0 <= t < bundle.duration_s:
        raise ValidationError(f"t={t} outside [0, {bundle.duration_s})")
    return min(bundle.frames, key=lambda f: (abs(f.timestamp_s - t), f.timestamp_s))


# ---------------------------------------------------------------------------
# Synthetic bundles for tests and offline demos.

_NOUNS = ("pan", "whisk", "cutting board", "kettle", "mixing bowl", "spatula",
          "plate", "oven mitt", "skillet", "measuring cup")
_VERBS = ("stirring", "chopping", "pouring", "whisking", "searing", "plating",
          "kneading", "slicing")
_PLACES = ("counter", "stovetop", "sink", "table edge", "shelf", "window")


@dataclass(frozen=True)
class CropPlant:
    """A crop to embed at a known frame with a known label, for tests."""

    frame_t: float
    rect: Rect
    label: str


@dataclass(frozen=True)
class SynthSpec:
    """Generator parameters for synthesize_bundle."""

    video_id: str = "synthetic"
    duration_s: float = 60.0
    frame_dims: FrameDims = FrameDims(1280, 720)
    embedding_dim: int = 64
    min_crop_area_fraction: float = 0.005
    transcript_texts: tuple[str, ...] = ()  # empty -> generated sentences
    transcript_segment_s: float = 10.0
    crops_per_frame: int = 2
    crop_plants: tuple[CropPlant, ...] = field(default_factory=tuple)


def crop_label_embedding(label: str, dim: int) -> Embedding:
    """The embedding rule synthesize_bundle applies to crop labels.

    Exposed so tests can plant a crop and later reproduce its vector from the
    label alone (the oracle text embedder uses the same hash construction).
    """
    return hash_embedding(label, dim=dim, seed=0)


def synthesize_bundle(spec: SynthSpec, seed: int) -> MetadataBundle:
    """Deterministic fixture generator; same (spec, seed) -> identical bundle."""
    rng = random.Random(seed)
    dur = spec.duration_s

    if spec.transcript_texts:
        texts = spec.transcript_texts
        seg = spec.transcript_segment_s
        transcript = []
        for i, text in enumerate(texts):
            start = i * seg
            end = min(start + seg, dur)
            if start >= dur:
                raise ValidationError("transcript_texts overflow the duration")
            transcript.append(TranscriptSegment(TimeInterval(start, end), text))
    else:
        transcript = []
        t = 0.0
        while t < dur:
            end = min(t + 10.0, dur)
            sentence = (
                f"so now I am {rng.choice(_VERBS)} the {rng.choice(_NOUNS)} "
                f"over by the {rng.choice(_PLACES)}"
            )
            transcript.append(TranscriptSegment(TimeInterval(t, end), sentence))
            t = end

    clips = []
    t = 0.0
    while t < dur:
        end = min(t + _CLIP_NOMINAL_S, dur)
        seconds = int(math.ceil(end - t - _TIME_TOL))
        noun = rng.choice(_NOUNS)
        clips.append(
            ClipMetadata(
                interval=TimeInterval(t, end),
                action_label=f"{rng.choice(_VERBS)} {noun}",
                abstract_caption=f"a person is {rng.choice(_VERBS)} a {noun}",
                dense_captions=tuple(
                    f"{rng.choice(_NOUNS)} near the {rng.choice(_PLACES)}"
                    for _ in range(seconds)
                ),
                summary=f"segment about the {noun}",
            )
        )
        t = end

    plants_by_frame: dict[float, list[CropPlant]] = {}
    frame_count = int(math.ceil(dur - _TIME_TOL))
    for plant in spec.crop_plants:
        ts = float(min(range(frame_count), key=lambda i: (abs(i - plant.frame_t), i)))
        plants_by_frame.setdefault(ts, []).append(plant)

    frames = []
    for i in range(frame_count):
        crops = []
        for k in range(spec.crops_per_frame):
            w = rng.uniform(0.1, 0.4)
            h = rng.uniform(0.1, 0.4)
            x = rng.uniform(0.0, 1.0 - w)
            y = rng.uniform(0.0, 1.0 - h)
            rect = Rect(x, y, w, h)
            label = f"{spec.video_id} background object {i}.{k}"
            crops.append(
                InstanceCrop(
                    rect=rect,
                    area_fraction=rect.area,
                    granularity_level=rng.choice((0, 1)),
                    embedding=crop_label_embedding(label, spec.embedding_dim),
                )
            )
        for plant in plants_by_frame.get(float(i), ()):
            crops.append(
                InstanceCrop(
                    rect=plant.rect,
                    area_fraction=plant.rect.area,
                    granularity_level=0,
                    embedding=crop_label_embedding(plant.label, spec.embedding_dim),
                )
            )
        frames.append(FrameMetadata(timestamp_s=float(i), crops=tuple(crops)))

    return MetadataBundle(
        video_id=spec.video_id,
        duration_s=dur,
        frame_dims=spec.frame_dims,
        transcript=tuple(transcript),
        clips=tuple(clips),
        frames=tuple(frames),
        embedding_dim=spec.embedding_dim,
        min_crop_area_fraction=spec.min_crop_area_fraction,
    )
