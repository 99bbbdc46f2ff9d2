"""Ground-truth dataset handling and the measurement suite.

Covers dataset loading with inclusion criteria, the four metric kernels
(parse similarity, temporal precision/recall/F1 at strict and relaxed
margins, spatial mean-IOU with the >0.1 ratio, operation set F1), and the
end-to-end evaluation driver that runs the interpretation pipeline per entry
and aggregates a report.
"""

from __future__ import annotations

import json
import logging
import statistics
from dataclasses import dataclass, field
from typing import BinaryIO, NamedTuple, Optional, Sequence, Union

from sketchedit.bundle import MetadataBundle
from sketchedit.core import (
    EditOperation,
    Rect,
    TimeInterval,
    ValidationError,
    interval_distance,
    interval_intersects,
    rect_iou,
)
from sketchedit.embeddings import cosine
from sketchedit.params import apply_changes, classify_changes
from sketchedit.parsing import (
    EditCommand,
    ParsedCommand,
    command_from_dict,
    command_to_dict,
    parse,
)
from sketchedit.providers import Provider, ProviderError
from sketchedit.serde import (
    interval_from_dict,
    interval_to_dict,
    rect_from_dict,
    rect_to_dict,
)
from sketchedit.spatial import resolve
from sketchedit.temporal import ground_ref, merge_candidates, playhead_candidate

logger = logging.getLogger(__name__)

DATASET_FORMAT = "sketchedit-dataset"
DATASET_VERSION = 1
RELAXED_MARGIN_S = 10.0
MIOU_THRESHOLD = 0.1

ADMISSIBLE_CATEGORIES = ("position", "transcript", "video")


@dataclass(frozen=True)
class GtParse:
    """Reference texts the annotator isolated, one list per reference type."""

    temporal_texts: tuple[str, ...] = ()
    spatial_texts: tuple[str, ...] = ()
    operation_texts: tuple[str, ...] = ()
    parameter_texts: tuple[str, ...] = ()


@dataclass(frozen=True)
class GroundTruthEntry:
    id: str
    video_id: str
    command: EditCommand
    temporal_category: str
    gt_parse: GtParse
    gt_segments: tuple[TimeInterval, ...]
    gt_rects: dict[TimeInterval, Rect]
    gt_operations: frozenset[EditOperation]

    def __post_init__(self):
        if not self.gt_operations:
            raise ValidationError(f"entry {self.id}: gt_operations is empty")
        if self.temporal_category not in ADMISSIBLE_CATEGORIES:
            raise ValidationError(
                f"entry {self.id}: temporal category "
                f"{self.temporal_category!r} not in {ADMISSIBLE_CATEGORIES}"
            )
        missing = [s for s in self.gt_segments if s not in self.gt_rects]
        if missing:
            raise ValidationError(
                f"entry {self.id}: {len(missing)} segment(s) without a rect"
            )


class ExclusionReport(NamedTuple):
    entry_id: str
    reason: str


class LoadResult(NamedTuple):
    entries: list[GroundTruthEntry]
    excluded: list[ExclusionReport]


def entry_to_dict(e: GroundTruthEntry) -> dict:
    return {
        "id": e.id,
        "video_id": e.video_id,
        "command": command_to_dict(e.command),
        "temporal_category": e.temporal_category,
        "self_contained": True,
        "gt_parse": {
            "temporal_texts": list(e.gt_parse.temporal_texts),
            "spatial_texts": list(e.gt_parse.spatial_texts),
            "operation_texts": list(e.gt_parse.operation_texts),
            "parameter_texts": list(e.gt_parse.parameter_texts),
        },
        "gt_segments": [interval_to_dict(s) for s in e.gt_segments],
        "gt_rects": [
            {"segment": interval_to_dict(s), "rect": rect_to_dict(e.gt_rects[s])}
            for s in e.gt_segments
        ],
        "gt_operations": sorted(op.value for op in e.gt_operations),
    }


def dataset_to_dict(entries: Sequence[GroundTruthEntry]) -> dict:
    return {
        "format": DATASET_FORMAT,
        "version": DATASET_VERSION,
        "entries": [entry_to_dict(e) for e in entries],
    }


def _entry_from_dict(d: dict) -> GroundTruthEntry:
    parse_doc = d.get("gt_parse", {})
    gt_segments = tuple(interval_from_dict(s) for s in d["gt_segments"])
    gt_rects = {
        interval_from_dict(p["segment"]): rect_from_dict(p["rect"])
        for p in d["gt_rects"]
    }
    try:
        ops = frozenset(EditOperation(o) for o in d["gt_operations"])
    except ValueError as exc:
        raise ValidationError(f"unsupported operation: {exc}") from exc
    if not bool(d.get("self_contained", False)):
        raise ValidationError("entry is flagged as not self-contained")
    return GroundTruthEntry(
        id=str(d["id"]),
        video_id=str(d["video_id"]),
        command=command_from_dict(d["command"]),
        temporal_category=str(d["temporal_category"]),
        gt_parse=GtParse(
            temporal_texts=tuple(parse_doc.get("temporal_texts", ())),
            spatial_texts=tuple(parse_doc.get("spatial_texts", ())),
            operation_texts=tuple(parse_doc.get("operation_texts", ())),
            parameter_texts=tuple(parse_doc.get("parameter_texts", ())),
        ),
        gt_segments=gt_segments,
        gt_rects=gt_rects,
        gt_operations=ops,
    )


def load_dataset(source: Union[bytes, str, dict, BinaryIO]) -> LoadResult:
    """Parse a dataset document, keeping only entries passing all criteria.

    The three inclusion criteria: every ground-truth operation is one of the
    seven supported ones; the temporal category is position, transcript, or
    video; the entry is flagged self-contained. Violating entries are
    excluded, each with a report naming the reason.
    """
    if hasattr(source, "read"):
        source = source.read()
    if isinstance(source, bytes):
        source = source.decode("utf-8")
    if isinstance(source, str):
        try:
            source = json.loads(source)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"dataset is not valid JSON: {exc}") from exc
    if not isinstance(source, dict):
        raise ValidationError("dataset document must be a JSON object")
    if source.get("format") != DATASET_FORMAT:
        raise ValidationError(f"unknown dataset format {source.get('format')!r}")
    if source.get("version") != DATASET_VERSION:
        raise ValidationError(f"unsupported dataset version {source.get('version')!r}")

    entries: list[GroundTruthEntry] = []
    excluded: list[ExclusionReport] = []
    for n, raw in enumerate(source.get("entries", [])):
        entry_id = str(raw.get("id", f"#{n}"))
        try:
            entries.append(_entry_from_dict(raw))
        except (ValidationError, KeyError, TypeError) as exc:
            excluded.append(ExclusionReport(entry_id, str(exc)))
            logger.warning("excluded entry %s: %s", entry_id, exc)
    return LoadResult(entries, excluded)


# ---------------------------------------------------------------------------
# Metric kernels.


class Prf(NamedTuple):
    p: float
    r: float
    f1: float


def _f1(p: float, r: float) -> float:
    return 0.0 if p + r == 0 else 2 * p * r / (p + r)


def _segments_match(a: TimeInterval, b: TimeInterval, margin_s: float) -> bool:
    if margin_s == 0:
        return interval_intersects(a, b)
    return interval_distance(a, b) <= margin_s


def temporal_match_counts(
    pred: Sequence[TimeInterval], gt: Sequence[TimeInterval], margin_s: float
) -> tuple[int, int]:
    """(predictions matching >= 1 gt, gt matched by >= 1 prediction).

    Matching is non-exclusive: one ground-truth segment may validate any
    number of predictions. Strict margin means actual intersection; a
    positive margin relaxes to endpoint distance <= margin.
    """
    matched_pred = sum(
        1 for a in pred if any(_segments_match(a, b, margin_s) for b in gt)
    )
    matched_gt = sum(
        1 for b in gt if any(_segments_match(a, b, margin_s) for a in pred)
    )
    return matched_pred, matched_gt


def temporal_prf(
    pred: Sequence[TimeInterval], gt: Sequence[TimeInterval], margin_s: float
) -> Prf:
    if not pred and not gt:
        return Prf(1.0, 1.0, 1.0)
    if not pred or not gt:
        return Prf(0.0, 0.0, 0.0)
    matched_pred, matched_gt = temporal_match_counts(pred, gt, margin_s)
    p = matched_pred / len(pred)
    r = matched_gt / len(gt)
    return Prf(p, r, _f1(p, r))


def operation_prf(
    pred_ops: frozenset[EditOperation] | set[EditOperation],
    gt_ops: frozenset[EditOperation] | set[EditOperation],
) -> Prf:
    if not pred_ops and not gt_ops:
        return Prf(1.0, 1.0, 1.0)
    if not pred_ops or not gt_ops:
        return Prf(0.0, 0.0, 0.0)
    tp = len(set(pred_ops) & set(gt_ops))
    p = tp / len(pred_ops)
    r = tp / len(gt_ops)
    return Prf(p, r, _f1(p, r))


class SpatialScore(NamedTuple):
    miou: float
    miou_std: float
    ratio_above: float
    entry_mious: list[float]
    diagnostics: list[str]


RectPair = tuple[Optional[Rect], Rect]


def spatial_miou(per_entry: Sequence[Sequence[RectPair]]) -> SpatialScore:
    """Dataset mean of per-entry mean IOUs plus the fraction above 0.1.

    Pairs are (predicted rect, ground-truth rect) aligned on the entry's
    ground-truth segments; a None prediction scores 0. Entries with zero
    pairs carry no signal and are excluded with a diagnostic.
    """
    entry_mious: list[float] = []
    diagnostics: list[str] = []
    for n, pairs in enumerate(per_entry):
        if not pairs:
            diagnostics.append(f"entry {n} has no rect pairs; excluded")
            continue
        ious = [0.0 if a is None else rect_iou(a, b) for a, b in pairs]
        entry_mious.append(statistics.fmean(ious))
    if not entry_mious:
        return SpatialScore(0.0, 0.0, 0.0, [], diagnostics)
    miou = statistics.fmean(entry_mious)
    std = statistics.pstdev(entry_mious) if len(entry_mious) > 1 else 0.0
    ratio = sum(1 for v in entry_mious if v > MIOU_THRESHOLD) / len(entry_mious)
    return SpatialScore(miou, std, ratio, entry_mious, diagnostics)


def parse_similarity(
    pred_texts: Sequence[str], gt_texts: Sequence[str], provider: Provider
) -> float:
    """Cosine similarity of the joined reference texts, in [-1, 1].

    Both sides empty means the parser correctly found nothing (1.0); only
    one side empty is a complete miss (0.0).
    """
    if not pred_texts and not gt_texts:
        return 1.0
    if not pred_texts or not gt_texts:
        return 0.0
    a = provider.embed_text("; ".join(pred_texts))
    b = provider.embed_text("; ".join(gt_texts))
    return cosine(a, b)


# ---------------------------------------------------------------------------
# Evaluation driver.


PARSE_TYPES = ("temporal", "spatial", "operation", "parameter")


def predicted_parse_texts(parsed: ParsedCommand) -> dict[str, list[str]]:
    """Stage-1 output flattened into the four reference-text lists."""
    parameter_texts = [
        span.surface
        for op in parsed.operations
        for span in parsed.param_refs.get(op, ())
    ]
    return {
        "temporal": [r.span.surface for r in parsed.temporal_refs],
        "spatial": [r.span.surface for r in parsed.spatial_refs],
        "operation": [op.value for op in parsed.operations],
        "parameter": parameter_texts,
    }


@dataclass
class EntryResult:
    entry_id: str
    parse_sims: dict[str, float]
    pred_segments: list[TimeInterval]
    pred_ops: set[EditOperation]
    rect_pairs: list[RectPair]
    temporal_strict: Prf
    temporal_relaxed: Prf
    operation: Prf
    failure: Optional[str] = None


@dataclass
class MetricsReport:
    parsing: dict[str, tuple[float, float]]  # type -> (mean, std)
    temporal_strict: Prf
    temporal_relaxed: Prf
    spatial: SpatialScore
    operation: Prf
    entries: list[EntryResult] = field(default_factory=list)
    diagnostics: list[str] = field(default_factory=list)


def _run_entry(
    entry: GroundTruthEntry,
    bundle: MetadataBundle,
    provider: Provider,
) -> EntryResult:
    cmd = entry.command
    parsed = parse(cmd, provider)
    pred_texts = predicted_parse_texts(parsed)
    sims = {
        t: parse_similarity(
            pred_texts[t], list(getattr(entry.gt_parse, f"{t}_texts")), provider
        )
        for t in PARSE_TYPES
    }

    if parsed.temporal_refs:
        per_ref = [ground_ref(ref, bundle, provider) for ref in parsed.temporal_refs]
        candidates = merge_candidates(per_ref)
    else:
        candidates = [playhead_candidate(cmd.playhead_t, bundle.duration_s)]
    pred_segments = [c.interval for c in candidates]

    # Spatial grounding is scored on the ground-truth segments so temporal
    # misses do not contaminate it.
    rect_pairs: list[RectPair] = []
    for seg in entry.gt_segments:
        placed = resolve(seg, parsed, cmd, bundle, provider)
        rect_pairs.append((placed.rect, entry.gt_rects[seg]))

    # Stage 4 runs for pipeline coverage; its outputs carry no metric. It
    # degrades internally, so no failure handling is needed here.
    head = parsed.operations[0]
    spans = parsed.param_refs.get(head, ())
    if spans and candidates:
        defaults = _stage4_defaults(head, candidates[0].interval)
        change_set = classify_changes(
            "; ".join(s.surface for s in spans),
            head,
            defaults,
            candidates[0].interval.length_s,
            cmd.text,
            provider,
        )
        apply_changes(defaults, change_set.changes, candidates[0].interval)

    pred_ops = set(parsed.operations)
    return EntryResult(
        entry_id=entry.id,
        parse_sims=sims,
        pred_segments=pred_segments,
        pred_ops=pred_ops,
        rect_pairs=rect_pairs,
        temporal_strict=temporal_prf(pred_segments, list(entry.gt_segments), 0.0),
        temporal_relaxed=temporal_prf(
            pred_segments, list(entry.gt_segments), RELAXED_MARGIN_S
        ),
        operation=operation_prf(pred_ops, entry.gt_operations),
    )


def _stage4_defaults(op: EditOperation, segment: TimeInterval):
    from sketchedit.core import FULL_FRAME, FrameDims
    from sketchedit.params import default_params
    from sketchedit.spatial import SpatialMethod, SpatialResult

    placeholder = SpatialResult(
        rect=FULL_FRAME,
        method=SpatialMethod.FULL_FRAME,
        frame_t=segment.midpoint_s,
        explanation="defaults for evaluation",
    )
    return default_params(op, placeholder, segment, FrameDims(1280, 720))


def _zero_entry(entry: GroundTruthEntry, reason: str) -> EntryResult:
    # Nothing predicted: similarity is 1.0 only where the gt side is also empty.
    return EntryResult(
        entry_id=entry.id,
        parse_sims={
            t: 1.0 if not getattr(entry.gt_parse, f"{t}_texts") else 0.0
            for t in PARSE_TYPES
        },
        pred_segments=[],
        pred_ops=set(),
        rect_pairs=[(None, entry.gt_rects[s]) for s in entry.gt_segments],
        temporal_strict=temporal_prf([], list(entry.gt_segments), 0.0),
        temporal_relaxed=temporal_prf([], list(entry.gt_segments), RELAXED_MARGIN_S),
        operation=operation_prf(set(), entry.gt_operations),
        failure=reason,
    )


def run_evaluation(
    entries: Sequence[GroundTruthEntry],
    bundles: dict[str, MetadataBundle],
    provider: Provider,
) -> MetricsReport:
    """Interpret every entry's command and score it against the ground truth.

    Entries whose pipeline fails outright are scored as if the system
    predicted nothing, which drags every affected metric down rather than
    silently shrinking the dataset.
    """
    results: list[EntryResult] = []
    diagnostics: list[str] = []
    if not entries:
        diagnostics.append("no valid entries; empty report")
        logger.warning("run_evaluation called with zero entries")
    for entry in entries:
        bundle = bundles.get(entry.video_id)
        if bundle is None:
            diagnostics.append(f"entry {entry.id}: no bundle {entry.video_id!r}")
            results.append(_zero_entry(entry, f"missing bundle {entry.video_id!r}"))
            continue
        try:
            results.append(_run_entry(entry, bundle, provider))
        except (ProviderError, ValidationError) as exc:
            diagnostics.append(f"entry {entry.id}: pipeline failed: {exc}")
            results.append(_zero_entry(entry, str(exc)))

    parsing: dict[str, tuple[float, float]] = {}
    for t in PARSE_TYPES:
        values = [r.parse_sims[t] for r in results]
        if values:
            mean = statistics.fmean(values)
            std = statistics.pstdev(values) if len(values) > 1 else 0.0
        else:
            mean, std = 0.0, 0.0
        parsing[t] = (mean, std)

    def pooled(margin_s: float) -> Prf:
        total_pred = total_gt = hit_pred = hit_gt = 0
        for r, entry in zip(results, entries):
            mp, mg = temporal_match_counts(
                r.pred_segments, list(entry.gt_segments), margin_s
            )
            total_pred += len(r.pred_segments)
            total_gt += len(entry.gt_segments)
            hit_pred += mp
            hit_gt += mg
        if total_pred == 0 and total_gt == 0:
            return Prf(1.0, 1.0, 1.0) if results else Prf(0.0, 0.0, 0.0)
        if total_pred == 0 or total_gt == 0:
            return Prf(0.0, 0.0, 0.0)
        p = hit_pred / total_pred
        r_ = hit_gt / total_gt
        return Prf(p, r_, _f1(p, r_))

    def pooled_ops() -> Prf:
        total_pred = total_gt = tp = 0
        for r, entry in zip(results, entries):
            total_pred += len(r.pred_ops)
            total_gt += len(entry.gt_operations)
            tp += len(r.pred_ops & entry.gt_operations)
        if total_pred == 0 and total_gt == 0:
            return Prf(1.0, 1.0, 1.0) if results else Prf(0.0, 0.0, 0.0)
        if total_pred == 0 or total_gt == 0:
            return Prf(0.0, 0.0, 0.0)
        p = tp / total_pred
        r_ = tp / total_gt
        return Prf(p, r_, _f1(p, r_))

    spatial = spatial_miou([r.rect_pairs for r in results])
    diagnostics.extend(spatial.diagnostics)

    return MetricsReport(
        parsing=parsing,
        temporal_strict=pooled(0.0),
        temporal_relaxed=pooled(RELAXED_MARGIN_S),
        spatial=spatial,
        operation=pooled_ops(),
        entries=results,
        diagnostics=diagnostics,
    )


# ---------------------------------------------------------------------------
# Report output.


def report_to_dict(report: MetricsReport) -> dict:
    return {
        "parsing": {
            t: {"mean": m, "std": s} for t, (m, s) in sorted(report.parsing.items())
        },
        "temporal": {
            "strict": report.temporal_strict._asdict(),
            "margin_10s": report.temporal_relaxed._asdict(),
        },
        "spatial": {
            "miou": report.spatial.miou,
            "miou_std": report.spatial.miou_std,
            "ratio_above_0.1": report.spatial.ratio_above,
        },
        "operation": report.operation._asdict(),
        "entries": [
            {
                "id": r.entry_id,
                "parse_sims": {t: r.parse_sims[t] for t in PARSE_TYPES},
                "pred_segments": [interval_to_dict(s) for s in r.pred_segments],
                "pred_operations": sorted(op.value for op in r.pred_ops),
                "temporal_strict": r.temporal_strict._asdict(),
                "temporal_margin_10s": r.temporal_relaxed._asdict(),
                "operation": r.operation._asdict(),
                "failure": r.failure,
            }
            for r in report.entries
        ],
        "diagnostics": list(report.diagnostics),
    }


def render_report(report: MetricsReport) -> str:
    """Fixed-width table rendering of the aggregate numbers."""
    lines = []
    lines.append("parsing similarity (cosine, mean +/- std)")
    for t in PARSE_TYPES:
        mean, std = report.parsing[t]
        lines.append(f"  {t:<10} {mean:6.3f} +/- {std:5.3f}")
    lines.append("temporal grounding (P / R / F1)")
    s, m = report.temporal_strict, report.temporal_relaxed
    lines.append(f"  strict     {s.p:6.3f} / {s.r:6.3f} / {s.f1:6.3f}")
    lines.append(f"  margin 10s {m.p:6.3f} / {m.r:6.3f} / {m.f1:6.3f}")
    lines.append("spatial grounding")
    lines.append(
        f"  mIOU       {report.spatial.miou:6.3f} +/- {report.spatial.miou_std:5.3f}"
    )
    lines.append(f"  ratio>0.1  {report.spatial.ratio_above:6.3f}")
    o = report.operation
    lines.append("operation classification (P / R / F1)")
    lines.append(f"  all ops    {o.p:6.3f} / {o.r:6.3f} / {o.f1:6.3f}")
    lines.append(
        f"{len(report.entries)} entries, "
        f"{sum(1 for r in report.entries if r.failure)} failed, "
        f"{len(report.diagnostics)} diagnostics"
    )
    return "\n".join(lines)
