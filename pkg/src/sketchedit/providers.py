"""Language-model and embedding access with record/replay and an oracle mode.

Three interchangeable providers sit behind one interface: LiveProvider talks
HTTP to a chat-completion endpoint and an embedding endpoint, ReplayProvider
answers from a recorded cache (bit-identical across runs), and
OracleProvider synthesizes deterministic answers for tests, either from
scripted fixtures or from lexical heuristics. RecordingProvider wraps any of
them and appends every exchange to a cache file.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import os
import re
import time
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Optional, Protocol, Union

import httpx

from sketchedit.bundle import MetadataBundle, frame_nearest
from sketchedit.core import Embedding, Rect, ValidationError, rect_iou
from sketchedit.embeddings import HashEmbedder, cosine  # noqa: F401  (re-export)
from sketchedit.lexical import (
    classify_operations,
    content_words,
    find_abstract_position,
    find_time_tokens,
)
from sketchedit.prompts import (
    OutputParseError,
    TemplateId,
    build_messages,
    parse_response,
    validate_payload,
)
from sketchedit.serde import canonical_json

logger = logging.getLogger(__name__)

CACHE_FORMAT = "sketchedit-replay"
CACHE_VERSION = 1
DEFAULT_EMBED_DIM = 64


class ProviderMode(str, Enum):
    LIVE = "live"
    REPLAY = "replay"
    ORACLE = "oracle"


class ProviderError(Exception):
    """Base class for provider failures."""


class RetryableError(ProviderError):
    """Transport-level failure; the call may be retried."""


class MalformedResponse(ProviderError):
    """Model output failed schema validation even after repair re-prompts."""

    def __init__(self, raw_text: str, reason: str):
        self.raw_text = raw_text
        self.reason = reason
        super().__init__(f"malformed model output: {reason}")


class ReplayMiss(ProviderError):
    """Request key absent from the replay cache."""

    def __init__(self, key: str, template: str):
        self.key = key
        self.template = template
        super().__init__(f"replay cache has no entry for {template} key {key}")


@dataclass(frozen=True)
class FrameRef:
    """Identifies one sampled frame of one video."""

    video_id: str
    t_s: float


@dataclass(frozen=True)
class ChatRequest:
    template: TemplateId
    payload: dict
    decoding_temperature: float = 0.0

    def __post_init__(self):
        validate_payload(self.template, self.payload)


@dataclass(frozen=True)
class ChatResponse:
    payload: dict
    raw_text: str


def request_key(template: str, payload: dict) -> str:
    """Stable cache key: sha256 over the canonicalized request."""
    doc = canonical_json({"template": template, "payload": payload})
    return hashlib.sha256(doc.encode("utf-8")).hexdigest()


class Provider(Protocol):
    mode: ProviderMode

    def complete(self, req: ChatRequest) -> ChatResponse: ...

    def embed_text(self, s: str) -> Embedding: ...

    def embed_region(self, frame_ref: FrameRef, rect: Rect) -> Embedding: ...


# ---------------------------------------------------------------------------
# Replay cache: append-only JSONL with a version header line.


class ReplayCache:
    """Append-only request/response store backing replay mode.

    Line 1 is a header record; each further line holds one exchange keyed by
    request hash. Re-recorded keys are legal; the last occurrence wins.
    """

    def __init__(self, path: Union[str, Path]):
        self.path = Path(path)
        self._entries: dict[str, dict] = {}
        if self.path.exists():
            self._load()

    def _load(self) -> None:
        with open(self.path, encoding="utf-8") as fh:
            header_seen = False
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                doc = json.loads(line)
                if not header_seen:
                    if doc.get("format") != CACHE_FORMAT:
                        raise ValidationError(
                            f"{self.path}: not a replay cache (bad header)"
                        )
                    if doc.get("version") != CACHE_VERSION:
                        raise ValidationError(
                            f"{self.path}: unsupported cache version "
                            f"{doc.get('version')}"
                        )
                    header_seen = True
                    continue
                try:
                    self._entries[doc["key"]] = doc
                except KeyError as exc:
                    raise ValidationError(
                        f"{self.path}:{lineno}: cache record missing 'key'"
                    ) from exc

    def _ensure_header(self) -> None:
        if not self.path.exists() or self.path.stat().st_size == 0:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with open(self.path, "w", encoding="utf-8") as fh:
                fh.write(
                    canonical_json({"format": CACHE_FORMAT, "version": CACHE_VERSION})
                    + "\n"
                )

    def append(self, record: dict) -> None:
        self._ensure_header()
        with open(self.path, "a", encoding="utf-8") as fh:
            fh.write(canonical_json(record) + "\n")
        self._entries[record["key"]] = record

    def get(self, key: str) -> Optional[dict]:
        return self._entries.get(key)

    def __len__(self) -> int:
        return len(self._entries)

    def summary(self) -> dict:
        """Counts per template, for `cache inspect`."""
        by_template: dict[str, int] = {}
        for rec in self._entries.values():
            by_template[rec["template"]] = by_template.get(rec["template"], 0) + 1
        return {
            "path": str(self.path),
            "entries": len(self._entries),
            "by_template": dict(sorted(by_template.items())),
        }


class ReplayProvider:
    """Answers every request from a recorded cache; misses are errors."""

    mode = ProviderMode.REPLAY

    def __init__(self, cache: Union[ReplayCache, str, Path]):
        self.cache = cache if isinstance(cache, ReplayCache) else ReplayCache(cache)

    def complete(self, req: ChatRequest) -> ChatResponse:
        key = request_key(req.template.value, req.payload)
        rec = self.cache.get(key)
        if rec is None:
            raise ReplayMiss(key, req.template.value)
        return ChatResponse(
            payload=rec["response"]["payload"], raw_text=rec["response"]["raw_text"]
        )

    def _embedding(self, template: str, payload: dict) -> Embedding:
        key = request_key(template, payload)
        rec = self.cache.get(key)
        if rec is None:
            raise ReplayMiss(key, template)
        return Embedding(tuple(rec["response"]["embedding"]))

    def embed_text(self, s: str) -> Embedding:
        return self._embedding("embed_text", {"text": s})

    def embed_region(self, frame_ref: FrameRef, rect: Rect) -> Embedding:
        return self._embedding("embed_region", _region_payload(frame_ref, rect))


def _region_payload(frame_ref: FrameRef, rect: Rect) -> dict:
    return {
        "video_id": frame_ref.video_id,
        "t_s": frame_ref.t_s,
        "rect": {"x": rect.x, "y": rect.y, "w": rect.w, "h": rect.h},
    }


# ---------------------------------------------------------------------------
# Live provider.


@dataclass(frozen=True)
class LiveConfig:
    chat_url: str
    chat_model: str
    embed_url: str
    embed_model: str
    api_key: str = ""
    timeout_s: float = 60.0
    max_repairs: int = 2
    transport_retries: int = 2
    embed_dim: int = DEFAULT_EMBED_DIM

    @classmethod
    def from_env(cls, env: Optional[dict] = None) -> "LiveConfig":
        e = os.environ if env is None else env
        missing = [
            k
            for k in ("SKETCHEDIT_CHAT_URL", "SKETCHEDIT_EMBED_URL")
            if not e.get(k)
        ]
        if missing:
            raise ValidationError(f"live mode needs env vars: {missing}")
        return cls(
            chat_url=e["SKETCHEDIT_CHAT_URL"],
            chat_model=e.get("SKETCHEDIT_CHAT_MODEL", "gpt-4-0613"),
            embed_url=e["SKETCHEDIT_EMBED_URL"],
            embed_model=e.get("SKETCHEDIT_EMBED_MODEL", "text-embedding-3-small"),
            api_key=e.get("SKETCHEDIT_API_KEY", ""),
            timeout_s=float(e.get("SKETCHEDIT_TIMEOUT_S", "60")),
            embed_dim=int(e.get("SKETCHEDIT_EMBED_DIM", str(DEFAULT_EMBED_DIM))),
        )


class LiveProvider:
    """HTTP chat + embedding client with retry and output-repair loops."""

    mode = ProviderMode.LIVE

    def __init__(self, config: LiveConfig, client: Optional[httpx.Client] = None):
        self.config = config
        headers = {}
        if config.api_key:
            headers["Authorization"] = f"Bearer {config.api_key}"
        self._client = client or httpx.Client(
            timeout=config.timeout_s, headers=headers
        )

    def _post(self, url: str, body: dict) -> dict:
        last: Optional[Exception] = None
        for attempt in range(1 + self.config.transport_retries):
            try:
                resp = self._client.post(url, json=body)
                resp.raise_for_status()
                return resp.json()
            except (httpx.TransportError, httpx.HTTPStatusError) as exc:
                last = exc
                logger.warning("provider call failed (attempt %d): %s", attempt, exc)
                time.sleep(min(2.0, 0.2 * (attempt + 1)))
        raise RetryableError(str(last))

    def _chat(self, messages: list[dict]) -> str:
        doc = self._post(
            self.config.chat_url,
            {
                "model": self.config.chat_model,
                "messages": messages,
                "temperature": 0.0,
            },
        )
        try:
            return doc["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise RetryableError(f"chat endpoint shape unexpected: {exc}") from exc

    def complete(self, req: ChatRequest) -> ChatResponse:
        messages = build_messages(req.template, req.payload)
        raw = ""
        last_err: Optional[OutputParseError] = None
        for _ in range(1 + self.config.max_repairs):
            raw = self._chat(messages)
            try:
                payload = parse_response(req.template, raw)
                return ChatResponse(payload=payload, raw_text=raw)
            except OutputParseError as exc:
                last_err = exc
                messages = messages + [
                    {"role": "assistant", "content": raw},
                    {
                        "role": "user",
                        "content": (
                            f"That reply could not be used: {exc}. Send the "
                            "corrected JSON object and nothing else."
                        ),
                    },
                ]
        raise MalformedResponse(raw, str(last_err))

    def _embed(self, input_doc: dict) -> Embedding:
        doc = self._post(
            self.config.embed_url,
            {"model": self.config.embed_model, **input_doc},
        )
        try:
            values = doc["data"][0]["embedding"]
        except (KeyError, IndexError, TypeError) as exc:
            raise RetryableError(f"embed endpoint shape unexpected: {exc}") from exc
        emb = Embedding(tuple(float(v) for v in values))
        norm = emb.norm()
        if norm == 0:
            raise RetryableError("embedding endpoint returned a zero vector")
        return Embedding(tuple(v / norm for v in emb.values))

    def embed_text(self, s: str) -> Embedding:
        if not s:
            raise ValidationError("cannot embed an empty string")
        return self._embed({"input": s})

    def embed_region(self, frame_ref: FrameRef, rect: Rect) -> Embedding:
        # The embedding endpoint owns the media; we only name the region.
        return self._embed({"region": _region_payload(frame_ref, rect)})


# ---------------------------------------------------------------------------
# Oracle provider: scripted fixtures first, lexical heuristics otherwise.


@dataclass
class OracleProvider:
    """Deterministic stand-in for the model, for tests and offline demos.

    ``scripted`` holds per-template FIFO queues of response payloads; when a
    queue is empty the provider falls back to lexical heuristics, so the
    pipeline is always runnable without fixtures.
    """

    bundles: dict[str, MetadataBundle] = field(default_factory=dict)
    embed_dim: int = DEFAULT_EMBED_DIM
    seed: int = 0
    scripted: dict[TemplateId, deque] = field(default_factory=dict)
    mode: ProviderMode = field(default=ProviderMode.ORACLE, init=False)

    def __post_init__(self):
        self._embedder = HashEmbedder(dim=self.embed_dim, seed=self.seed)

    def script(self, template: TemplateId, payload: dict) -> None:
        """Queue one response payload for the next call to this template."""
        parse_response(template, json.dumps(payload))  # must be schema-valid
        self.scripted.setdefault(template, deque()).append(payload)

    def add_bundle(self, bundle: MetadataBundle) -> None:
        self.bundles[bundle.video_id] = bundle

    def complete(self, req: ChatRequest) -> ChatResponse:
        queue = self.scripted.get(req.template)
        if queue:
            payload = queue.popleft()
        else:
            payload = _HEURISTICS[req.template](req.payload)
        payload = parse_response(req.template, json.dumps(payload))
        return ChatResponse(payload=payload, raw_text=canonical_json(payload))

    def embed_text(self, s: str) -> Embedding:
        return self._embedder.embed(s)

    def embed_region(self, frame_ref: FrameRef, rect: Rect) -> Embedding:
        bundle = self.bundles.get(frame_ref.video_id)
        if bundle is not None and bundle.frames:
            frame = frame_nearest(bundle, min(frame_ref.t_s, bundle.duration_s - 1e-9))
            if frame.crops:
                best = max(
                    frame.crops,
                    key=lambda c: (
                        rect_iou(rect, c.rect),
                        -_center_dist(rect, c.rect),
                    ),
                )
                return best.embedding
        return self._embedder.embed(
            f"region {frame_ref.video_id} {frame_ref.t_s:.3f} "
            f"{rect.x:.4f} {rect.y:.4f} {rect.w:.4f} {rect.h:.4f}"
        )


def _center_dist(a: Rect, b: Rect) -> float:
    ax, ay = a.x + a.w / 2, a.y + a.h / 2
    bx, by = b.x + b.w / 2, b.y + b.h / 2
    return math.hypot(ax - bx, ay - by)


# Heuristic response builders. These mirror the degraded lexical path so the
# oracle is total; tests that need exact answers use scripted fixtures.


def _h_stage1(payload: dict) -> dict:
    text = payload["command_text"]
    ops = classify_operations(text)
    temporal = [
        {"text": tok.surface, "category": "position"} for tok in find_time_tokens(text)
    ]
    if not temporal and find_abstract_position(text):
        m = re.search(
            r"\b(?:the\s+)?(intro|beginning|opening|start|ending|outro|conclusion|end)\b",
            text,
            re.IGNORECASE,
        )
        if m:
            temporal.append({"text": m.group(0), "category": "position"})
    m = re.search(
        r"\b(?:whenever|when|every time)\b[^,.;]*", text, re.IGNORECASE
    )
    if m:
        clause = m.group(0)
        if re.search(r"\b(mention|say|says|said|talk|speak|discuss)", clause, re.I):
            temporal.append({"text": clause, "category": "transcript"})
        elif re.search(r"\b(see|seen|shown|shows|appears|screen|visible)", clause, re.I):
            temporal.append({"text": clause, "category": "video"})
    spatial = []
    m = re.search(
        r"\b(?:on|in|at|to|near)\b[^,.;]*\b(top|bottom|left|right|center|centre|corner)\b[^,.;]*",
        text,
        re.IGNORECASE,
    )
    if m:
        spatial.append({"text": m.group(0).strip(), "category": "independent"})
    m = re.search(r"\b(?:over|around|behind|onto)\s+the\s+([a-z][a-z' ]*)", text, re.I)
    if m:
        spatial.append({"text": m.group(1).strip(), "category": "visual_dependent"})
    return {
        "operations": [op.value for op in ops],
        "temporal_references": temporal,
        "spatial_references": spatial,
        "parameter_references": [{"operation": ops[0].value, "text": text}],
    }


def _h_stage2_temporal(payload: dict) -> dict:
    duration = float(payload["duration_s"])
    text = payload["reference_text"]
    intervals = []
    for tok in find_time_tokens(text):
        if tok.is_range:
            start = max(0.0, tok.start_s)
            end = min(duration, tok.end_s)
        else:
            start = max(0.0, min(tok.start_s - 5.0, duration - 10.0))
            end = min(duration, start + 10.0)
        if start < end:
            intervals.append({"start_s": start, "end_s": end})
    if not intervals:
        where = find_abstract_position(text)
        if where == "intro":
            intervals.append({"start_s": 0.0, "end_s": min(60.0, duration)})
        elif where == "ending":
            intervals.append(
                {"start_s": max(0.0, duration - 60.0), "end_s": duration}
            )
    return {"intervals": intervals, "explanation": "read the timecodes literally"}


def _match_by_words(reference_text: str, items: list[dict], text_key: str) -> dict:
    ref_words = set(content_words(reference_text))
    matches = []
    for item in items:
        shared = ref_words.intersection(content_words(item[text_key]))
        if shared:
            word = sorted(shared)[0]
            matches.append(
                {"index": int(item["index"]), "explanation": f"mentions '{word}'"}
            )
    return {"matches": matches}


def _h_stage2_transcript(payload: dict) -> dict:
    return _match_by_words(payload["reference_text"], payload["snippets"], "text")


def _h_stage2_video(payload: dict) -> dict:
    return _match_by_words(payload["reference_text"], payload["clips"], "description")


def _h_stage3(payload: dict) -> dict:
    w = int(payload["frame_width_px"])
    h = int(payload["frame_height_px"])
    init = payload["initial_rect_px"]
    bw = int(init["width"])
    bh = int(init["height"])
    # Full-frame starting boxes shrink to a quarter so placement is visible.
    if bw >= w and bh >= h:
        bw, bh = w // 2, h // 2
    text = f"{payload['reference_text']} {payload['command_text']}".lower()
    x, y = int(init["x"]), int(init["y"])
    if "left" in text:
        x = 0
    if "right" in text:
        x = w - bw
    if "top" in text or "upper" in text:
        y = 0
    if "bottom" in text or "lower" in text:
        y = h - bh
    if "center" in text or "centre" in text or "middle" in text:
        x, y = (w - bw) // 2, (h - bh) // 2
    x = max(0, min(x, w - bw))
    y = max(0, min(y, h - bh))
    return {
        "rect_px": {"x": x, "y": y, "width": bw, "height": bh},
        "explanation": "placed from the named frame region",
    }


_COLORS = ("white", "black", "red", "blue", "green", "yellow", "orange", "purple")


def _h_stage4_params(payload: dict) -> dict:
    op = payload["operation"]
    text = payload["reference_text"].lower()
    changes: list[dict] = []
    primary = {
        "text": "font_size",
        "blur": "degree",
        "zoom": "animation_duration_s",
    }.get(op)

    m = re.search(r"(\d+(?:\.\d+)?)\s*px", text)
    if m and op == "text":
        changes.append(
            {"field": "font_size", "kind": "explicit", "value": float(m.group(1))}
        )
    for color in _COLORS:
        if re.search(rf"\b{color}\b", text) and op == "text":
            changes.append(
                {"field": "font_color", "kind": "explicit", "value": color}
            )
            break
    if op == "shape":
        for kind in ("circle", "rectangle", "star"):
            if kind in text:
                changes.append({"field": "kind", "kind": "explicit", "value": kind})
                break
        else:
            if "highlight" in text or "highlight" in payload["command_text"].lower():
                changes.append({"field": "kind", "kind": "explicit", "value": "star"})
    if op == "blur":
        m = re.search(r"\b(0?\.\d+)\b", text)
        if m:
            changes.append(
                {"field": "degree", "kind": "explicit", "value": float(m.group(1))}
            )

    m = re.search(r"(\d+(?:\.\d+)?)\s*seconds?\s*(longer|shorter)", text)
    if m:
        delta = float(m.group(1))
        if m.group(2) == "shorter":
            delta = -delta
        changes.append({"field": "duration_s", "kind": "relative", "delta": delta})
    m = re.search(r"(\d+(?:\.\d+)?)\s*%\s*(less|smaller|more|bigger|larger)", text)
    if m:
        frac = float(m.group(1)) / 100.0
        factor = 1.0 - frac if m.group(2) in ("less", "smaller") else 1.0 + frac
        target = "duration_s"
        if primary and not re.search(r"\b(long|short|duration)", text):
            target = primary
        changes.append({"field": target, "kind": "relative", "factor": factor})

    if not any(c["field"] == "duration_s" for c in changes):
        if re.search(r"\blonger\b", text):
            changes.append(
                {"field": "duration_s", "kind": "abstract", "direction": "increase"}
            )
        elif re.search(r"\bshorter\b", text):
            changes.append(
                {"field": "duration_s", "kind": "abstract", "direction": "decrease"}
            )
    if primary and not any(c["field"] == primary for c in changes):
        if re.search(r"\b(bigger|larger|stronger|heavier)\b", text):
            changes.append(
                {"field": primary, "kind": "abstract", "direction": "increase"}
            )
        elif re.search(r"\b(smaller|lighter|weaker|subtler)\b", text):
            changes.append(
                {"field": primary, "kind": "abstract", "direction": "decrease"}
            )
    return {"changes": changes}


def _h_stage4_text(payload: dict) -> dict:
    content = (payload["relevant_content"] or "").strip()
    if not content:
        content = payload["command_text"]
    return {"text": content[:100]}


def _h_stage4_query(payload: dict) -> dict:
    text = payload["reference_text"] or payload["command_text"]
    m = re.search(r"\b(?:of|for)\s+(?:a|an|the)?\s*([a-z][a-z' ]*)", text, re.I)
    query = m.group(1).strip() if m else text
    return {"query": query[:100]}


_HEURISTICS = {
    TemplateId.STAGE1_PARSE: _h_stage1,
    TemplateId.STAGE2_TEMPORAL: _h_stage2_temporal,
    TemplateId.STAGE2_TRANSCRIPT: _h_stage2_transcript,
    TemplateId.STAGE2_VIDEO: _h_stage2_video,
    TemplateId.STAGE3_SPATIAL_REFINE: _h_stage3,
    TemplateId.STAGE4_PARAMS: _h_stage4_params,
    TemplateId.STAGE4_TEXT_CONTENT: _h_stage4_text,
    TemplateId.STAGE4_IMAGE_QUERY: _h_stage4_query,
}


# ---------------------------------------------------------------------------
# Recording wrapper.


class RecordingProvider:
    """Pass-through wrapper that journals every exchange into a cache file."""

    def __init__(self, inner: Provider, cache: Union[ReplayCache, str, Path]):
        self.inner = inner
        self.cache = cache if isinstance(cache, ReplayCache) else ReplayCache(cache)

    @property
    def mode(self) -> ProviderMode:
        return self.inner.mode

    def complete(self, req: ChatRequest) -> ChatResponse:
        resp = self.inner.complete(req)
        self.cache.append(
            {
                "key": request_key(req.template.value, req.payload),
                "kind": "chat",
                "template": req.template.value,
                "payload": req.payload,
                "response": {"payload": resp.payload, "raw_text": resp.raw_text},
            }
        )
        return resp

    def _record_embedding(self, template: str, payload: dict, emb: Embedding) -> None:
        self.cache.append(
            {
                "key": request_key(template, payload),
                "kind": template,
                "template": template,
                "payload": payload,
                "response": {"embedding": list(emb.values)},
            }
        )

    def embed_text(self, s: str) -> Embedding:
        emb = self.inner.embed_text(s)
        self._record_embedding("embed_text", {"text": s}, emb)
        return emb

    def embed_region(self, frame_ref: FrameRef, rect: Rect) -> Embedding:
        emb = self.inner.embed_region(frame_ref, rect)
        self._record_embedding("embed_region", _region_payload(frame_ref, rect), emb)
        return emb


def make_provider(
    mode: ProviderMode,
    replay_path: Optional[Union[str, Path]] = None,
    record_path: Optional[Union[str, Path]] = None,
    bundles: Optional[dict[str, MetadataBundle]] = None,
    embed_dim: int = DEFAULT_EMBED_DIM,
    live_config: Optional[LiveConfig] = None,
) -> Provider:
    """Build the provider stack a CLI or service config asks for."""
    base: Provider
    if mode == ProviderMode.REPLAY:
        if replay_path is None:
            raise ValidationError("replay mode needs a cache path")
        base = ReplayProvider(replay_path)
    elif mode == ProviderMode.ORACLE:
        base = OracleProvider(bundles=dict(bundles or {}), embed_dim=embed_dim)
    else:
        base = LiveProvider(live_config or LiveConfig.from_env())
    if record_path is not None:
        return RecordingProvider(base, record_path)
    return base
