"""Chat prompt templates: message builders and strict output parsing.

Eight templates cover the four pipeline stages. Each template declares the
payload keys it interpolates and the JSON shape it expects back; responses
that fail validation raise OutputParseError so the caller can re-prompt.
"""

from __future__ import annotations

import json
import re
from enum import Enum
from typing import Any, Optional

from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    ValidationError as PydanticError,
    field_validator,
    model_validator,
)

from sketchedit.core import EditOperation

_OP_VALUES = frozenset(op.value for op in EditOperation)


class TemplateId(str, Enum):
    STAGE1_PARSE = "stage1_parse"
    STAGE2_TEMPORAL = "stage2_temporal"
    STAGE2_TRANSCRIPT = "stage2_transcript"
    STAGE2_VIDEO = "stage2_video"
    STAGE3_SPATIAL_REFINE = "stage3_spatial_refine"
    STAGE4_PARAMS = "stage4_params"
    STAGE4_TEXT_CONTENT = "stage4_text_content"
    STAGE4_IMAGE_QUERY = "stage4_image_query"


class OutputParseError(ValueError):
    """Model output did not match the template's response schema."""


_OPS = ", ".join(op.value for op in EditOperation)

_SYSTEM = (
    "You are the command interpreter inside a video editing tool. You always "
    "answer with a single JSON object and nothing else: no prose, no code "
    "fences, no trailing commentary."
)


# ---------------------------------------------------------------------------
# Output schemas (one per template).


class _Ref(BaseModel):
    model_config = ConfigDict(extra="forbid")
    text: str = Field(min_length=1)
    category: str


class _TemporalRef(_Ref):
    category: str = Field(pattern="^(position|transcript|video|other)$")


class _SpatialRef(_Ref):
    category: str = Field(pattern="^(visual_dependent|independent|other)$")


class _ParamRef(BaseModel):
    model_config = ConfigDict(extra="forbid")
    operation: str
    text: str = Field(min_length=1)

    @field_validator("operation")
    @classmethod
    def _known_op(cls, v: str) -> str:
        if v not in _OP_VALUES:
            raise ValueError(f"unknown operation {v!r}")
        return v


class Stage1Out(BaseModel):
    model_config = ConfigDict(extra="forbid")
    operations: list[str] = Field(min_length=1)
    resolved_text: Optional[str] = None
    temporal_references: list[_TemporalRef] = Field(default_factory=list)
    spatial_references: list[_SpatialRef] = Field(default_factory=list)
    parameter_references: list[_ParamRef] = Field(default_factory=list)

    @field_validator("operations")
    @classmethod
    def _known_ops(cls, v: list[str]) -> list[str]:
        bad = [op for op in v if op not in _OP_VALUES]
        if bad:
            raise ValueError(f"unknown operations {bad}")
        return v


class _IntervalOut(BaseModel):
    model_config = ConfigDict(extra="forbid")
    start_s: float
    end_s: float


class Stage2TemporalOut(BaseModel):
    model_config = ConfigDict(extra="forbid")
    intervals: list[_IntervalOut] = Field(default_factory=list)
    explanation: str = ""


class _IndexMatch(BaseModel):
    model_config = ConfigDict(extra="forbid")
    index: int = Field(ge=0)
    explanation: str = Field(min_length=1)


class Stage2MatchOut(BaseModel):
    model_config = ConfigDict(extra="forbid")
    matches: list[_IndexMatch] = Field(default_factory=list)


class _PixelRectOut(BaseModel):
    model_config = ConfigDict(extra="forbid")
    x: float
    y: float
    width: float
    height: float


class Stage3Out(BaseModel):
    model_config = ConfigDict(extra="forbid")
    rect_px: _PixelRectOut
    explanation: str = ""


class ChangeOut(BaseModel):
    model_config = ConfigDict(extra="forbid")
    field: str = Field(min_length=1)
    kind: str = Field(pattern="^(explicit|relative|abstract)$")
    value: Optional[Any] = None  # explicit
    delta: Optional[float] = None  # relative, additive
    factor: Optional[float] = None  # relative, multiplicative
    direction: Optional[str] = Field(default=None, pattern="^(increase|decrease)$")

    @model_validator(mode="after")
    def _kind_payload(self) -> "ChangeOut":
        if self.kind == "explicit" and self.value is None:
            raise ValueError("explicit change needs a value")
        if self.kind == "relative" and (self.delta is None) == (self.factor is None):
            raise ValueError("relative change needs exactly one of delta/factor")
        if self.kind == "abstract" and self.direction is None:
            raise ValueError("abstract change needs a direction")
        return self


class Stage4ParamsOut(BaseModel):
    model_config = ConfigDict(extra="forbid")
    changes: list[ChangeOut] = Field(default_factory=list)


class Stage4TextOut(BaseModel):
    model_config = ConfigDict(extra="forbid")
    text: str


class Stage4QueryOut(BaseModel):
    model_config = ConfigDict(extra="forbid")
    query: str


_OUTPUT_MODELS: dict[TemplateId, type[BaseModel]] = {
    TemplateId.STAGE1_PARSE: Stage1Out,
    TemplateId.STAGE2_TEMPORAL: Stage2TemporalOut,
    TemplateId.STAGE2_TRANSCRIPT: Stage2MatchOut,
    TemplateId.STAGE2_VIDEO: Stage2MatchOut,
    TemplateId.STAGE3_SPATIAL_REFINE: Stage3Out,
    TemplateId.STAGE4_PARAMS: Stage4ParamsOut,
    TemplateId.STAGE4_TEXT_CONTENT: Stage4TextOut,
    TemplateId.STAGE4_IMAGE_QUERY: Stage4QueryOut,
}

_PAYLOAD_KEYS: dict[TemplateId, tuple[str, ...]] = {
    TemplateId.STAGE1_PARSE: ("command_text", "sketch_attached"),
    TemplateId.STAGE2_TEMPORAL: ("reference_text", "duration_s"),
    TemplateId.STAGE2_TRANSCRIPT: ("reference_text", "snippets"),
    TemplateId.STAGE2_VIDEO: ("reference_text", "clips"),
    TemplateId.STAGE3_SPATIAL_REFINE: (
        "reference_text",
        "command_text",
        "frame_width_px",
        "frame_height_px",
        "initial_rect_px",
    ),
    TemplateId.STAGE4_PARAMS: (
        "operation",
        "reference_text",
        "command_text",
        "current_params",
        "current_duration_s",
    ),
    TemplateId.STAGE4_TEXT_CONTENT: (
        "reference_text",
        "command_text",
        "relevant_content",
    ),
    TemplateId.STAGE4_IMAGE_QUERY: (
        "reference_text",
        "command_text",
        "relevant_content",
    ),
}


def validate_payload(template: TemplateId, payload: dict) -> None:
    missing = [k for k in _PAYLOAD_KEYS[template] if k not in payload]
    if missing:
        raise OutputParseError(
            f"payload for {template.value} missing keys: {missing}"
        )


def _block(obj: Any) -> str:
    return json.dumps(obj, indent=2, ensure_ascii=False)


def _stage1(payload: dict) -> str:
    sketch_note = (
        "The user also drew a rectangle on a paused frame."
        if payload["sketch_attached"]
        else "No rectangle was drawn."
    )
    return f"""A video editor typed this request:

{_block(payload["command_text"])}

{sketch_note}

Break the request apart:
1. Decide which edit operations it calls for, from exactly this list: {_OPS}. \
A request to call attention to something ("highlight ...") is the shape \
operation. If nothing fits cleanly, pick the closest operation anyway.
2. If the request points at an earlier noun with a pronoun, rewrite it with \
the noun spelled out and report that as resolved_text (otherwise omit it).
3. Quote the fragments that say WHEN the edit applies. Tag each fragment: \
"position" when it names a timestamp like 54:43 or 0:23, a range like \
0:00-12:30 or "from 43:30 to 44:20", or a spot like the intro; "transcript" \
when it depends on what is spoken; "video" when it depends on what is shown; \
"other" when none of those fit.
4. Quote the fragments that say WHERE in the frame the edit applies. Tag \
each: "visual_dependent" when it names something visible in the footage, \
"independent" when it names a frame region like the bottom left corner, \
"other" otherwise.
5. Quote the fragments that describe HOW the edit should look or behave, \
and attach each to one of the chosen operations.

Reply with one JSON object:
{{"operations": ["..."], "resolved_text": "...", "temporal_references": \
[{{"text": "...", "category": "..."}}], "spatial_references": [{{"text": \
"...", "category": "..."}}], "parameter_references": [{{"operation": "...", \
"text": "..."}}]}}

Quote fragments exactly as they appear. Use empty arrays when a category \
has no fragments."""


def _stage2_temporal(payload: dict) -> str:
    return f"""A video is {payload["duration_s"]} seconds long. An edit request \
contains this fragment about when the edit applies:

{_block(payload["reference_text"])}

Convert the fragment into concrete intervals, in seconds from the start:
- A bare timestamp becomes a 10 second interval containing it.
- An explicit range becomes exactly that range.
- Words like "intro" or "ending" become a reasonable interval at that end \
of the video.
Keep every interval inside [0, {payload["duration_s"]}).

Reply with one JSON object:
{{"intervals": [{{"start_s": 0, "end_s": 10}}], "explanation": "..."}}

If the fragment cannot be converted, reply {{"intervals": [], \
"explanation": "..."}}."""


def _stage2_transcript(payload: dict) -> str:
    return f"""An edit request contains this fragment about when the edit \
applies, which refers to what is said in the video:

{_block(payload["reference_text"])}

These are candidate transcript snippets (index, start and end seconds, text):

{_block(payload["snippets"])}

Select every snippet where the spoken words satisfy the fragment. For each \
selection give a short explanation of why it qualifies.

Reply with one JSON object:
{{"matches": [{{"index": 0, "explanation": "..."}}]}}

If no snippet qualifies, reply {{"matches": []}}."""


def _stage2_video(payload: dict) -> str:
    return f"""An edit request contains this fragment about when the edit \
applies, which refers to what is visible in the video:

{_block(payload["reference_text"])}

These are candidate clip descriptions (index, start and end seconds, a main \
action, and scene captions):

{_block(payload["clips"])}

Select every clip whose visuals satisfy the fragment. For each selection \
give a short explanation of why it qualifies.

Reply with one JSON object:
{{"matches": [{{"index": 0, "explanation": "..."}}]}}

If no clip qualifies, reply {{"matches": []}}."""


def _stage3(payload: dict) -> str:
    return f"""A video frame is {payload["frame_width_px"]} pixels wide and \
{payload["frame_height_px"]} pixels tall. Pixel coordinates start at the \
top-left corner of the frame.

An edit is currently placed at this rectangle (top-left x, y plus width and \
height, in pixels):

{_block(payload["initial_rect_px"])}

The edit request was:

{_block(payload["command_text"])}

and this fragment says where the edit belongs:

{_block(payload["reference_text"])}

Move the rectangle so it sits where the fragment asks, resizing it only if \
the fragment requires a different size. The whole rectangle must stay \
inside the frame.

Reply with one JSON object:
{{"rect_px": {{"x": 0, "y": 0, "width": 100, "height": 100}}, \
"explanation": "..."}}"""


def _stage4_params(payload: dict) -> str:
    return f"""An editor is adjusting a "{payload["operation"]}" edit. Its \
current parameters are:

{_block(payload["current_params"])}

and it currently lasts {payload["current_duration_s"]} seconds (field name \
"duration_s").

The edit request was:

{_block(payload["command_text"])}

and this fragment describes the desired parameters:

{_block(payload["reference_text"])}

List each requested change. Classify every change as one of:
- "explicit": an exact value is stated (e.g. 12px, the color red). Report \
{{"field": ..., "kind": "explicit", "value": ...}}.
- "relative": a stated offset or proportion of the current value (e.g. 5 \
seconds longer, 10% less). Report {{"field": ..., "kind": "relative", \
"delta": ...}} for offsets or {{"field": ..., "kind": "relative", \
"factor": ...}} for proportions (10% less is factor 0.9).
- "abstract": a direction without a quantity (e.g. shorter, bigger). Report \
{{"field": ..., "kind": "abstract", "direction": "increase"}} or \
"decrease".

Use only field names that appear in the current parameters, or \
"duration_s" for how long the edit lasts.

Reply with one JSON object:
{{"changes": [...]}}

If the fragment requests nothing concrete, reply {{"changes": []}}."""


def _stage4_text(payload: dict) -> str:
    return f"""A text overlay is being added to a video. The edit request was:

{_block(payload["command_text"])}

this fragment describes the text:

{_block(payload["reference_text"])}

and this is the video content the overlay relates to (may be empty):

{_block(payload["relevant_content"])}

Write the string the overlay should display. Keep it under 100 characters. \
If there is nothing to derive it from, fall back to the request text itself.

Reply with one JSON object:
{{"text": "..."}}"""


def _stage4_query(payload: dict) -> str:
    return f"""An image is being inserted into a video. The edit request was:

{_block(payload["command_text"])}

this fragment describes the image:

{_block(payload["reference_text"])}

and this is the video content the image relates to (may be empty):

{_block(payload["relevant_content"])}

Write a short image search query that would find a fitting picture. Keep it \
under 100 characters. If you cannot do better, fall back to the request \
text itself.

Reply with one JSON object:
{{"query": "..."}}"""


_BUILDERS = {
    TemplateId.STAGE1_PARSE: _stage1,
    TemplateId.STAGE2_TEMPORAL: _stage2_temporal,
    TemplateId.STAGE2_TRANSCRIPT: _stage2_transcript,
    TemplateId.STAGE2_VIDEO: _stage2_video,
    TemplateId.STAGE3_SPATIAL_REFINE: _stage3,
    TemplateId.STAGE4_PARAMS: _stage4_params,
    TemplateId.STAGE4_TEXT_CONTENT: _stage4_text,
    TemplateId.STAGE4_IMAGE_QUERY: _stage4_query,
}


def build_messages(template: TemplateId, payload: dict) -> list[dict[str, str]]:
    """Chat messages for a template; raises if payload keys are missing."""
    validate_payload(template, payload)
    return [
        {"role": "system", "content": _SYSTEM},
        {"role": "user", "content": _BUILDERS[template](payload)},
    ]


_FENCE_RE = re.compile(r"^```(?:json)?\s*(.*?)\s*```$", re.DOTALL)


def parse_response(template: TemplateId, raw_text: str) -> dict:
    """Validate raw model output against the template's response schema.

    Tolerates a Markdown code fence around the JSON but nothing else.
    Raises OutputParseError with a message suitable for a repair re-prompt.
    """
    text = raw_text.strip()
    fenced = _FENCE_RE.match(text)
    if fenced:
        text = fenced.group(1)
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise OutputParseError(f"response is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise OutputParseError("response must be a JSON object")
    model = _OUTPUT_MODELS[template]
    try:
        return model.model_validate(doc).model_dump(exclude_none=True)
    except PydanticError as exc:
        first = exc.errors()[0]
        loc = ".".join(str(p) for p in first["loc"])
        raise OutputParseError(f"response field {loc}: {first['msg']}") from exc
