"""Deterministic lexical analysis shared by the parser fallback and oracle.

Covers the timecode grammar (M:SS, MM:SS, H:MM:SS, ranges joined by "-",
"to", "until", or "till", comma lists) and the keyword table that maps
command words onto edit operations. Everything here is pure string work;
no provider is ever consulted.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Optional

from sketchedit.core import EditOperation

_TC = r"(?:\d{1,2}:)?\d{1,2}:\d{2}"
_TC_RE = re.compile(rf"(?<![\d:])({_TC})(?![\d:])")
_RANGE_RE = re.compile(
    rf"(?:\bfrom\s+)?(?<![\d:])({_TC})\s*(?:-|–|\bto\b|\buntil\b|\btill\b)\s*({_TC})(?![\d:])",
    re.IGNORECASE,
)

INTRO_WORDS = ("intro", "beginning", "opening", "start")
ENDING_WORDS = ("ending", "outro", "conclusion", "end")


@dataclass(frozen=True)
class TimeToken:
    """A timecode or timecode range located in text."""

    char_start: int
    char_end: int
    surface: str
    start_s: float
    end_s: Optional[float]  # None for a bare timecode

    @property
    def is_range(self) -> bool:
        return self.end_s is not None


def parse_timecode(text: str) -> Optional[float]:
    """Seconds for one M:SS / MM:SS / H:MM:SS string, None if malformed."""
    parts = text.strip().split(":")
    if not all(p.isdigit() for p in parts):
        return None
    if len(parts) == 2:
        m, s = int(parts[0]), int(parts[1])
        if s >= 60:
            return None
        return float(m * 60 + s)
    if len(parts) == 3:
        h, m, s = (int(p) for p in parts)
        if m >= 60 or s >= 60:
            return None
        return float(h * 3600 + m * 60 + s)
    return None


def find_time_tokens(text: str) -> list[TimeToken]:
    """All ranges and bare timecodes, left to right, ranges claimed first."""
    tokens: list[TimeToken] = []
    claimed: list[tuple[int, int]] = []
    for m in _RANGE_RE.finditer(text):
        a = parse_timecode(m.group(1))
        b = parse_timecode(m.group(2))
        if a is None or b is None or b <= a:
            continue
        tokens.append(TimeToken(m.start(), m.end(), m.group(0), a, b))
        claimed.append((m.start(), m.end()))
    for m in _TC_RE.finditer(text):
        if any(s <= m.start() < e for s, e in claimed):
            continue
        t = parse_timecode(m.group(1))
        if t is None:
            continue
        tokens.append(TimeToken(m.start(), m.end(), m.group(0), t, None))
    tokens.sort(key=lambda tok: tok.char_start)
    return tokens


def find_abstract_position(text: str) -> Optional[str]:
    """'intro' or 'ending' when the text names a video extremity, else None."""
    lowered = text.lower()
    for w in INTRO_WORDS:
        if re.search(rf"\b{w}\b", lowered):
            return "intro"
    for w in ENDING_WORDS:
        if re.search(rf"\b{w}\b", lowered):
            return "ending"
    return None


# Keyword -> operation, checked with word boundaries. First occurrence in the
# command decides list order; "highlight" maps to shape (star styling is a
# parameter concern, not an operation).
_OPERATION_KEYWORDS: tuple[tuple[str, EditOperation], ...] = (
    ("cut", EditOperation.CUT),
    ("zoom", EditOperation.ZOOM),
    ("blur", EditOperation.BLUR),
    ("text", EditOperation.TEXT),
    ("caption", EditOperation.TEXT),
    ("subtitle", EditOperation.TEXT),
    ("image", EditOperation.IMAGE),
    ("picture", EditOperation.IMAGE),
    ("photo", EditOperation.IMAGE),
    ("crop", EditOperation.CROP),
    ("circle", EditOperation.SHAPE),
    ("rectangle", EditOperation.SHAPE),
    ("star", EditOperation.SHAPE),
    ("highlight", EditOperation.SHAPE),
)


def classify_operations(text: str) -> list[EditOperation]:
    """Keyword-table operation guesses, ordered by first mention; default text."""
    lowered = text.lower()
    hits: list[tuple[int, EditOperation]] = []
    for word, op in _OPERATION_KEYWORDS:
        m = re.search(rf"\b{word}", lowered)
        if m:
            hits.append((m.start(), op))
    hits.sort(key=lambda h: h[0])
    ordered: list[EditOperation] = []
    for _, op in hits:
        if op not in ordered:
            ordered.append(op)
    return ordered or [EditOperation.TEXT]


_STOPWORDS = frozenset(
    "a an and are as at be but by for from has have in is it its of on or "
    "that the this to was were whenever when where with there they i you he "
    "she we me my your put make add show".split()
)


def content_words(text: str) -> list[str]:
    """Lowercased informative words (>= 3 chars, not stopwords), in order."""
    words = re.findall(r"[a-z']+", text.lower())
    return [w for w in words if len(w) >= 3 and w not in _STOPWORDS]
