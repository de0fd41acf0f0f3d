"""Page-level alignment of a document target with extracted page texts.

The full target is cut into page-sized markup chunks by locating, for each
page, where the tail of its extracted text occurs in the stripped,
normalized target (whitespace removed on both sides).  When no convincing match exists the split falls back
to the page's length.  Splits are then snapped so that chunks never cut a
tag or a heading in half.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from typing import Sequence

from .markup import (
    Block,
    PageDocument,
    SegmentKind,
    TAB,
    HEADING_PREFIX,
    normalize_text,
    normalize_with_map,
    parse_markup,
    serialize_markup,
    strip_markup,
)
from .metrics import levenshtein_distance

TAIL_MATCH = "tail-match"
LENGTH_FALLBACK = "length-fallback"


class AlignError(ValueError):
    pass


class LengthMismatch(AlignError):
    pass


class PageCountMismatch(AlignError):
    """Pages and target ran out at different times; ``partial`` holds the result."""

    def __init__(self, message: str, partial=None):
        super().__init__(message)
        self.partial = partial


@dataclass(frozen=True)
class AlignParams:
    suffix_len: int = 40
    min_window: int = 64
    window_frac: float = 0.2
    accept: float = 0.8

    def window(self, page_len: int) -> int:
        return max(self.min_window, math.ceil(self.window_frac * page_len))


@dataclass
class SegmentationTrace:
    offsets: list[int] = field(default_factory=list)  # split ends, whitespace-free target
    methods: list[str] = field(default_factory=list)
    scores: list[float] = field(default_factory=list)
    markup_offsets: list[int] = field(default_factory=list)
    target_len: int = 0
    mismatch: str | None = None


@dataclass(frozen=True)
class PagePair:
    page_no: int
    image_ref: str
    target_markup: str
    extracted_text: str
    similarity: float
    retained: bool


def similarity(a: str, b: str) -> float:
    """1 - edit distance / length of the longer string; 1.0 for two empty strings."""
    longest = max(len(a), len(b))
    if longest == 0:
        return 1.0
    return 1.0 - levenshtein_distance(a, b) / longest


# -- snapping ----------------------------------------------------------------

@dataclass(frozen=True)
class _Line:
    start: int
    content_start: int
    end: int  # index of the terminating newline, or len(markup)
    heading: bool
    tags: tuple[tuple[int, int], ...]  # (open start, close end) per ref/note


def _layout_lines(blocks: Sequence[Block]) -> list[_Line]:
    lines = []
    pos = 0
    for block in blocks:
        start = pos
        pos += len(HEADING_PREFIX) if block.is_heading else (len(TAB) if block.tab else 0)
        content_start = pos
        tags = []
        for seg in block.segments:
            n = len(seg.serialize())
            if seg.kind is not SegmentKind.PLAIN:
                tags.append((pos, pos + n))
            pos += n
        lines.append(_Line(start, content_start, pos, block.is_heading, tuple(tags)))
        pos += 1
    return lines


def _snap(m: int, lines: list[_Line], total: int) -> int:
    if not lines or m >= total:
        return total
    i = bisect.bisect_right([ln.start for ln in lines], m) - 1
    line = lines[max(i, 0)]
    after = min(line.end + 1, total)
    if m >= line.end:
        return after
    if m <= line.content_start:
        return line.start
    if line.heading:
        return line.start if m - line.start < after - m else after
    for open_start, close_end in line.tags:
        if open_start < m < close_end:
            return open_start if m - open_start < close_end - m else close_end
    return m


# -- segmentation ------------------------------------------------------------

def _best_split(norm: str, cursor: int, page: str, params: AlignParams) -> tuple[int, float]:
    n, length = len(norm), len(page)
    suffix = page[-min(params.suffix_len, length):]
    expected = cursor + length
    w = params.window(length)
    lo, hi = max(cursor + 1, expected - w), min(n, expected + w)

    def score(e: int) -> float:
        return similarity(suffix, norm[max(0, e - len(suffix)):e])

    best_e, best = -1, -1.0
    if lo <= expected <= hi:
        best_e, best = expected, score(expected)
        if best == 1.0:
            return best_e, best
    # visit candidates by distance from the expected end so ties go to the nearest
    for e in sorted(range(lo, hi + 1), key=lambda e: (abs(e - expected), e)):
        if e == expected:
            continue
        s = score(e)
        if s > best:
            best_e, best = e, s
            if s == 1.0:
                break
    return best_e, best


def _dense(text: str) -> str:
    return "".join(normalize_text(text).split())


def segment_target(
    target: PageDocument | Sequence[Block],
    page_texts: Sequence[str],
    params: AlignParams = AlignParams(),
    strict: bool = False,
) -> tuple[list[str], SegmentationTrace]:
    """Cut ``target`` into one markup chunk per page text.

    Concatenating the chunks reproduces ``serialize_markup(target)`` whenever
    pages and target are consumed together.  Otherwise ``trace.mismatch``
    describes the problem (and with ``strict=True`` a
    :class:`PageCountMismatch` carrying the partial result is raised).
    """
    blocks = list(target.blocks if isinstance(target, PageDocument) else target)
    markup = serialize_markup(blocks)
    stripped, omap = strip_markup(blocks, include_notes=True)
    norm, nmap = normalize_with_map(stripped)
    # whitespace is unreliable in extracted text, so matching ignores it
    keep = [i for i, ch in enumerate(norm) if not ch.isspace()]
    dense = "".join(norm[i] for i in keep)
    lines = _layout_lines(blocks)
    n = len(dense)

    def to_markup(e: int) -> int:
        if e >= n:
            return len(markup)
        m = _snap(omap[nmap[keep[e]]], lines, len(markup))
        if markup[m - 1:m] not in ("", "\n") and markup.startswith(HEADING_PREFIX, m):
            m += 1  # a chunk opening with "# " would read back as a heading
        return m

    trace = SegmentationTrace(target_len=n)
    chunks: list[str] = []
    cursor, mcursor = 0, 0
    pages = [_dense(p) for p in page_texts]
    for i, page in enumerate(pages):
        last = i == len(pages) - 1
        if cursor >= n:
            if page and trace.mismatch is None:
                trace.mismatch = f"target exhausted before page {i + 1} of {len(pages)}"
            trace.offsets.append(n)
            trace.methods.append(LENGTH_FALLBACK)
            trace.scores.append(0.0)
            trace.markup_offsets.append(len(markup))
            chunks.append("")
            continue
        if not page:
            e, s, method = cursor, 0.0, LENGTH_FALLBACK
        else:
            e, s = _best_split(dense, cursor, page, params)
            method = TAIL_MATCH
            if e < 0 or s < params.accept:
                e, method = min(cursor + len(page), n), LENGTH_FALLBACK
        if last and e < n:
            if n - e <= params.window(len(page)):
                e = n
            else:
                trace.mismatch = f"{n - e} target characters left after the last page"
        mend = max(to_markup(e), mcursor)
        chunks.append(markup[mcursor:mend])
        trace.offsets.append(e)
        trace.methods.append(method)
        trace.scores.append(s)
        trace.markup_offsets.append(mend)
        cursor, mcursor = e, mend

    if strict and trace.mismatch:
        raise PageCountMismatch(trace.mismatch, partial=(chunks, trace))
    return chunks, trace


# -- retention ---------------------------------------------------------------

def chunk_text(chunk: str) -> str:
    """Normalized plain text of a markup chunk."""
    return normalize_text(strip_markup(parse_markup(chunk, lenient=True), include_notes=True)[0])


def build_pairs(
    chunks: Sequence[str],
    page_texts: Sequence[str],
    images: Sequence[str],
    threshold: float = 0.99,
) -> list[PagePair]:
    """Pair chunks with page texts and images, keeping pairs at or above ``threshold``."""
    if not (len(chunks) == len(page_texts) == len(images)):
        raise LengthMismatch(
            f"{len(chunks)} chunks, {len(page_texts)} page texts, {len(images)} images"
        )
    pairs = []
    for i, (chunk, text, image) in enumerate(zip(chunks, page_texts, images), start=1):
        sim = similarity(chunk_text(chunk), normalize_text(text))
        pairs.append(PagePair(i, str(image), chunk, text, sim, sim >= threshold))
    return pairs


def retention_summary(pairs: Sequence[PagePair]) -> dict:
    kept = sum(p.retained for p in pairs)
    return {
        "pages": len(pairs),
        "retained": kept,
        "dropped": len(pairs) - kept,
        "retention_rate": kept / len(pairs) if pairs else 0.0,
    }


def drop_report(pairs: Sequence[PagePair]) -> list[dict]:
    return [
        {"page_no": p.page_no, "image": p.image_ref, "similarity": round(p.similarity, 6)}
        for p in pairs
        if not p.retained
    ]
