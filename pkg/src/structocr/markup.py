"""Lightweight structural markup for page transcriptions.

One block per line.  A line starting with ``# `` is a heading; a paragraph
may open with ``<tab/>`` when it is indented on the page.  Inline
``<ref>...</ref>`` and ``<note>...</note>`` spans carry reference markers
and marginal notes.  Example::

    # <ref>Α</ref> ΚΕΦΑΛΑΙΟΝ
    <tab/>Τὸ μὲν γὰρ <ref>4</ref> ἦν.

Reference transcriptions are parsed strictly; model output is parsed with
``lenient=True`` so that malformed tags degrade to plain text.
"""

from __future__ import annotations

import enum
import re
import unicodedata
from dataclasses import dataclass
from typing import Iterable, Sequence

__all__ = [
    "SegmentKind",
    "BlockKind",
    "InlineSegment",
    "Block",
    "PageDocument",
    "OffsetMap",
    "MarkupError",
    "UnclosedTag",
    "UnbalancedTag",
    "NestedTag",
    "EmptyTag",
    "TabNotAtLineStart",
    "parse_markup",
    "serialize_markup",
    "serialize_block",
    "strip_markup",
    "normalize_text",
    "normalize_with_map",
    "TAG_LITERALS",
]

HEADING_PREFIX = "# "
TAB = "<tab/>"
TAG_LITERALS = ("<ref>", "</ref>", "<note>", "</note>", TAB)

_TAG_RE = re.compile(r"<(/?)(ref|note)>|<tab/>")


class MarkupError(ValueError):
    """Raised by strict parsing on malformed markup."""

    def __init__(self, message: str, line_no: int | None = None):
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)
        self.line_no = line_no


class UnclosedTag(MarkupError):
    pass


class UnbalancedTag(MarkupError):
    """A closing tag with no matching opening tag."""


class NestedTag(MarkupError):
    pass


class EmptyTag(MarkupError):
    pass


class TabNotAtLineStart(MarkupError):
    pass


class SegmentKind(str, enum.Enum):
    PLAIN = "plain"
    REF = "ref"
    NOTE = "note"


class BlockKind(str, enum.Enum):
    HEADING = "heading"
    PARAGRAPH = "paragraph"


@dataclass(frozen=True)
class InlineSegment:
    kind: SegmentKind
    content: str

    def __post_init__(self) -> None:
        if "\n" in self.content or "\r" in self.content:
            raise ValueError("segment content must not contain line breaks")
        for lit in TAG_LITERALS:
            if lit in self.content:
                raise ValueError(f"segment content must not contain {lit!r}")
        if self.kind is not SegmentKind.PLAIN and not self.content:
            raise ValueError(f"{self.kind.value} segment must not be empty")

    @classmethod
    def plain(cls, text: str) -> "InlineSegment":
        return cls(SegmentKind.PLAIN, text)

    @classmethod
    def ref(cls, text: str) -> "InlineSegment":
        return cls(SegmentKind.REF, text)

    @classmethod
    def note(cls, text: str) -> "InlineSegment":
        return cls(SegmentKind.NOTE, text)

    def serialize(self) -> str:
        if self.kind is SegmentKind.PLAIN:
            return self.content
        tag = self.kind.value
        return f"<{tag}>{self.content}</{tag}>"


def _canonical_segments(segments: Iterable[InlineSegment]) -> tuple[InlineSegment, ...]:
    # adjacent plain runs merge and empty plain runs vanish, exactly as a
    # serialize/parse cycle would do
    out: list[InlineSegment] = []
    for seg in segments:
        if seg.kind is SegmentKind.PLAIN:
            if not seg.content:
                continue
            if out and out[-1].kind is SegmentKind.PLAIN:
                out[-1] = InlineSegment.plain(out[-1].content + seg.content)
                continue
        out.append(seg)
    return tuple(out)


@dataclass(frozen=True)
class Block:
    """A heading or paragraph; always serializes to exactly one line."""

    kind: BlockKind
    segments: tuple[InlineSegment, ...] = ()
    tab: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "segments", _canonical_segments(self.segments))
        if self.kind is BlockKind.HEADING and self.tab:
            raise ValueError("a heading cannot carry a tab flag")
        if self.kind is BlockKind.PARAGRAPH and not self.tab:
            body = self.body()
            if not body.strip():
                raise ValueError("an unindented paragraph must have visible content")
            if body.startswith(HEADING_PREFIX):
                raise ValueError("paragraph text would be read back as a heading")

    @classmethod
    def heading(cls, segments: Sequence[InlineSegment]) -> "Block":
        return cls(BlockKind.HEADING, tuple(segments))

    @classmethod
    def paragraph(cls, segments: Sequence[InlineSegment], tab: bool = False) -> "Block":
        return cls(BlockKind.PARAGRAPH, tuple(segments), tab)

    @property
    def is_heading(self) -> bool:
        return self.kind is BlockKind.HEADING

    @property
    def is_paragraph(self) -> bool:
        return self.kind is BlockKind.PARAGRAPH

    def body(self) -> str:
        return "".join(seg.serialize() for seg in self.segments)

    def items(self, kind: SegmentKind) -> list[str]:
        return [seg.content for seg in self.segments if seg.kind is kind]


@dataclass(frozen=True)
class PageDocument:
    blocks: tuple[Block, ...] = ()
    work_id: str | None = None
    page_no: int | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "blocks", tuple(self.blocks))
        if self.page_no is not None and self.page_no < 1:
            raise ValueError("page_no must be >= 1")

    def items(self, kind: SegmentKind) -> list[str]:
        out: list[str] = []
        for block in self.blocks:
            out.extend(block.items(kind))
        return out

    @property
    def headings(self) -> list[Block]:
        return [b for b in self.blocks if b.is_heading]


@dataclass(frozen=True)
class OffsetMap:
    """Stripped-text index -> markup-text index.

    ``entries`` has one element per stripped character plus a final entry
    equal to the length of the markup text, so ``map[len(plain)]`` is valid.
    """

    entries: tuple[int, ...]

    def __len__(self) -> int:
        return len(self.entries)

    def __getitem__(self, index: int) -> int:
        return self.entries[index]


# -- parsing -----------------------------------------------------------------

def _scrub(text: str) -> str:
    # dropping a stray token can splice a new tag literal together
    # ("<re<tab/>f>"), which strict input can never contain
    while _TAG_RE.search(text):
        text = _TAG_RE.sub("", text)
    return text


def _parse_inline(body: str, strict: bool, line_no: int) -> list[InlineSegment]:
    segments: list[InlineSegment] = []
    plain: list[str] = []
    open_kind: str | None = None
    inner: list[str] = []
    pos = 0

    def emit_text(text: str) -> None:
        (inner if open_kind else plain).append(text)

    def flush_plain() -> None:
        if plain:
            segments.append(InlineSegment.plain(_scrub("".join(plain))))
            plain.clear()

    for m in _TAG_RE.finditer(body):
        emit_text(body[pos:m.start()])
        pos = m.end()
        token = m.group(0)
        if token == TAB:
            if strict:
                raise TabNotAtLineStart("<tab/> is only allowed at the start of a paragraph", line_no)
            continue
        closing, kind = m.group(1) == "/", m.group(2)
        if not closing:
            if open_kind is not None:
                if strict:
                    raise NestedTag(f"<{kind}> opened inside <{open_kind}>", line_no)
                continue
            flush_plain()
            open_kind = kind
            continue
        if open_kind is None:
            if strict:
                raise UnbalancedTag(f"</{kind}> without matching <{kind}>", line_no)
            continue
        if kind != open_kind:
            if strict:
                raise UnclosedTag(f"<{open_kind}> closed by </{kind}>", line_no)
            continue
        content = _scrub("".join(inner))
        inner.clear()
        open_kind = None
        if not content:
            if strict:
                raise EmptyTag(f"empty <{kind}> element", line_no)
            continue
        segments.append(InlineSegment(SegmentKind(kind), content))

    emit_text(body[pos:])
    if open_kind is not None:
        if strict:
            raise UnclosedTag(f"<{open_kind}> is never closed", line_no)
        # degrade the unterminated span to plain text
        plain.extend(inner)
    flush_plain()
    return segments


def _parse_line(line: str, strict: bool, line_no: int) -> Block | None:
    if line.startswith(HEADING_PREFIX):
        return Block.heading(_parse_inline(line[len(HEADING_PREFIX):], strict, line_no))
    tab = line.startswith(TAB)
    body = line[len(TAB):] if tab else line
    segments = _parse_inline(body, strict, line_no)
    if not tab:
        text = "".join(s.serialize() for s in segments)
        if not text.strip():
            # only reachable leniently, e.g. a line holding nothing but "<ref></ref>"
            return None
        if text.startswith(HEADING_PREFIX):
            # also lenient-only: "<ref></ref># x" once the empty span is dropped
            first = InlineSegment.plain(segments[0].content[len(HEADING_PREFIX):])
            return Block.heading([first, *segments[1:]])
    return Block.paragraph(segments, tab=tab)


def parse_markup(
    text: str,
    lenient: bool = False,
    work_id: str | None = None,
    page_no: int | None = None,
) -> PageDocument:
    """Parse markup text into a :class:`PageDocument`.

    Blank lines separate blocks and produce nothing.  With ``lenient=True``
    no :class:`MarkupError` is ever raised: stray or mismatched tags are
    dropped and an unterminated span becomes plain text.
    """
    blocks = []
    lines = text.replace("\r\n", "\n").replace("\r", "\n").split("\n")
    for i, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        block = _parse_line(line, not lenient, i)
        if block is not None:
            blocks.append(block)
    return PageDocument(tuple(blocks), work_id=work_id, page_no=page_no)


# -- serialization -----------------------------------------------------------

def serialize_block(block: Block) -> str:
    if block.is_heading:
        return HEADING_PREFIX + block.body()
    return (TAB if block.tab else "") + block.body()


def serialize_markup(doc: PageDocument | Sequence[Block]) -> str:
    blocks = doc.blocks if isinstance(doc, PageDocument) else doc
    return "\n".join(serialize_block(b) for b in blocks)


# -- stripping and normalization ---------------------------------------------

def strip_markup(
    doc: PageDocument | Sequence[Block], include_notes: bool = True
) -> tuple[str, OffsetMap]:
    """Remove all markup, keeping ref text (and note text if ``include_notes``).

    Blocks are joined by a single newline.  The returned map gives, for each
    retained character, its index in ``serialize_markup(doc)``.
    """
    blocks = doc.blocks if isinstance(doc, PageDocument) else doc
    chars: list[str] = []
    index: list[int] = []
    pos = 0
    for bi, block in enumerate(blocks):
        if bi:
            chars.append("\n")
            index.append(pos)
            pos += 1
        if block.is_heading:
            pos += len(HEADING_PREFIX)
        elif block.tab:
            pos += len(TAB)
        for seg in block.segments:
            if seg.kind is SegmentKind.PLAIN:
                chars.extend(seg.content)
                index.extend(range(pos, pos + len(seg.content)))
                pos += len(seg.content)
                continue
            open_len = len(seg.kind.value) + 2
            pos += open_len
            if seg.kind is SegmentKind.REF or include_notes:
                chars.extend(seg.content)
                index.extend(range(pos, pos + len(seg.content)))
            pos += len(seg.content) + open_len + 1
    index.append(pos)
    return "".join(chars), OffsetMap(tuple(index))


def normalize_text(s: str) -> str:
    """NFKC-normalize and collapse every whitespace run to a single space."""
    return " ".join(unicodedata.normalize("NFKC", s).split())


def _clusters(s: str) -> Iterable[tuple[int, str]]:
    start = 0
    for i in range(1, len(s) + 1):
        if i == len(s) or not unicodedata.combining(s[i]):
            yield start, s[start:i]
            start = i


def normalize_with_map(s: str) -> tuple[str, list[int]]:
    """Like :func:`normalize_text` but also map each output char to a source index.

    Normalization is applied per base-plus-combining-marks cluster, which
    coincides with whole-string NFKC for Greek and Latin text.  The map has
    a final entry ``len(s)``.
    """
    out: list[str] = []
    src: list[int] = []
    pending: int | None = None
    for start, cluster in _clusters(s):
        for ch in unicodedata.normalize("NFKC", cluster):
            if ch.isspace():
                if out and pending is None:
                    pending = start
                continue
            if pending is not None:
                out.append(" ")
                src.append(pending)
                pending = None
            out.append(ch)
            src.append(start)
    src.append(len(s))
    return "".join(out), src
