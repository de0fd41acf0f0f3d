"""TEI/XML ingestion: citation hierarchy and conversion to page markup."""

from __future__ import annotations

import json
import re
import xml.etree.ElementTree as ET
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterator, Union

from .markup import Block, InlineSegment, SegmentKind, TAG_LITERALS

TEI_NS = "http://www.tei-c.org/ns/1.0"

WRAPPER_DIV_TYPES = frozenset({"edition", "translation", "commentary"})
NON_CITATION_MILESTONES = frozenset({"page", "line"})
# children of <choice> and <app> that are not part of the reading text
DROPPED_ALTERNATIVES = frozenset({"sic", "orig", "abbr", "rdg"})
SKIPPED_INLINE = frozenset({"gap", "figure", "fw"})

TeiSource = Union[str, bytes, Path, ET.Element, ET.ElementTree]


class TeiError(ValueError):
    pass


class MalformedXml(TeiError):
    pass


class NoBody(TeiError):
    pass


@dataclass(frozen=True)
class CiteLevel:
    name: str
    milestone: bool
    depth: int


@dataclass(frozen=True)
class CiteStructure:
    levels: tuple[CiteLevel, ...] = ()

    def __post_init__(self) -> None:
        levels = tuple(self.levels)
        object.__setattr__(self, "levels", levels)
        if [lv.depth for lv in levels] != list(range(1, len(levels) + 1)):
            raise ValueError("citation depths must be contiguous from 1")
        if any(lv.milestone for lv in levels[:-1]):
            raise ValueError("only the deepest citation level may be a milestone")

    @property
    def milestone_level(self) -> CiteLevel | None:
        if self.levels and self.levels[-1].milestone:
            return self.levels[-1]
        return None

    def to_dict(self) -> dict:
        return {"levels": [asdict(lv) for lv in self.levels]}

    @classmethod
    def from_dict(cls, data: dict) -> "CiteStructure":
        return cls(tuple(CiteLevel(**lv) for lv in data.get("levels", [])))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False, indent=2)


def _local(tag) -> str | None:
    if not isinstance(tag, str):
        return None  # comments and processing instructions
    return tag.rsplit("}", 1)[-1]


def load_tei(source: TeiSource) -> ET.Element:
    """Return the root element of a TEI document given text, bytes, a path or a tree."""
    if isinstance(source, ET.Element):
        return source
    if isinstance(source, ET.ElementTree):
        return source.getroot()
    try:
        if isinstance(source, bytes) or (isinstance(source, str) and source.lstrip().startswith("<")):
            return ET.fromstring(source)
        return ET.parse(source).getroot()
    except ET.ParseError as exc:
        raise MalformedXml(str(exc)) from exc


def _find_body(root: ET.Element) -> ET.Element:
    for el in root.iter():
        if _local(el.tag) == "body":
            return el
    raise NoBody("document has no <body> element")


def _is_div(el: ET.Element) -> bool:
    return re.fullmatch(r"div[1-7]?", _local(el.tag) or "") is not None


def _is_citation_div(el: ET.Element) -> bool:
    return _is_div(el) and el.get("type") not in WRAPPER_DIV_TYPES


def _children(el: ET.Element, name: str) -> Iterator[ET.Element]:
    return (c for c in el if _local(c.tag) == name)


# -- cite structure ----------------------------------------------------------

def _declared_levels(root: ET.Element) -> list[tuple[str, str]] | None:
    """(unit name, match expression) pairs from a header declaration, outermost first."""
    for decl in root.iter():
        if _local(decl.tag) != "refsDecl":
            continue
        top = next(_children(decl, "citeStructure"), None)
        if top is not None:
            levels = []
            node = top
            while node is not None:
                levels.append((node.get("unit", ""), node.get("match", "")))
                node = next(_children(node, "citeStructure"), None)
            return levels
        patterns = list(_children(decl, "cRefPattern"))
        if patterns:
            # listed deepest first; the number of capture groups gives the depth
            ranked = sorted(
                patterns, key=lambda p: (p.get("replacementPattern") or "").count("$")
            )
            return [(p.get("n", ""), p.get("replacementPattern", "")) for p in ranked]
        states = list(_children(decl, "refState"))
        if states:
            return [(s.get("unit", ""), "") for s in states]
    return None


def _paragraph_milestone_units(body: ET.Element) -> list[str]:
    units: list[str] = []
    for p in body.iter():
        if _local(p.tag) not in ("p", "ab"):
            continue
        for el in p.iter():
            if _local(el.tag) != "milestone" or not el.get("n"):
                continue
            unit = el.get("unit", "")
            if unit and unit not in NON_CITATION_MILESTONES and unit not in units:
                units.append(unit)
    return units


def _div_level_names(body: ET.Element) -> list[str]:
    names: dict[int, str] = {}

    def walk(el: ET.Element, depth: int) -> None:
        for child in el:
            if not _is_div(child):
                continue
            if _is_citation_div(child):
                label = child.get("subtype") or child.get("type")
                if label == "textpart":
                    label = None
                names.setdefault(depth + 1, label or f"level{depth + 1}")
                walk(child, depth + 1)
            else:
                walk(child, depth)

    walk(body, 0)
    return [names[d] for d in sorted(names)]


def extract_cite_structure(tei: TeiSource) -> CiteStructure:
    """Derive the citation hierarchy of a TEI document.

    An explicit declaration in the header wins.  Otherwise levels come from
    nested divisions, followed by a milestone level when milestone elements
    occur inside paragraphs.
    """
    root = load_tei(tei)
    body = _find_body(root)
    para_units = _paragraph_milestone_units(body)

    declared = _declared_levels(root)
    if declared:
        names = [name or f"level{i}" for i, (name, _) in enumerate(declared, start=1)]
        last_name, last_match = names[-1], declared[-1][1]
        deepest_ms = "milestone" in last_match or last_name in para_units
        return CiteStructure(tuple(
            CiteLevel(name, deepest_ms and i == len(names), i)
            for i, name in enumerate(names, start=1)
        ))

    names = _div_level_names(body)
    levels = [CiteLevel(n, False, i) for i, n in enumerate(names, start=1)]
    if para_units:
        levels.append(CiteLevel(para_units[0], True, len(levels) + 1))
    return CiteStructure(tuple(levels))


# -- conversion --------------------------------------------------------------

_WS = re.compile(r"\s+")
_TAG_LITERAL_RE = re.compile("|".join(re.escape(t) for t in TAG_LITERALS))


def _clean(text: str) -> str:
    return _TAG_LITERAL_RE.sub("", _WS.sub(" ", text))


def _text_content(el: ET.Element) -> str:
    parts: list[str] = []

    def walk(node: ET.Element) -> None:
        if node.text:
            parts.append(node.text)
        for child in node:
            name = _local(child.tag)
            if name is not None and name != "note" and name not in DROPPED_ALTERNATIVES:
                walk(child)
            if child.tail:
                parts.append(child.tail)

    walk(el)
    return _clean("".join(parts)).strip()


class _Converter:
    def __init__(self, cs: CiteStructure | None):
        ms = cs.milestone_level if cs is not None else None
        self.milestone_unit = ms.name if ms is not None else None
        self.blocks: list[Block] = []
        self.pending_refs: list[str] = []

    def is_citation_milestone(self, el: ET.Element) -> bool:
        unit = el.get("unit", "")
        if self.milestone_unit is not None:
            return unit == self.milestone_unit
        return unit not in NON_CITATION_MILESTONES

    # block level

    def walk(self, el: ET.Element) -> None:
        for child in el:
            name = _local(child.tag)
            if name is None:
                continue
            if _is_div(child):
                if _is_citation_div(child):
                    self.division(child)
                else:
                    self.walk(child)
            elif name in ("p", "ab"):
                self.paragraph(child)
            elif name == "milestone":
                n = _clean(child.get("n", "")).strip()
                if n and self.is_citation_milestone(child):
                    self.pending_refs.append(n)
            elif name in ("head", "note", "lg", "l", "sp", "speaker", "fw", "pb", "lb"):
                continue
            else:
                self.walk(child)

    def division(self, div: ET.Element) -> None:
        n = _clean(div.get("n", "")).strip()
        head = next(_children(div, "head"), None)
        title = _text_content(head) if head is not None else ""
        segments = []
        if n:
            segments.append(InlineSegment.ref(n))
        if title:
            segments.append(InlineSegment.plain(f" {title}" if n else title))
        if segments:
            self.blocks.append(Block.heading(segments))
        self.walk(div)

    def paragraph(self, p: ET.Element) -> None:
        pieces: list[tuple[str, str]] = [("ref", r) for r in self.pending_refs]
        self.pending_refs = []
        self.inline(p, pieces)

        segments: list[InlineSegment] = []
        for kind, value in pieces:
            if kind == "text":
                if segments and segments[-1].kind is SegmentKind.PLAIN:
                    value = segments.pop().content + value
                segments.append(InlineSegment.plain(value))
            elif kind == "ref":
                segments.append(InlineSegment.ref(value))
            else:
                segments.append(InlineSegment.note(value))
        segments = [
            InlineSegment.plain(_WS.sub(" ", s.content)) if s.kind is SegmentKind.PLAIN else s
            for s in segments
        ]
        if segments and segments[0].kind is SegmentKind.PLAIN:
            segments[0] = InlineSegment.plain(segments[0].content.lstrip())
        if segments and segments[-1].kind is SegmentKind.PLAIN:
            segments[-1] = InlineSegment.plain(segments[-1].content.rstrip())
        block = Block.paragraph(segments, tab=True)
        if block.segments:
            self.blocks.append(block)

    # inline level

    def inline(self, el: ET.Element, out: list[tuple[str, str]]) -> None:
        if el.text:
            out.append(("text", _clean(el.text)))
        for child in el:
            name = _local(child.tag)
            if name == "milestone":
                n = _clean(child.get("n", "")).strip()
                if n and self.is_citation_milestone(child):
                    out.append(("ref", n))
            elif name == "note":
                if "margin" in (child.get("place") or ""):
                    text = _text_content(child)
                    if text:
                        out.append(("note", text))
            elif name in ("lb", "pb", "cb"):
                if child.get("break") != "no":
                    out.append(("text", " "))
            elif name is None or name in DROPPED_ALTERNATIVES or name in SKIPPED_INLINE:
                pass
            else:
                self.inline(child, out)
            if child.tail:
                out.append(("text", _clean(child.tail)))


def tei_to_markup(tei: TeiSource, cs: CiteStructure | None = None) -> list[Block]:
    """Convert a TEI document into heading and paragraph blocks.

    Divisions become headings (``<ref>n</ref>`` plus the head text),
    paragraphs become indented paragraphs, citation milestones become inline
    refs and margin notes become inline notes.  Footnotes and other notes are
    dropped.
    """
    root = load_tei(tei)
    if cs is None:
        cs = extract_cite_structure(root)
    conv = _Converter(cs)
    conv.walk(_find_body(root))
    return conv.blocks


def convert_file(path: str | Path) -> tuple[list[Block], CiteStructure]:
    root = load_tei(Path(path))
    cs = extract_cite_structure(root)
    return tei_to_markup(root, cs), cs
