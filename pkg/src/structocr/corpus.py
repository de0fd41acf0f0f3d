"""Dataset manifests, corpus statistics and document-level helpers."""

from __future__ import annotations

import enum
import json
import math
import random
import statistics
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Sequence

from .markup import (
    Block,
    InlineSegment,
    MarkupError,
    PageDocument,
    SegmentKind,
    normalize_text,
    parse_markup,
    strip_markup,
)
from .metrics import EmptyInput


class Split(str, enum.Enum):
    TRAIN = "train"
    VALID = "valid"
    TEST = "test"


class Source(str, enum.Enum):
    SYNTHETIC = "synthetic"
    REAL = "real"


class ReferenceSystem(str, enum.Enum):
    SECTION = "section"
    MILESTONE = "milestone"
    MIXED = "mixed"
    NONE = "none"


class ManifestError(ValueError):
    pass


class DuplicateRecord(ManifestError):
    pass


class ParseFailure(ManifestError):
    def __init__(self, record_id: str, cause: Exception):
        super().__init__(f"{record_id}: {cause}")
        self.record_id = record_id
        self.cause = cause


MANIFEST_FIELDS = ("work_id", "page_no", "image_path", "markup", "split", "source")


@dataclass(frozen=True)
class ManifestRecord:
    work_id: str
    page_no: int
    image_path: str
    markup: str
    split: Split = Split.TRAIN
    source: Source = Source.SYNTHETIC

    def __post_init__(self) -> None:
        object.__setattr__(self, "split", Split(self.split))
        object.__setattr__(self, "source", Source(self.source))
        object.__setattr__(self, "image_path", str(self.image_path))
        if self.page_no < 1:
            raise ManifestError(f"{self.work_id}: page_no must be >= 1, got {self.page_no}")

    @property
    def record_id(self) -> str:
        return f"{self.work_id}#{self.page_no}"

    def to_dict(self) -> dict:
        return {
            "work_id": self.work_id,
            "page_no": self.page_no,
            "image_path": self.image_path,
            "markup": self.markup,
            "split": self.split.value,
            "source": self.source.value,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ManifestRecord":
        missing = [k for k in ("work_id", "page_no", "markup") if k not in data]
        if missing:
            raise ManifestError(f"manifest record lacks {', '.join(missing)}")
        return cls(
            work_id=str(data["work_id"]),
            page_no=int(data["page_no"]),
            image_path=data.get("image_path", ""),
            markup=data["markup"],
            split=data.get("split", Split.TRAIN),
            source=data.get("source", Source.SYNTHETIC),
        )

    def document(self, lenient: bool = False) -> PageDocument:
        try:
            return parse_markup(self.markup, lenient=lenient, work_id=self.work_id, page_no=self.page_no)
        except MarkupError as exc:
            raise ParseFailure(self.record_id, exc) from exc


def check_unique(records: Iterable[ManifestRecord]) -> None:
    seen: set[tuple[str, int]] = set()
    for rec in records:
        key = (rec.work_id, rec.page_no)
        if key in seen:
            raise DuplicateRecord(f"duplicate manifest record {rec.record_id}")
        seen.add(key)


def write_manifest(records: Iterable[ManifestRecord], path: str | Path) -> int:
    """Write JSON Lines with a fixed field order; returns the record count."""
    records = list(records)
    check_unique(records)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rec in records:
            fh.write(json.dumps(rec.to_dict(), ensure_ascii=False) + "\n")
    return len(records)


def iter_manifest(path: str | Path) -> Iterator[ManifestRecord]:
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                data = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ManifestError(f"{path}:{line_no}: {exc}") from exc
            yield ManifestRecord.from_dict(data)


def read_manifest(path: str | Path) -> list[ManifestRecord]:
    records = list(iter_manifest(path))
    check_unique(records)
    return records


# -- statistics ----------------------------------------------------------------

@dataclass(frozen=True)
class CorpusStats:
    pages: int
    words_median: float
    pct_ref: float
    pct_note: float
    pct_heading: float

    def to_dict(self, ndigits: int | None = 1) -> dict:
        def r(x: float) -> float:
            return x if ndigits is None else round(x, ndigits)

        return {
            "pages": self.pages,
            "words_median": self.words_median,
            "pct_ref": r(self.pct_ref),
            "pct_note": r(self.pct_note),
            "pct_heading": r(self.pct_heading),
        }


def page_word_count(doc: PageDocument) -> int:
    return len(normalize_text(strip_markup(doc, include_notes=True)[0]).split())


def corpus_stats(manifest: Iterable[ManifestRecord | PageDocument]) -> CorpusStats:
    """Page count, median words per page and share of pages with each element."""
    docs = [r.document() if isinstance(r, ManifestRecord) else r for r in manifest]
    if not docs:
        return CorpusStats(0, 0, 0.0, 0.0, 0.0)
    n = len(docs)

    def pct(flags: Iterable[bool]) -> float:
        return 100.0 * sum(flags) / n

    median = statistics.median(page_word_count(d) for d in docs)
    return CorpusStats(
        pages=n,
        words_median=int(median) if float(median).is_integer() else median,
        pct_ref=pct(bool(d.items(SegmentKind.REF)) for d in docs),
        pct_note=pct(bool(d.items(SegmentKind.NOTE)) for d in docs),
        pct_heading=pct(bool(d.headings) for d in docs),
    )


# -- reference systems -----------------------------------------------------------

def count_ref_positions(pages: Iterable[PageDocument | Sequence[Block]]) -> tuple[int, int]:
    """(boundary refs, inline refs) over all pages."""
    boundary = inline = 0
    for page in pages:
        blocks = page.blocks if isinstance(page, PageDocument) else page
        for block in blocks:
            for i, seg in enumerate(block.segments):
                if seg.kind is not SegmentKind.REF:
                    continue
                if block.is_heading or i == 0:
                    boundary += 1
                else:
                    inline += 1
    return boundary, inline


def classify_reference_system(pages: Iterable[PageDocument | Sequence[Block]]) -> ReferenceSystem:
    boundary, inline = count_ref_positions(pages)
    if boundary and inline:
        return ReferenceSystem.MIXED
    if boundary:
        return ReferenceSystem.SECTION
    if inline:
        return ReferenceSystem.MILESTONE
    return ReferenceSystem.NONE


# -- cross-page reconstruction -----------------------------------------------------

HYPHENS = ("-", "\u2010", "\u00ad")  # hyphen-minus, hyphen, soft hyphen


def _join(left: Block, right: Block) -> Block:
    segs = list(left.segments)
    tail = list(right.segments)
    last = segs[-1] if segs else None
    if last is not None and last.kind is SegmentKind.PLAIN and last.content.rstrip().endswith(HYPHENS):
        body = last.content.rstrip()
        segs[-1] = InlineSegment.plain(body[:-1])
        if tail and tail[0].kind is SegmentKind.PLAIN:
            tail[0] = InlineSegment.plain(tail[0].content.lstrip())
    else:
        if last is not None and last.kind is SegmentKind.PLAIN:
            segs[-1] = InlineSegment.plain(last.content.rstrip())
        if tail and tail[0].kind is SegmentKind.PLAIN:
            tail[0] = InlineSegment.plain(tail[0].content.lstrip())
        segs.append(InlineSegment.plain(" "))
    return Block.paragraph(segs + tail, tab=left.tab)


def merge_document(pages: Sequence[PageDocument | Sequence[Block]]) -> list[Block]:
    """Concatenate pages, re-joining paragraphs that continue across a page break."""
    if not pages:
        raise EmptyInput("merge_document needs at least one page")
    out: list[Block] = []
    for page in pages:
        blocks = list(page.blocks if isinstance(page, PageDocument) else page)
        if out and blocks and out[-1].is_paragraph:
            first = blocks[0]
            if first.is_paragraph and not first.tab:
                out[-1] = _join(out[-1], first)
                blocks = blocks[1:]
        out.extend(blocks)
    return out


# -- splits ----------------------------------------------------------------------------

def assign_splits(
    groups: Iterable[str],
    seed: int = 0,
    train_frac: float = 0.9,
    valid_frac: float = 0.5,
) -> dict[str, Split]:
    """Seeded group-level split: ``train_frac`` of groups to training.

    The remaining evaluation pool is divided between validation (share
    ``valid_frac``) and test.  Every rendering of a group shares its split.
    """
    unique = sorted(set(groups))
    rng = random.Random(seed)
    rng.shuffle(unique)
    n_train = math.floor(train_frac * len(unique) + 1e-9)
    if n_train == len(unique) > 1 and train_frac < 1.0:
        n_train -= 1  # keep a non-empty evaluation pool
    pool = unique[n_train:]
    n_valid = math.ceil(valid_frac * len(pool) - 1e-9)
    out = {g: Split.TRAIN for g in unique[:n_train]}
    out.update({g: Split.VALID for g in pool[:n_valid]})
    out.update({g: Split.TEST for g in pool[n_valid:]})
    return out


def apply_splits(records: Iterable[ManifestRecord], splits: dict[str, Split]) -> list[ManifestRecord]:
    return [
        ManifestRecord(r.work_id, r.page_no, r.image_path, r.markup, splits.get(r.work_id, r.split), r.source)
        for r in records
    ]
