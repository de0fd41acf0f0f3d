"""Channel-tagged text spans and their JSON Lines wire format.

One span per line::

    {"page": 1, "channel": "main", "text": "Τὸ "}
    {"page": 1, "channel": "footer", "text": "…", "bbox": [54.0, 535.3, 311.5, 60.0]}

``bbox`` is ``[x, y, w, h]`` in points from the top-left page corner.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable


class Channel(str, enum.Enum):
    MAIN = "main"
    REF = "ref"
    NOTE = "note"
    HEADING = "heading"
    FOOTER = "footer"
    RUNNING_HEAD = "running-head"
    LINENO = "lineno"


# channels whose text belongs to the transcription target
TARGET_CHANNELS = frozenset({Channel.MAIN, Channel.REF, Channel.NOTE, Channel.HEADING})
MASKED_CHANNELS = frozenset({Channel.FOOTER, Channel.RUNNING_HEAD})


class SpanLogError(ValueError):
    pass


@dataclass(frozen=True)
class ColoredSpan:
    page: int
    channel: Channel
    text: str
    bbox: tuple[float, float, float, float] | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "channel", Channel(self.channel))
        if self.page < 1:
            raise SpanLogError(f"page numbers start at 1, got {self.page}")
        if self.bbox is not None:
            object.__setattr__(self, "bbox", tuple(float(v) for v in self.bbox))
            if len(self.bbox) != 4:
                raise SpanLogError("bbox must be [x, y, w, h]")
        elif self.channel in MASKED_CHANNELS:
            raise SpanLogError(f"{self.channel.value} spans must carry a bbox")

    def to_json(self) -> str:
        rec = {"page": self.page, "channel": self.channel.value, "text": self.text}
        if self.bbox is not None:
            rec["bbox"] = list(self.bbox)
        return json.dumps(rec, ensure_ascii=False)

    @classmethod
    def from_json(cls, line: str) -> "ColoredSpan":
        rec = json.loads(line)
        bbox = rec.get("bbox")
        return cls(int(rec["page"]), Channel(rec["channel"]), rec["text"], tuple(bbox) if bbox else None)


@dataclass(frozen=True)
class SpanLog:
    doc_id: str
    spans: tuple[ColoredSpan, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "spans", tuple(self.spans))
        pages = sorted({s.page for s in self.spans})
        if pages and pages != list(range(1, pages[-1] + 1)):
            raise SpanLogError(f"{self.doc_id}: page numbers are not contiguous")

    @property
    def n_pages(self) -> int:
        return max((s.page for s in self.spans), default=0)

    def page_spans(self, page: int) -> list[ColoredSpan]:
        return [s for s in self.spans if s.page == page]

    def boxes(self, page: int, channels=MASKED_CHANNELS) -> list[tuple[float, float, float, float]]:
        return [s.bbox for s in self.page_spans(page) if s.channel in channels and s.bbox]

    def page_texts(self, channels: Iterable[Channel] = TARGET_CHANNELS) -> list[str]:
        """Concatenated span text per page, restricted to ``channels``."""
        wanted = {Channel(c) for c in channels}
        texts = [[] for _ in range(self.n_pages)]
        for s in self.spans:
            if s.channel in wanted:
                texts[s.page - 1].append(s.text)
        return ["".join(t) for t in texts]


def write_span_log(log: SpanLog, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for span in log.spans:
            fh.write(span.to_json() + "\n")


def read_span_log(path: str | Path, doc_id: str | None = None) -> SpanLog:
    path = Path(path)
    spans = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                spans.append(ColoredSpan.from_json(line))
            except (KeyError, ValueError, TypeError) as exc:
                raise SpanLogError(f"{path}:{lineno}: {exc}") from exc
    if doc_id is None:
        doc_id = path.name.split(".")[0]
    return SpanLog(doc_id, tuple(spans))

