"""Stand-in for the typesetting engine: paginate planned spans by length.

Produces the span log a real run would emit, without a TeX installation.
Useful for tests, demos and for checking the alignment stage in isolation.
"""

from __future__ import annotations

from typing import Sequence

from ..markup import Block, PageDocument
from .latex import furniture_spans, plan_spans
from .layout import LayoutCatalog, LayoutConfig, load_catalog, sample_layout
from .spans import TARGET_CHANNELS, ColoredSpan, SpanLog


def simulate_span_log(
    doc: PageDocument | Sequence[Block],
    doc_id: str = "document",
    chars_per_page: int = 1500,
    config: LayoutConfig | None = None,
    catalog: LayoutCatalog | None = None,
) -> SpanLog:
    """Fill pages greedily with spans until ``chars_per_page`` target characters.

    Headings are never split across pages.  Every page also receives a
    running-head and a footer span with their boxes.
    """
    blocks = list(doc.blocks if isinstance(doc, PageDocument) else doc)
    if catalog is None:
        catalog = load_catalog()
    if config is None:
        config = sample_layout(0, catalog)
    planned = plan_spans(blocks)

    # group heading spans so they move as one unit
    units: list[list] = []
    for s in planned:
        if units and blocks[s.block].is_heading and units[-1][0].block == s.block:
            units[-1].append(s)
        else:
            units.append([s])

    pages: list[list] = [[]]
    used = 0
    for unit in units:
        size = sum(len(s.text) for s in unit if s.channel in TARGET_CHANNELS)
        if pages[-1] and used + size > chars_per_page:
            pages.append([])
            used = 0
        pages[-1].extend(unit)
        used += size

    head, foot = furniture_spans(doc_id, len(planned) + 1, config, catalog)
    spans = []
    for page_no, page in enumerate(pages, start=1):
        spans.append(ColoredSpan(page_no, head.channel, head.text, head.bbox))
        spans.extend(ColoredSpan(page_no, s.channel, s.text) for s in page)
        spans.append(ColoredSpan(page_no, foot.channel, foot.text, foot.bbox))
    return SpanLog(doc_id, tuple(spans))
