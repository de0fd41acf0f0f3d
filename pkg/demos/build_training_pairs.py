"""From a TEI edition to retained (image, target) training pairs.

Walks the synthetic pipeline on the bundled fixture: TEI conversion,
layout sampling, dual source emission, a simulated span log standing in for
the typesetting run, tail-matching segmentation and the similarity gate.
One page is then corrupted to show the gate dropping it.

Run from the repository root:  python3 demos/build_training_pairs.py [out_dir]
"""

import sys
import tempfile
from dataclasses import replace
from pathlib import Path

from structocr.align import build_pairs, drop_report, retention_summary, segment_target
from structocr.markup import parse_markup, serialize_markup
from structocr.render import Channel, SpanLog, compile_and_rasterize, emit_sources, load_catalog, sample_layout
from structocr.render import simulate_span_log
from structocr.tei import convert_file

TEI = Path(__file__).resolve().parent.parent / "tests" / "fixtures" / "tei" / "sample.xml"


def garble(log: SpanLog, page: int, every: int = 12) -> SpanLog:
    """Replace the first letter of every ``every``-th main span on ``page``."""
    spans = list(log.spans)
    hits = [i for i, s in enumerate(spans) if s.page == page and s.channel is Channel.MAIN]
    for i in hits[::every]:
        spans[i] = replace(spans[i], text="ξ" + spans[i].text[1:])
    return SpanLog(log.doc_id, tuple(spans))


def main(out_dir: Path) -> None:
    blocks, cite = convert_file(TEI)
    doc = parse_markup(serialize_markup(blocks))
    print(f"citation levels: {[(lv.name, 'milestone' if lv.milestone else 'division') for lv in cite.levels]}")
    print(f"{len(doc.blocks)} blocks, {len(doc.headings)} headings")

    catalog = load_catalog()
    config = sample_layout(seed=3, catalog=catalog)
    print(f"layout: {config.paper_format}, {config.columns} column(s), {config.font_family}, "
          f"refs {config.ref_placement}, numerals {config.numeral_style}")

    sources = emit_sources(doc.blocks, config, catalog, doc_id="sample")
    result = compile_and_rasterize(sources, out_dir, "sample", dry_run=True)
    print(f"sources: {result.black_source.name}, {result.color_source.name}")

    log = simulate_span_log(doc, "sample", chars_per_page=600, config=config, catalog=catalog)
    pages = log.page_texts()
    images = [f"sample_p{i:04d}.png" for i in range(1, len(pages) + 1)]
    chunks, trace = segment_target(doc, pages)
    print(f"\n{len(pages)} pages, split methods {trace.methods}")
    print(f"concatenated chunks reproduce the target: {''.join(chunks) == serialize_markup(doc)}")
    print(f"clean run: {retention_summary(build_pairs(chunks, pages, images))}")

    noisy = garble(log, page=2).page_texts()
    chunks, _ = segment_target(doc, noisy)
    pairs = build_pairs(chunks, noisy, images)
    print(f"page 2 garbled: {retention_summary(pairs)}")
    print(f"drop report: {drop_report(pairs)}")

    print("\nfirst retained target chunk:")
    print(next(p.target_markup for p in pairs if p.retained))


if __name__ == "__main__":
    if len(sys.argv) > 1:
        main(Path(sys.argv[1]))
    else:
        with tempfile.TemporaryDirectory() as tmp:
            main(Path(tmp))
