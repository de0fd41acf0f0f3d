"""Command-line entry point: ``structocr <command> ...``.

Exit codes: 0 success, 1 hard failure (including usage errors), 2 partial
success.  With ``--json`` every command writes one JSON document to stdout.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import random
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

from . import __version__
from .align import (
    AlignParams,
    build_pairs,
    drop_report,
    retention_summary,
    segment_target,
)
from .corpus import (
    ManifestError,
    ManifestRecord,
    ParseFailure,
    Source,
    assign_splits,
    classify_reference_system,
    corpus_stats,
    merge_document,
    read_manifest,
    write_manifest,
)
from .markup import MarkupError, parse_markup, serialize_markup
from .metrics import aggregate, evaluate_pages
from .render import (
    RenderError,
    compile_and_rasterize,
    emit_sources,
    load_catalog,
    read_span_log,
    sample_layout,
)
from .tei import TeiError, convert_file

log = logging.getLogger("structocr")

EXIT_OK, EXIT_FAIL, EXIT_PARTIAL = 0, 1, 2


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    command: str
    inputs: list[Path] = field(default_factory=list)
    output: Path | None = None
    seed: int = 0
    threshold: float = 0.99
    include_notes: bool = True
    dry_run: bool = False
    workers: int = 1
    as_json: bool = False

    def validate(self) -> None:
        if not 0.0 <= self.threshold <= 1.0:
            raise UsageError(f"--threshold must lie in [0, 1], got {self.threshold}")
        if self.workers < 1:
            raise UsageError(f"--workers must be >= 1, got {self.workers}")
        for path in self.inputs:
            if not path.exists():
                raise UsageError(f"input not found: {path}")


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_FAIL, f"{self.prog}: error: {message}\n")


def _emit(payload, cfg: RunConfig, human: str | None = None, out: Path | None = None) -> None:
    text = json.dumps(payload, ensure_ascii=False, indent=2, sort_keys=False)
    if out is not None:
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text + "\n", encoding="utf-8")
    if cfg.as_json or (human is None and out is None):
        print(text)
    elif human is not None:
        print(human)


def _pool_map(fn: Callable, items: Sequence, workers: int) -> list:
    if workers <= 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


# -- tei2md --------------------------------------------------------------------

def cmd_tei2md(cfg: RunConfig) -> int:
    tei_dir, out_dir = cfg.inputs[0], cfg.output
    files = sorted(p for p in tei_dir.iterdir() if p.suffix.lower() in (".xml", ".tei"))
    if not files:
        log.warning("no TEI files in %s", tei_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    def convert(path: Path):
        try:
            blocks, cs = convert_file(path)
        except (TeiError, MarkupError, OSError) as exc:
            return path, str(exc)
        (out_dir / f"{path.stem}.md").write_text(serialize_markup(blocks) + "\n", encoding="utf-8")
        (out_dir / f"{path.stem}.cite.json").write_text(cs.to_json() + "\n", encoding="utf-8")
        return path, None

    results = _pool_map(convert, files, cfg.workers)
    failures = {p.name: err for p, err in results if err}
    for name, err in failures.items():
        print(f"tei2md: {name}: {err}", file=sys.stderr)
    summary = {"converted": len(files) - len(failures), "failed": failures}
    _emit(summary, cfg, f"converted {summary['converted']} of {len(files)} files")
    return EXIT_FAIL if failures else EXIT_OK


# -- render --------------------------------------------------------------------

def _render_job(job: dict) -> dict:
    doc_path, name, config, catalog, cfg = job["doc"], job["name"], job["config"], job["catalog"], job["cfg"]
    blocks = list(parse_markup(doc_path.read_text(encoding="utf-8")).blocks)
    sources = emit_sources(blocks, config, catalog, doc_id=name)
    workdir = cfg.output / f"{name}.work"
    workdir.mkdir(parents=True, exist_ok=True)
    (workdir / f"{name}.layout.json").write_text(json.dumps(config.to_dict()) + "\n", encoding="utf-8")
    result = compile_and_rasterize(
        sources, cfg.output, name,
        engine_cmd=job["engine"], raster_cmd=job["raster"],
        dry_run=cfg.dry_run,
    )
    out = {"name": name, "work_id": doc_path.stem, "sources": [str(result.black_source), str(result.color_source)]}
    if result.span_log is not None:
        pages = result.span_log.page_texts()
        chunks, trace = segment_target(blocks, pages)
        images = [str(p) for p in result.images]
        images += [f"{name}_p{i:04d}" for i in range(len(images) + 1, len(pages) + 1)]
        pairs = build_pairs(chunks, pages, images[: len(pages)], cfg.threshold)
        out["pairs"] = pairs
        out["mismatch"] = trace.mismatch
    return out


def cmd_render(cfg: RunConfig, catalog_path: Path | None, n_configs: int,
               engine: str | None, raster: str | None) -> int:
    markup_dir = cfg.inputs[0]
    catalog = load_catalog(catalog_path)
    docs = sorted(markup_dir.glob("*.md")) if markup_dir.is_dir() else [markup_dir]
    if not docs:
        log.warning("no markup files in %s", markup_dir)
    cfg.output.mkdir(parents=True, exist_ok=True)

    rng = random.Random(cfg.seed)
    jobs = []
    for doc in docs:
        for k in range(n_configs):
            config = sample_layout(rng.randrange(2**31), catalog)
            jobs.append({
                "doc": doc, "name": f"{doc.stem}_c{k:02d}", "config": config,
                "catalog": catalog, "cfg": cfg, "engine": engine, "raster": raster,
            })

    def run(job: dict):
        try:
            return _render_job(job)
        except (RenderError, MarkupError, OSError, ValueError) as exc:
            print(f"render: {job['name']}: {type(exc).__name__}: {exc}", file=sys.stderr)
            log.debug("render failure", exc_info=True)
            return {"name": job["name"], "error": f"{type(exc).__name__}: {exc}"}

    results = _pool_map(run, jobs, cfg.workers)
    ok = [r for r in results if "error" not in r]

    records = []
    if not cfg.dry_run and ok:
        splits = assign_splits((r["work_id"] for r in ok), seed=cfg.seed)
        for r in ok:
            for p in r["pairs"]:
                if p.retained:
                    records.append(ManifestRecord(
                        r["name"], p.page_no, p.image_ref,
                        _canonical(p.target_markup), splits[r["work_id"]], Source.SYNTHETIC,
                    ))
        write_manifest(records, cfg.output / "manifest.jsonl")

    summary = {
        "jobs": len(jobs),
        "succeeded": len(ok),
        "failed": {r["name"]: r["error"] for r in results if "error" in r},
        "sources": [s for r in ok for s in r["sources"]],
        "manifest_records": len(records),
    }
    _emit(summary, cfg, f"{len(ok)} of {len(jobs)} render jobs succeeded")
    if jobs and not ok:
        return EXIT_FAIL
    return EXIT_OK


def _canonical(chunk: str) -> str:
    try:
        doc = parse_markup(chunk)
    except MarkupError:
        doc = parse_markup(chunk, lenient=True)
    return serialize_markup(doc)


# -- align ---------------------------------------------------------------------

def cmd_align(cfg: RunConfig, work_id: str | None, image_dir: Path | None) -> int:
    span_path, target_path = cfg.inputs
    span_log = read_span_log(span_path)
    doc_id = span_log.doc_id or span_path.name.split(".")[0]
    work_id = work_id or doc_id
    target = parse_markup(target_path.read_text(encoding="utf-8"))
    pages = span_log.page_texts()

    status = EXIT_OK
    chunks, trace = segment_target(target, pages, AlignParams())
    if trace.mismatch:
        print(f"align: PageCountMismatch: {trace.mismatch}", file=sys.stderr)
        status = EXIT_PARTIAL

    base = image_dir if image_dir is not None else span_path.parent
    images = [str(base / f"{doc_id}_p{i:04d}.png") for i in range(1, len(pages) + 1)]
    pairs = build_pairs(chunks, pages, images, cfg.threshold)
    records = [
        ManifestRecord(work_id, p.page_no, p.image_ref, _canonical(p.target_markup))
        for p in pairs
        if p.retained
    ]
    cfg.output.mkdir(parents=True, exist_ok=True)
    write_manifest(records, cfg.output / "manifest.jsonl")
    drops = drop_report(pairs)
    summary = retention_summary(pairs)
    report = {
        "summary": summary,
        "threshold": cfg.threshold,
        "methods": trace.methods,
        "mismatch": trace.mismatch,
        "similarities": [round(p.similarity, 6) for p in pairs],
        "dropped": drops,
    }
    (cfg.output / "drop_report.json").write_text(
        json.dumps(report, ensure_ascii=False, indent=2) + "\n", encoding="utf-8"
    )
    _emit(report, cfg, f"retained {summary['retained']} of {summary['pages']} pages")
    return status


# -- eval ------------------------------------------------------------------------

def hypothesis_path(hyp_dir: Path, work_id: str, page_no: int) -> Path:
    return hyp_dir / work_id / f"{page_no}.md"


def cmd_eval(cfg: RunConfig, csv_out: Path | None) -> int:
    manifest_path, hyp_dir = cfg.inputs
    records = read_manifest(manifest_path)
    if not records:
        print("eval: manifest is empty", file=sys.stderr)
        return EXIT_FAIL
    pairs, missing = [], []
    for rec in records:
        ref = rec.document()
        path = hypothesis_path(hyp_dir, rec.work_id, rec.page_no)
        if path.exists():
            hyp = path.read_text(encoding="utf-8")
        else:
            log.warning("missing hypothesis for %s, scored as empty output", rec.record_id)
            missing.append(rec.record_id)
            hyp = ""
        pairs.append((ref, hyp))

    page_records = evaluate_pages(pairs, include_notes=cfg.include_notes, workers=cfg.workers)
    report = aggregate(page_records).to_dict(ndigits=4)
    report["include_notes"] = cfg.include_notes
    report["missing_hypotheses"] = missing

    cfg.output.parent.mkdir(parents=True, exist_ok=True)
    cfg.output.write_text(json.dumps(report, ensure_ascii=False, indent=2) + "\n", encoding="utf-8")
    csv_out = csv_out or cfg.output.with_suffix(".csv")
    rows = [r.as_row() for r in page_records]
    with open(csv_out, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
        writer.writeheader()
        writer.writerows(rows)
    _emit(report, cfg, f"CER median {report['cer_med']:.2f}, mean {report['cer_mean']:.2f} over {len(rows)} pages")
    return EXIT_OK


# -- stats / classify / merge -----------------------------------------------------

def _by_work(records: Iterable[ManifestRecord]) -> dict[str, list[ManifestRecord]]:
    groups: dict[str, list[ManifestRecord]] = {}
    for rec in records:
        groups.setdefault(rec.work_id, []).append(rec)
    return {w: sorted(rs, key=lambda r: r.page_no) for w, rs in sorted(groups.items())}


def cmd_stats(cfg: RunConfig) -> int:
    stats = corpus_stats(read_manifest(cfg.inputs[0]))
    _emit(stats.to_dict(ndigits=None), cfg, out=cfg.output)
    return EXIT_OK


def cmd_classify(cfg: RunConfig) -> int:
    groups = _by_work(read_manifest(cfg.inputs[0]))
    result = {w: classify_reference_system([r.document() for r in rs]).value for w, rs in groups.items()}
    _emit(result, cfg, out=cfg.output)
    return EXIT_OK


def cmd_merge(cfg: RunConfig) -> int:
    groups = _by_work(read_manifest(cfg.inputs[0]))
    result = {w: serialize_markup(merge_document([r.document() for r in rs])) for w, rs in groups.items()}
    _emit(result, cfg, out=cfg.output)
    return EXIT_OK


# -- wiring ------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="seed for all randomness")
    common.add_argument("--workers", type=int, default=1, help="parallel workers (>= 1)")
    common.add_argument("--json", action="store_true", help="print a JSON result on stdout")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="structocr", description="Structure-aware OCR corpus tools.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("tei2md", parents=[common], help="convert TEI files to markup")
    p.add_argument("tei_dir", type=Path)
    p.add_argument("out_dir", type=Path)

    p = sub.add_parser("render", parents=[common], help="typeset and rasterize markup documents")
    p.add_argument("markup_dir", type=Path, help="directory of .md files, or one file")
    p.add_argument("out_dir", type=Path)
    p.add_argument("--catalog", type=Path, default=None, help="layout catalog JSON")
    p.add_argument("--configs", type=int, default=1, help="layouts sampled per document")
    p.add_argument("--threshold", type=float, default=0.99)
    p.add_argument("--dry-run", action="store_true", help="write sources only")
    p.add_argument("--engine", default=None, help="typesetting command template")
    p.add_argument("--raster", default=None, help="rasterizer command template")

    p = sub.add_parser("align", parents=[common], help="segment a target against a span log")
    p.add_argument("spans", type=Path, help="span log (JSON Lines)")
    p.add_argument("target", type=Path, help="document-level markup")
    p.add_argument("out_dir", type=Path)
    p.add_argument("--threshold", type=float, default=0.99)
    p.add_argument("--work-id", default=None)
    p.add_argument("--image-dir", type=Path, default=None)

    p = sub.add_parser("eval", parents=[common], help="score hypotheses against a manifest")
    p.add_argument("manifest", type=Path)
    p.add_argument("hyp_dir", type=Path, help="holds <work_id>/<page_no>.md")
    p.add_argument("report", type=Path, help="JSON report path")
    p.add_argument("--csv", type=Path, default=None, help="per-page CSV (default: report path with .csv)")
    p.add_argument("--include-notes", action=argparse.BooleanOptionalAction, default=True)

    for name, text in (("stats", "corpus statistics"), ("classify", "reference system per work"),
                       ("merge", "merge pages into documents")):
        p = sub.add_parser(name, parents=[common], help=text)
        p.add_argument("manifest", type=Path)
        p.add_argument("-o", "--out", type=Path, default=None)
    return parser


def _config(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig(
        command=args.command,
        seed=args.seed,
        workers=args.workers,
        as_json=args.json,
        threshold=getattr(args, "threshold", 0.99),
        include_notes=getattr(args, "include_notes", True),
        dry_run=getattr(args, "dry_run", False),
    )
    if args.command == "tei2md":
        cfg.inputs, cfg.output = [args.tei_dir], args.out_dir
    elif args.command == "render":
        cfg.inputs, cfg.output = [args.markup_dir], args.out_dir
        if args.catalog is not None:
            cfg.inputs.append(args.catalog)
        if args.configs < 1:
            raise UsageError("--configs must be >= 1")
    elif args.command == "align":
        cfg.inputs, cfg.output = [args.spans, args.target], args.out_dir
    elif args.command == "eval":
        cfg.inputs, cfg.output = [args.manifest, args.hyp_dir], args.report
    else:
        cfg.inputs, cfg.output = [args.manifest], args.out
    cfg.validate()
    if args.command == "tei2md" and not args.tei_dir.is_dir():
        raise UsageError(f"not a directory: {args.tei_dir}")
    return cfg


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg = _config(args)
        if args.command == "tei2md":
            return cmd_tei2md(cfg)
        if args.command == "render":
            return cmd_render(cfg, args.catalog, args.configs, args.engine, args.raster)
        if args.command == "align":
            return cmd_align(cfg, args.work_id, args.image_dir)
        if args.command == "eval":
            return cmd_eval(cfg, args.csv)
        return {"stats": cmd_stats, "classify": cmd_classify, "merge": cmd_merge}[args.command](cfg)
    except UsageError as exc:
        print(f"structocr: error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except ParseFailure as exc:
        print(f"structocr {args.command}: parse failure in record {exc.record_id}: {exc.cause}", file=sys.stderr)
        return EXIT_FAIL
    except (ManifestError, MarkupError, RenderError, OSError, ValueError) as exc:
        print(f"structocr {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
