"""Run the typesetting engine and rasterizer on a pair of sources.

Both external commands are argument templates.  Placeholders:

* engine: ``{source}`` (file name), ``{jobname}``, ``{workdir}``; run with the
  work directory as cwd, it must leave ``<jobname>.pdf`` there and, for the
  colour source, ``<jobname>.spans.jsonl``.
* raster: ``{pdf}``, ``{prefix}``, ``{dpi}``; it must write one lossless image
  per page named ``<prefix>-<n>.<ext>``.

The environment variables ``STRUCTOCR_ENGINE`` and ``STRUCTOCR_RASTER``
override the defaults (parsed with shell quoting rules).
"""

from __future__ import annotations

import logging
import os
import re
import shlex
import subprocess
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

from PIL import Image

from .mask import mask_regions
from .spans import SpanLog, read_span_log

log = logging.getLogger(__name__)

DEFAULT_ENGINE = ("lualatex", "-interaction=nonstopmode", "-halt-on-error", "{source}")
DEFAULT_RASTER = ("pdftoppm", "-r", "{dpi}", "-png", "{pdf}", "{prefix}")
ENGINE_ENV = "STRUCTOCR_ENGINE"
RASTER_ENV = "STRUCTOCR_RASTER"
MAX_SIDE = 1024
IMAGE_SUFFIXES = (".png", ".tif", ".tiff", ".ppm", ".pgm")


class RenderError(RuntimeError):
    pass


class EngineFailure(RenderError):
    def __init__(self, message: str, log_text: str = ""):
        super().__init__(message)
        self.log_text = log_text


class SpanLogMissing(RenderError):
    pass


class RasterFailure(RenderError):
    pass


@dataclass
class RenderResult:
    doc_id: str
    black_source: Path
    color_source: Path
    images: list[Path] = field(default_factory=list)
    span_log: SpanLog | None = None


def resolve_command(explicit: Sequence[str] | str | None, env_var: str, default: Sequence[str]) -> list[str]:
    if explicit is None:
        explicit = os.environ.get(env_var) or default
    if isinstance(explicit, str):
        return shlex.split(explicit)
    return list(explicit)


def _fill(template: Sequence[str], **values) -> list[str]:
    return [arg.format(**values) for arg in template]


def _run(cmd: list[str], cwd: Path, runner: Callable) -> subprocess.CompletedProcess:
    log.debug("running %s in %s", cmd, cwd)
    try:
        return runner(cmd, cwd=cwd, capture_output=True, text=True, errors="replace")
    except FileNotFoundError as exc:
        raise EngineFailure(f"command not found: {cmd[0]}") from exc


def downsample(image: Image.Image, max_side: int = MAX_SIDE) -> Image.Image:
    """Resize so the longer side equals ``max_side``, keeping the aspect ratio."""
    width, height = image.size
    scale = max_side / max(width, height)
    size = (max(1, round(width * scale)), max(1, round(height * scale)))
    out = image.resize(size, Image.LANCZOS)
    dpi = image.info.get("dpi")
    if dpi:
        out.info["dpi"] = (dpi[0] * scale, dpi[1] * scale)
    return out


def write_sources(sources: tuple[str, str], workdir: Path, name: str) -> tuple[Path, Path]:
    workdir.mkdir(parents=True, exist_ok=True)
    black, color = workdir / f"{name}-black.tex", workdir / f"{name}-color.tex"
    black.write_text(sources[0], encoding="utf-8")
    color.write_text(sources[1], encoding="utf-8")
    return black, color


def _typeset(source: Path, engine: list[str], runner: Callable) -> Path:
    workdir, job = source.parent, source.stem
    # second pass settles cross-references and marginpar placement
    for _ in range(2):
        proc = _run(_fill(engine, source=source.name, jobname=job, workdir=str(workdir)), workdir, runner)
        if proc.returncode != 0:
            log_file = workdir / f"{job}.log"
            text = log_file.read_text("utf-8", "replace") if log_file.exists() else ""
            raise EngineFailure(
                f"engine exited with status {proc.returncode} on {source.name}",
                text or (proc.stdout or "") + (proc.stderr or ""),
            )
    pdf = workdir / f"{job}.pdf"
    if not pdf.exists():
        raise EngineFailure(f"engine produced no PDF for {source.name}")
    return pdf


def _page_number(path: Path) -> int:
    m = re.search(r"(\d+)$", path.stem)
    return int(m.group(1)) if m else 0


def compile_and_rasterize(
    sources: tuple[str, str],
    out_dir: str | Path,
    name: str = "document",
    engine_cmd: Sequence[str] | str | None = None,
    raster_cmd: Sequence[str] | str | None = None,
    dpi: int = 300,
    dry_run: bool = False,
    max_side: int = MAX_SIDE,
    runner: Callable = subprocess.run,
) -> RenderResult:
    """Typeset both sources, rasterize the black PDF and mask page furniture.

    Page images land in ``out_dir`` as ``<name>_p0001.png`` etc. and the span
    log as ``<name>.spans.jsonl``.  With ``dry_run`` only the sources are
    written and no command is executed.
    """
    out_dir = Path(out_dir)
    workdir = out_dir / f"{name}.work"
    black_src, color_src = write_sources(sources, workdir, name)
    result = RenderResult(name, black_src, color_src)
    if dry_run:
        return result

    engine = resolve_command(engine_cmd, ENGINE_ENV, DEFAULT_ENGINE)
    raster = resolve_command(raster_cmd, RASTER_ENV, DEFAULT_RASTER)

    black_pdf = _typeset(black_src, engine, runner)
    _typeset(color_src, engine, runner)
    span_file = workdir / f"{color_src.stem}.spans.jsonl"
    if not span_file.exists():
        raise SpanLogMissing(f"{span_file.name} was not written by the engine")
    span_log = read_span_log(span_file, doc_id=name)

    prefix = workdir / f"{name}-page"
    proc = _run(_fill(raster, pdf=str(black_pdf), prefix=str(prefix), dpi=dpi), workdir, runner)
    if proc.returncode != 0:
        raise RasterFailure(f"rasterizer exited with status {proc.returncode}: {proc.stderr}")
    pages = sorted(
        (p for p in workdir.glob(f"{prefix.name}*") if p.suffix.lower() in IMAGE_SUFFIXES),
        key=_page_number,
    )
    if not pages:
        raise RasterFailure("rasterizer produced no page images")
    if len(pages) != span_log.n_pages:
        log.warning("%s: %d page images but span log covers %d pages", name, len(pages), span_log.n_pages)

    out_dir.mkdir(parents=True, exist_ok=True)
    for page_no, path in enumerate(pages, start=1):
        with Image.open(path) as raw:
            raw.load()
            if not raw.info.get("dpi"):
                raw.info["dpi"] = (dpi, dpi)
            image = downsample(raw.convert("RGB") if raw.mode not in ("RGB", "L") else raw, max_side)
        image = mask_regions(image, span_log.boxes(page_no))
        target = out_dir / f"{name}_p{page_no:04d}.png"
        image.save(target, dpi=image.info.get("dpi", (dpi, dpi)))
        result.images.append(target)

    final_log = out_dir / f"{name}.spans.jsonl"
    final_log.write_text(span_file.read_text("utf-8"), encoding="utf-8")
    result.span_log = span_log
    return result
