"""Synthetic page rendering: layouts, typesetting sources, span logs, masking."""

from .engine import (
    EngineFailure,
    RasterFailure,
    RenderError,
    RenderResult,
    SpanLogMissing,
    compile_and_rasterize,
    downsample,
)
from .latex import UnsupportedBlock, emit_sources, plan_spans
from .layout import EmptyCatalog, LayoutCatalog, LayoutConfig, load_catalog, sample_layout
from .mask import BoxOutOfBounds, mask_regions
from .simulate import simulate_span_log
from .spans import (
    TARGET_CHANNELS,
    Channel,
    ColoredSpan,
    SpanLog,
    SpanLogError,
    read_span_log,
    write_span_log,
)

__all__ = [
    "BoxOutOfBounds",
    "Channel",
    "ColoredSpan",
    "EmptyCatalog",
    "EngineFailure",
    "LayoutCatalog",
    "LayoutConfig",
    "RasterFailure",
    "RenderError",
    "RenderResult",
    "SpanLog",
    "SpanLogError",
    "SpanLogMissing",
    "TARGET_CHANNELS",
    "UnsupportedBlock",
    "compile_and_rasterize",
    "downsample",
    "emit_sources",
    "load_catalog",
    "mask_regions",
    "plan_spans",
    "read_span_log",
    "sample_layout",
    "simulate_span_log",
    "write_span_log",
]
