"""Layout catalog and seeded sampling of page layouts."""

from __future__ import annotations

import json
import random
from dataclasses import asdict, dataclass
from importlib import resources
from pathlib import Path
from typing import Any, Mapping

LINE_NUMBER_INTERVALS = frozenset({0, 4, 5, 8, 10, 12, 15})
NUMERAL_STYLES = ("arabic", "roman", "greek-alphabetic")
REF_PLACEMENTS = ("margin-left", "margin-right", "inline", "superscript")
HEADING_ALIGNMENTS = ("center", "left")

# sampling order is part of the seed -> config contract; do not reorder
DIMENSIONS = (
    "paper_format",
    "columns",
    "font_family",
    "background_template",
    "numeral_style",
    "ref_placement",
    "heading_alignment",
    "line_number_interval",
    "base_font_size",
    "margins",
)


class EmptyCatalog(ValueError):
    pass


class CatalogError(ValueError):
    pass


@dataclass(frozen=True)
class LayoutCatalog:
    """Allowed values per layout dimension.

    ``paper_format``, ``font_family`` and ``background_template`` map ids to
    data (page size in points, font name, background colour); the other
    dimensions are plain value lists.
    """

    paper_format: Mapping[str, tuple[float, float]]
    columns: tuple[int, ...]
    font_family: Mapping[str, str]
    background_template: Mapping[str, str]
    numeral_style: tuple[str, ...]
    ref_placement: tuple[str, ...]
    heading_alignment: tuple[str, ...]
    line_number_interval: tuple[int, ...]
    base_font_size: tuple[float, ...]
    margins: tuple[tuple[float, float, float, float], ...]

    def __post_init__(self) -> None:
        for dim in DIMENSIONS:
            if not getattr(self, dim):
                raise EmptyCatalog(f"catalog dimension {dim!r} has no options")
        _check_subset("columns", self.columns, {1, 2})
        _check_subset("numeral_style", self.numeral_style, set(NUMERAL_STYLES))
        _check_subset("ref_placement", self.ref_placement, set(REF_PLACEMENTS))
        _check_subset("heading_alignment", self.heading_alignment, set(HEADING_ALIGNMENTS))
        _check_subset("line_number_interval", self.line_number_interval, LINE_NUMBER_INTERVALS)
        for m in self.margins:
            if len(m) != 4:
                raise CatalogError("margins must list four lengths (top, right, bottom, left)")

    def options(self, dim: str) -> list:
        values = getattr(self, dim)
        if isinstance(values, Mapping):
            return sorted(values)
        return list(values)

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "LayoutCatalog":
        missing = [d for d in DIMENSIONS if d not in data]
        if missing:
            raise CatalogError(f"catalog lacks dimensions: {', '.join(missing)}")
        return cls(
            paper_format={k: tuple(v) for k, v in data["paper_format"].items()},
            columns=tuple(data["columns"]),
            font_family=dict(data["font_family"]),
            background_template=dict(data["background_template"]),
            numeral_style=tuple(data["numeral_style"]),
            ref_placement=tuple(data["ref_placement"]),
            heading_alignment=tuple(data["heading_alignment"]),
            line_number_interval=tuple(data["line_number_interval"]),
            base_font_size=tuple(data["base_font_size"]),
            margins=tuple(tuple(m) for m in data["margins"]),
        )


def _check_subset(dim: str, values, allowed) -> None:
    bad = set(values) - set(allowed)
    if bad:
        raise CatalogError(f"{dim}: unsupported values {sorted(bad)}")


def load_catalog(path: str | Path | None = None) -> LayoutCatalog:
    """Load a catalog file, or the packaged default when ``path`` is None."""
    if path is None:
        text = resources.files("structocr.render").joinpath("catalog.json").read_text("utf-8")
    else:
        text = Path(path).read_text("utf-8")
    return LayoutCatalog.from_dict(json.loads(text))


@dataclass(frozen=True)
class LayoutConfig:
    """One sampled typographic realization.  Lengths are in points;
    ``margins`` is (top, right, bottom, left)."""

    seed: int
    paper_format: str
    columns: int
    font_family: str
    background_template: str
    numeral_style: str
    ref_placement: str
    heading_alignment: str
    line_number_interval: int
    base_font_size: float
    margins: tuple[float, float, float, float]

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "LayoutConfig":
        data = dict(data)
        data["margins"] = tuple(data["margins"])
        return cls(**data)


def sample_layout(seed: int, catalog: LayoutCatalog | None = None) -> LayoutConfig:
    """Draw every dimension uniformly and independently; same seed, same config."""
    if catalog is None:
        catalog = load_catalog()
    rng = random.Random(seed)
    picks = {dim: rng.choice(catalog.options(dim)) for dim in DIMENSIONS}
    picks["margins"] = tuple(picks["margins"])
    return LayoutConfig(seed=seed, **picks)


def page_size(config: LayoutConfig, catalog: LayoutCatalog) -> tuple[float, float]:
    width, height = catalog.paper_format[config.paper_format]
    return float(width), float(height)
