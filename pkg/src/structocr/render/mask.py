from __future__ import annotations

import math
import warnings
from typing import Sequence

from PIL import Image

Box = Sequence[float]


class BoxOutOfBounds(UserWarning):
    """A mask box reached outside the page and was clipped."""


def image_dpi(image: Image.Image, default: float = 72.0) -> float:
    dpi = image.info.get("dpi")
    if not dpi:
        return default
    return float(dpi[0] if isinstance(dpi, (tuple, list)) else dpi)


def mask_regions(
    image: Image.Image,
    boxes: Sequence[Box],
    fill=None,
    dpi: float | None = None,
) -> Image.Image:
    """Paint over ``boxes`` (x, y, w, h in points, top-left origin).

    ``dpi`` defaults to the image's own resolution metadata.  ``fill``
    defaults to the colour of the top-left pixel, i.e. the page background.
    Boxes reaching outside the page are clipped and reported through a
    :class:`BoxOutOfBounds` warning.  Returns a new image.
    """
    out = image.copy()
    if not boxes:
        return out
    scale = (dpi if dpi is not None else image_dpi(image)) / 72.0
    if fill is None:
        fill = out.getpixel((0, 0))
    width, height = out.size
    for box in boxes:
        x, y, w, h = box
        x0, y0 = math.floor(x * scale), math.floor(y * scale)
        x1, y1 = math.ceil((x + w) * scale), math.ceil((y + h) * scale)
        cx0, cy0 = max(x0, 0), max(y0, 0)
        cx1, cy1 = min(x1, width), min(y1, height)
        # a box flush with the page edge can overshoot by a pixel after rounding
        if min(x0, y0) < -1 or x1 > width + 1 or y1 > height + 1:
            warnings.warn(
                f"mask box {tuple(box)} exceeds the {width}x{height} page and was clipped",
                BoxOutOfBounds,
                stacklevel=2,
            )
        if cx1 > cx0 and cy1 > cy0:
            out.paste(fill, (cx0, cy0, cx1, cy1))
    return out
