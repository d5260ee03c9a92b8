"""Small deterministic raster plots (no plotting library, stable bytes)."""

from __future__ import annotations

import io

import numpy as np
from PIL import Image, ImageDraw

SIZE = (480, 360)
MARGIN = 40
_PALETTE = [
    (31, 119, 180), (255, 127, 14), (44, 160, 44), (214, 39, 40),
    (148, 103, 189), (140, 86, 75), (227, 119, 194), (127, 127, 127),
]


def _canvas() -> tuple[Image.Image, ImageDraw.ImageDraw]:
    img = Image.new("RGB", SIZE, (255, 255, 255))
    draw = ImageDraw.Draw(img)
    w, h = SIZE
    draw.line([MARGIN, h - MARGIN, w - MARGIN, h - MARGIN], fill=(0, 0, 0))
    draw.line([MARGIN, MARGIN, MARGIN, h - MARGIN], fill=(0, 0, 0))
    return img, draw


def _png(img: Image.Image) -> bytes:
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    return buf.getvalue()


def histogram_png(edges: np.ndarray, counts: np.ndarray, title: str = "") -> bytes:
    img, draw = _canvas()
    w, h = SIZE
    span = float(edges[-1] - edges[0]) or 1.0
    peak = float(counts.max()) if len(counts) and counts.max() > 0 else 1.0
    for i, c in enumerate(counts):
        x0 = MARGIN + (edges[i] - edges[0]) / span * (w - 2 * MARGIN)
        x1 = MARGIN + (edges[i + 1] - edges[0]) / span * (w - 2 * MARGIN)
        y1 = h - MARGIN
        y0 = y1 - (c / peak) * (h - 2 * MARGIN)
        draw.rectangle([x0, y0, max(x0 + 1, x1 - 1), y1], fill=_PALETTE[0])
    if title:
        draw.text((MARGIN, 8), title, fill=(0, 0, 0))
    return _png(img)


def scatter_png(
    points: np.ndarray, labels: np.ndarray, flags: np.ndarray | None = None,
    title: str = "",
) -> bytes:
    """Points (n, 2) colored by integer label; flagged points get a ring."""
    img, draw = _canvas()
    w, h = SIZE
    lo = points.min(axis=0)
    hi = points.max(axis=0)
    span = np.maximum(hi - lo, 1e-9)

    def to_px(p):
        x = MARGIN + (p[0] - lo[0]) / span[0] * (w - 2 * MARGIN)
        y = h - MARGIN - (p[1] - lo[1]) / span[1] * (h - 2 * MARGIN)
        return x, y

    for i in range(len(points)):
        x, y = to_px(points[i])
        color = _PALETTE[int(labels[i]) % len(_PALETTE)]
        draw.ellipse([x - 2, y - 2, x + 2, y + 2], fill=color)
        if flags is not None and flags[i]:
            draw.ellipse([x - 5, y - 5, x + 5, y + 5], outline=(214, 39, 40))
    if title:
        draw.text((MARGIN, 8), title, fill=(0, 0, 0))
    return _png(img)


def heatmap_png(values: np.ndarray, title: str = "") -> bytes:
    """2D array rendered as a grayscale map, nearest-neighbor upscaled."""
    v = np.asarray(values, dtype=np.float64)
    lo, hi = float(v.min()), float(v.max())
    norm = (v - lo) / (hi - lo) if hi > lo else np.zeros_like(v)
    img = Image.fromarray((norm * 255).astype(np.uint8), mode="L")
    scale = max(1, 256 // max(img.size))
    img = img.resize((img.width * scale, img.height * scale), Image.NEAREST)
    if title:
        img = img.convert("RGB")
        ImageDraw.Draw(img).text((4, 4), title, fill=(255, 0, 0))
    return _png(img)


def curves_png(x: np.ndarray, ys: list[np.ndarray], title: str = "") -> bytes:
    img, draw = _canvas()
    w, h = SIZE
    x = np.asarray(x, dtype=np.float64)
    all_y = np.concatenate([np.asarray(y, dtype=np.float64) for y in ys])
    xlo, xhi = float(x.min()), float(x.max())
    ylo, yhi = float(all_y.min()), float(all_y.max())
    xspan = (xhi - xlo) or 1.0
    yspan = (yhi - ylo) or 1.0
    for j, y in enumerate(ys):
        pts = [
            (
                MARGIN + (xi - xlo) / xspan * (w - 2 * MARGIN),
                h - MARGIN - (yi - ylo) / yspan * (h - 2 * MARGIN),
            )
            for xi, yi in zip(x, y)
        ]
        draw.line(pts, fill=_PALETTE[j % len(_PALETTE)], width=1)
    if title:
        draw.text((MARGIN, 8), title, fill=(0, 0, 0))
    return _png(img)
