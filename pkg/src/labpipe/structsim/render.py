"""Deterministic 2D renders of atomic structures (orthographic + oblique views)."""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np
from PIL import Image, ImageDraw

from .structures import AtomicStructure, SPECIES_COLORS, covalent_radius

MAX_ATOMS = 10_000
CANVAS = 420
MARGIN = 36
_FALLBACK_COLOR = [160, 160, 160]


class TooManyAtoms(ValueError):
    pass


def _oblique_rotation() -> np.ndarray:
    # fixed viewing rotation: 30 deg about z, then 65 deg about x
    cz, sz = np.cos(np.pi / 6), np.sin(np.pi / 6)
    cx, sx = np.cos(np.deg2rad(65)), np.sin(np.deg2rad(65))
    rz = np.array([[cz, -sz, 0], [sz, cz, 0], [0, 0, 1]])
    rx = np.array([[1, 0, 0], [0, cx, -sx], [0, sx, cx]])
    return rx @ rz


# (name, projection matrix rows): screen_x, screen_y, depth
VIEWS: dict[str, np.ndarray] = {
    "x": np.array([[0, 1, 0], [0, 0, 1], [1, 0, 0]], dtype=float),
    "y": np.array([[1, 0, 0], [0, 0, 1], [0, 1, 0]], dtype=float),
    "z": np.array([[1, 0, 0], [0, 1, 0], [0, 0, 1]], dtype=float),
    "oblique": _oblique_rotation(),
}


def _render_one(structure: AtomicStructure, proj: np.ndarray) -> Image.Image:
    coords = structure.positions @ proj.T  # (n, 3): sx, sy, depth
    radii = np.array([covalent_radius(sp) for sp in structure.species])

    lo = (coords[:, :2] - radii[:, None]).min(axis=0)
    hi = (coords[:, :2] + radii[:, None]).max(axis=0)
    span = float(max(hi[0] - lo[0], hi[1] - lo[1], 1e-6))
    scale = (CANVAS - 2 * MARGIN) / span
    center = (lo + hi) / 2

    img = Image.new("RGB", (CANVAS, CANVAS), (255, 255, 255))
    draw = ImageDraw.Draw(img)

    # painter's algorithm: far atoms first; index breaks depth ties deterministically
    order = sorted(range(len(structure)), key=lambda i: (coords[i, 2], i))
    for i in order:
        sx = CANVAS / 2 + (coords[i, 0] - center[0]) * scale
        sy = CANVAS / 2 - (coords[i, 1] - center[1]) * scale
        r = max(2.0, radii[i] * scale * 0.6)
        color = tuple(SPECIES_COLORS.get(structure.species[i], _FALLBACK_COLOR))
        draw.ellipse([sx - r, sy - r, sx + r, sy + r], fill=color, outline=(40, 40, 40))

    # legend: one swatch per species, sorted
    for row, sp in enumerate(sorted(set(structure.species))):
        y0 = 6 + row * 16
        color = tuple(SPECIES_COLORS.get(sp, _FALLBACK_COLOR))
        draw.rectangle([6, y0, 18, y0 + 12], fill=color, outline=(40, 40, 40))
        draw.text((24, y0), sp, fill=(0, 0, 0))
    return img


@dataclass(frozen=True)
class RenderSet:
    views: dict[str, bytes]  # view name -> PNG bytes
    atom_count: int
    composition: dict[str, int]
    bounds: dict[str, tuple[float, float, float, float]]  # projected (x0, y0, x1, y1)

    def digest(self) -> str:
        """Structured text stand-in for the renders, for text-only backends."""
        comp = ", ".join(f"{k}: {v}" for k, v in sorted(self.composition.items()))
        lines = [f"atoms: {self.atom_count}", f"composition: {comp}"]
        for name in sorted(self.views):
            x0, y0, x1, y1 = self.bounds[name]
            lines.append(
                f"view {name}: extent {x1 - x0:.2f} x {y1 - y0:.2f} A"
            )
        return "\n".join(lines)


def render_views(structure: AtomicStructure) -> RenderSet:
    if len(structure) > MAX_ATOMS:
        raise TooManyAtoms(f"{len(structure)} atoms exceeds the {MAX_ATOMS} render limit")
    if len(structure) == 0:
        raise ValueError("cannot render an empty structure")
    views: dict[str, bytes] = {}
    bounds: dict[str, tuple[float, float, float, float]] = {}
    for name, proj in VIEWS.items():
        img = _render_one(structure, proj)
        buf = io.BytesIO()
        img.save(buf, format="PNG")
        views[name] = buf.getvalue()
        coords = structure.positions @ proj.T
        bounds[name] = (
            float(coords[:, 0].min()), float(coords[:, 1].min()),
            float(coords[:, 0].max()), float(coords[:, 1].max()),
        )
    return RenderSet(
        views=views,
        atom_count=len(structure),
        composition=structure.composition(),
        bounds=bounds,
    )
