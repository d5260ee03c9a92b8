"""Atomic-column detection: difference-of-Gaussian maxima + subpixel refinement."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import gaussian_filter, maximum_filter
from scipy.spatial import cKDTree

from ..ingest import ImageGrid, NonFiniteData


@dataclass(frozen=True)
class DetectionParams:
    sigma_min: float = 2.0
    sigma_max: float = 4.0
    threshold: float = 0.02


@dataclass(frozen=True)
class DetectedAtoms:
    positions: np.ndarray  # (n, 2) subpixel (x, y) in pixels
    intensities: np.ndarray  # (n,) smoothed-image value at each detection
    detection_params: DetectionParams

    def __len__(self) -> int:
        return len(self.positions)


def _subpixel_offset(patch: np.ndarray) -> tuple[float, float]:
    """Quadratic peak interpolation on a 3x3 neighborhood; offsets clamped to 0.5 px."""

    def axis_offset(m, c, p):
        denom = 2.0 * (2.0 * c - m - p)
        if denom == 0:
            return 0.0
        return float(np.clip((p - m) / denom, -0.5, 0.5))

    dy = axis_offset(patch[0, 1], patch[1, 1], patch[2, 1])
    dx = axis_offset(patch[1, 0], patch[1, 1], patch[1, 2])
    return dx, dy


def detect_atoms(image: ImageGrid, params: DetectionParams = DetectionParams()) -> DetectedAtoms:
    vals = image.values
    if not np.all(np.isfinite(vals)):
        raise NonFiniteData("image contains non-finite values")

    smoothed = gaussian_filter(vals, params.sigma_min, mode="nearest")
    response = smoothed - gaussian_filter(vals, params.sigma_max, mode="nearest")

    is_peak = (maximum_filter(response, size=3, mode="nearest") == response) & (
        response > params.threshold
    )
    ys, xs = np.nonzero(is_peak)
    h, w = vals.shape

    positions = []
    strengths = []
    for y, x in zip(ys, xs):
        if 0 < y < h - 1 and 0 < x < w - 1:
            dx, dy = _subpixel_offset(response[y - 1 : y + 2, x - 1 : x + 2])
        else:
            dx = dy = 0.0
        positions.append((x + dx, y + dy))
        strengths.append(response[y, x])
    if not positions:
        return DetectedAtoms(
            positions=np.empty((0, 2)), intensities=np.empty(0), detection_params=params
        )

    pos = np.asarray(positions)
    strength = np.asarray(strengths)

    # merge detections closer than 1 px, keeping the stronger response
    order = np.argsort(-strength, kind="stable")
    neighbors = cKDTree(pos).query_ball_point(pos, r=1.0)
    kept_mask = np.zeros(len(pos), dtype=bool)
    for i in order:
        if all(
            not kept_mask[j] or np.hypot(*(pos[i] - pos[j])) >= 1.0
            for j in neighbors[i]
            if j != i
        ):
            kept_mask[i] = True
    pos = pos[kept_mask]

    iy = np.clip(np.round(pos[:, 1]).astype(int), 0, h - 1)
    ix = np.clip(np.round(pos[:, 0]).astype(int), 0, w - 1)
    return DetectedAtoms(positions=pos, intensities=smoothed[iy, ix], detection_params=params)
