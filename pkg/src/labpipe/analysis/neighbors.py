"""First-neighbor distance statistics for detected atoms."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.spatial import cKDTree

from .detect import DetectedAtoms


class TooFewAtoms(ValueError):
    pass


@dataclass(frozen=True)
class NeighborStats:
    nn_distances: np.ndarray  # pixels
    nn_distances_nm: Optional[np.ndarray]
    bin_edges: np.ndarray
    histogram: np.ndarray
    modal_distance: float


def _fd_bin_edges(d: np.ndarray) -> np.ndarray:
    lo, hi = float(d.min()), float(d.max())
    if hi == lo:
        return np.array([lo - 0.5, hi + 0.5])
    q75, q25 = np.percentile(d, [75, 25])
    width = 2.0 * (q75 - q25) / len(d) ** (1.0 / 3.0)
    if width <= 0:
        width = (hi - lo) / max(1, int(np.sqrt(len(d))))
    nbins = max(1, int(np.ceil((hi - lo) / width)))
    return np.linspace(lo, lo + nbins * width, nbins + 1)


def neighbor_stats(atoms: DetectedAtoms, pixel_size_nm: Optional[float] = None) -> NeighborStats:
    if len(atoms) < 2:
        raise TooFewAtoms(f"need at least 2 atoms, got {len(atoms)}")
    tree = cKDTree(atoms.positions)
    dist, _ = tree.query(atoms.positions, k=2)
    nn = dist[:, 1]

    edges = _fd_bin_edges(nn)
    counts, edges = np.histogram(nn, bins=edges)
    modal = float((edges[np.argmax(counts)] + edges[np.argmax(counts) + 1]) / 2.0)
    return NeighborStats(
        nn_distances=nn,
        nn_distances_nm=nn * pixel_size_nm if pixel_size_nm else None,
        bin_edges=edges,
        histogram=counts,
        modal_distance=modal,
    )
