"""Spatio-frequency decomposition: windowed FFT spectra clustered into domains."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..ingest import ImageGrid
from .gmm import fit_gmm


class WindowTooLarge(ValueError):
    pass


@dataclass(frozen=True)
class FreqDecomposition:
    window: int
    stride: int
    spectra: np.ndarray  # (n_windows, window // 2) radially averaged log power
    labels: np.ndarray  # (n_windows,)
    domain_map: np.ndarray  # (n_wy, n_wx) labels at window resolution
    window_origins: np.ndarray  # (n_windows, 2) as (x, y)


def _radial_average(power: np.ndarray) -> np.ndarray:
    n = power.shape[0]
    cy = cx = n // 2
    yy, xx = np.mgrid[0:n, 0:n]
    r = np.sqrt((yy - cy) ** 2 + (xx - cx) ** 2).astype(int)
    nbins = n // 2
    sums = np.bincount(r.ravel(), weights=power.ravel(), minlength=nbins)[:nbins]
    counts = np.bincount(r.ravel(), minlength=nbins)[:nbins]
    return sums / np.maximum(counts, 1)


def spatiofreq_decompose(
    image: ImageGrid, window: int, stride: int, k: int, seed: int = 0
) -> FreqDecomposition:
    if window > min(image.width, image.height):
        raise WindowTooLarge(f"window {window} exceeds image {image.width}x{image.height}")
    if window & (window - 1) != 0:
        raise ValueError(f"window {window} is not a power of two")

    taper = np.outer(np.hanning(window), np.hanning(window))
    spectra = []
    origins = []
    ys = range(0, image.height - window + 1, stride)
    xs = range(0, image.width - window + 1, stride)
    for y in ys:
        for x in xs:
            patch = image.values[y : y + window, x : x + window] * taper
            power = np.abs(np.fft.fftshift(np.fft.fft2(patch))) ** 2
            spectra.append(np.log10(_radial_average(power) + 1e-12))
            origins.append((x, y))
    spectra = np.asarray(spectra)

    if k == 1:
        labels = np.zeros(len(spectra), dtype=int)
    else:
        mu, sd = spectra.mean(axis=0), spectra.std(axis=0)
        sd[sd == 0] = 1.0
        labels = fit_gmm((spectra - mu) / sd, k=k, seed=seed).labels

    domain_map = labels.reshape(len(list(ys)), len(list(xs)))
    return FreqDecomposition(
        window=window,
        stride=stride,
        spectra=spectra,
        labels=labels,
        domain_map=domain_map,
        window_origins=np.asarray(origins),
    )
