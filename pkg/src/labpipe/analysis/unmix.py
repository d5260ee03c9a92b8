"""Spectral unmixing by non-negative matrix factorization.

Multiplicative updates on the Frobenius objective, initialized by non-negative
double SVD with seeded random fill of the zero entries. Endmember rows are
normalized to unit max at the end, with compensating abundance scaling.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..ingest import HyperCube

_EPS = 1e-12


@dataclass(frozen=True)
class UnmixResult:
    k: int
    endmembers: np.ndarray  # (k, nbands), >= 0, unit max per row
    abundances: np.ndarray  # (ny * nx, k), >= 0
    reconstruction_error_trace: np.ndarray  # relative Frobenius error per iteration

    def abundance_maps(self, ny: int, nx: int) -> np.ndarray:
        return self.abundances.reshape(ny, nx, self.k).transpose(2, 0, 1)


def _nndsvd(x: np.ndarray, k: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    u, s, vt = np.linalg.svd(x, full_matrices=False)
    w = np.zeros((x.shape[0], k))
    h = np.zeros((k, x.shape[1]))
    w[:, 0] = np.sqrt(s[0]) * np.abs(u[:, 0])
    h[0, :] = np.sqrt(s[0]) * np.abs(vt[0, :])
    for j in range(1, min(k, len(s))):
        uj, vj = u[:, j], vt[j, :]
        up, un = np.maximum(uj, 0), np.maximum(-uj, 0)
        vp, vn = np.maximum(vj, 0), np.maximum(-vj, 0)
        pos = np.linalg.norm(up) * np.linalg.norm(vp)
        neg = np.linalg.norm(un) * np.linalg.norm(vn)
        if pos >= neg:
            uu, vv, sig = up, vp, pos
        else:
            uu, vv, sig = un, vn, neg
        if sig > 0:
            scale = np.sqrt(s[j] * sig)
            w[:, j] = scale * uu / np.linalg.norm(uu)
            h[j, :] = scale * vv / np.linalg.norm(vv)
    mean = x.mean()
    fill_w = w == 0
    fill_h = h == 0
    w[fill_w] = mean * 1e-2 * rng.random(int(fill_w.sum()))
    h[fill_h] = mean * 1e-2 * rng.random(int(fill_h.sum()))
    return w, h


def unmix(
    cube: HyperCube,
    k: int,
    seed: int = 0,
    tol: float = 1e-6,
    max_iter: int = 2000,
) -> UnmixResult:
    if k < 1:
        raise ValueError("k must be >= 1")
    if k > cube.nbands:
        raise ValueError(f"k={k} exceeds nbands={cube.nbands}")

    x = cube.values.reshape(cube.ny * cube.nx, cube.nbands).astype(np.float64)
    rng = np.random.default_rng(seed)
    w, h = _nndsvd(x, k, rng)

    x_norm = np.linalg.norm(x)
    if x_norm == 0:
        x_norm = 1.0
    trace = []
    prev = np.inf
    for _ in range(max_iter):
        h *= (w.T @ x) / (w.T @ w @ h + _EPS)
        w *= (x @ h.T) / (w @ (h @ h.T) + _EPS)
        err = np.linalg.norm(x - w @ h) / x_norm
        trace.append(err)
        if abs(prev - err) < tol * max(err, 1e-30):
            break
        prev = err

    scale = h.max(axis=1)
    scale[scale == 0] = 1.0
    h = h / scale[:, None]
    w = w * scale[None, :]
    return UnmixResult(
        k=k,
        endmembers=h,
        abundances=w,
        reconstruction_error_trace=np.asarray(trace),
    )
