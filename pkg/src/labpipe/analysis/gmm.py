"""Gaussian mixture fitting by EM with seeded k-means++ initialization.

Diagonal covariances; 1D sample vectors are treated as (n, 1) matrices.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp


class DegenerateComponent(RuntimeError):
    """A mixture weight collapsed below 1/(10 n) and restarts were exhausted."""


@dataclass(frozen=True)
class GmmFit:
    k: int
    means: np.ndarray  # (k, d)
    variances: np.ndarray  # (k, d)
    weights: np.ndarray  # (k,), simplex
    labels: np.ndarray  # (n,) argmax responsibility
    log_likelihood_trace: np.ndarray

    @property
    def means_flat(self) -> np.ndarray:
        """Convenience for 1D fits: means as a (k,) vector."""
        return self.means[:, 0]


def _kmeanspp_centers(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = x.shape[0]
    centers = np.empty((k, x.shape[1]))
    centers[0] = x[rng.integers(n)]
    d2 = np.sum((x - centers[0]) ** 2, axis=1)
    for j in range(1, k):
        total = d2.sum()
        if total <= 0:
            centers[j] = x[rng.integers(n)]
        else:
            centers[j] = x[rng.choice(n, p=d2 / total)]
        d2 = np.minimum(d2, np.sum((x - centers[j]) ** 2, axis=1))
    return centers


def _log_gauss(x: np.ndarray, mean: np.ndarray, var: np.ndarray) -> np.ndarray:
    return -0.5 * np.sum(np.log(2 * np.pi * var) + (x - mean) ** 2 / var, axis=1)


def fit_gmm(
    samples: np.ndarray,
    k: int,
    seed: int,
    tol: float = 1e-8,
    max_iter: int = 500,
    max_restarts: int = 3,
) -> GmmFit:
    x = np.asarray(samples, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    n, d = x.shape
    if k < 1:
        raise ValueError("k must be >= 1")
    if n < 5 * k:
        raise ValueError(f"need at least {5 * k} samples for k={k}, got {n}")

    min_weight = 1.0 / (10.0 * n)
    var_floor = max(1e-12, 1e-10 * float(np.var(x)))

    last_err: DegenerateComponent | None = None
    for restart in range(max_restarts):
        rng = np.random.default_rng(seed + restart)
        try:
            return _em_once(x, k, rng, tol, max_iter, min_weight, var_floor)
        except DegenerateComponent as e:
            last_err = e
    raise DegenerateComponent(f"degenerate after {max_restarts} restarts: {last_err}")


def _em_once(x, k, rng, tol, max_iter, min_weight, var_floor) -> GmmFit:
    n, d = x.shape
    centers = _kmeanspp_centers(x, k, rng)
    d2 = np.sum((x[:, None, :] - centers[None, :, :]) ** 2, axis=2)
    labels = np.argmin(d2, axis=1)

    means = np.empty((k, d))
    variances = np.empty((k, d))
    weights = np.empty(k)
    for j in range(k):
        mask = labels == j
        pts = x[mask] if mask.any() else x
        means[j] = pts.mean(axis=0)
        variances[j] = np.maximum(pts.var(axis=0), var_floor)
        weights[j] = max(mask.mean(), min_weight)
    weights /= weights.sum()

    trace = []
    prev_ll = -np.inf
    for _ in range(max_iter):
        # E step
        log_p = np.stack(
            [np.log(weights[j]) + _log_gauss(x, means[j], variances[j]) for j in range(k)],
            axis=1,
        )
        norm = logsumexp(log_p, axis=1)
        ll = float(norm.sum())
        trace.append(ll)
        resp = np.exp(log_p - norm[:, None])

        # M step
        nk = resp.sum(axis=0)
        weights = nk / n
        if np.any(weights < min_weight):
            raise DegenerateComponent(f"component weight {weights.min():.3g} < {min_weight:.3g}")
        means = (resp.T @ x) / nk[:, None]
        for j in range(k):
            diff2 = (x - means[j]) ** 2
            variances[j] = np.maximum((resp[:, j] @ diff2) / nk[j], var_floor)

        if ll - prev_ll < tol and np.isfinite(prev_ll):
            break
        prev_ll = ll

    log_p = np.stack(
        [np.log(weights[j]) + _log_gauss(x, means[j], variances[j]) for j in range(k)],
        axis=1,
    )
    labels = np.argmax(log_p, axis=1)
    return GmmFit(
        k=k,
        means=means,
        variances=variances,
        weights=weights,
        labels=labels,
        log_likelihood_trace=np.asarray(trace),
    )
