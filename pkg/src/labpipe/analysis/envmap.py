"""Local atomic-environment descriptors, clustering, and anomaly components.

Descriptor per atom: m sorted distances to nearest neighbors concatenated with
counts of each intensity class among those neighbors. Atoms in low-population
environment clusters are flagged anomalous; flagged atoms are grouped into
connected components over the k-NN adjacency graph so extended (line) defects
can be told apart from point defects by elongation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from .detect import DetectedAtoms
from .gmm import fit_gmm


@dataclass(frozen=True)
class AnomalyComponent:
    atom_indices: np.ndarray
    size: int
    bbox: tuple[float, float, float, float]  # xmin, ymin, xmax, ymax
    elongation: float  # principal-axis length ratio, >= 1


@dataclass(frozen=True)
class EnvMap:
    descriptors: np.ndarray  # (n, m + n_classes)
    env_labels: np.ndarray  # (n,)
    anomaly_flags: np.ndarray  # (n,) bool
    components: tuple[AnomalyComponent, ...]


def _hull_distance(points: np.ndarray) -> np.ndarray:
    """Distance of each point to the convex hull boundary of the point set."""
    from scipy.spatial import ConvexHull

    hull = ConvexHull(points)
    dmin = np.full(len(points), np.inf)
    for s in hull.simplices:
        p, q = points[s[0]], points[s[1]]
        pq = q - p
        t = np.clip((points - p) @ pq / (pq @ pq), 0.0, 1.0)
        proj = p + t[:, None] * pq
        dmin = np.minimum(dmin, np.hypot(*(points - proj).T))
    return dmin


def _elongation(points: np.ndarray) -> float:
    if len(points) < 3:
        return 1.0
    centered = points - points.mean(axis=0)
    cov = centered.T @ centered / len(points)
    ev = np.sort(np.linalg.eigvalsh(cov))
    if ev[1] <= 0:
        return 1.0
    if ev[0] <= 1e-12 * ev[1]:
        return 99.0
    return float(np.sqrt(ev[1] / ev[0]))


def map_environments(
    atoms: DetectedAtoms,
    intensity_labels: np.ndarray,
    m: int = 6,
    k_env: int = 2,
    seed: int = 0,
    anomaly_fraction: float = 0.15,
    border_margin: float = 2.0,
) -> EnvMap:
    n = len(atoms)
    if n < max(m + 1, 5 * k_env):
        raise ValueError(f"need at least {max(m + 1, 5 * k_env)} atoms, got {n}")
    intensity_labels = np.asarray(intensity_labels)
    n_classes = int(intensity_labels.max()) + 1 if len(intensity_labels) else 1

    tree = cKDTree(atoms.positions)
    dist, idx = tree.query(atoms.positions, k=m + 1)
    nbr_dist = dist[:, 1:]  # sorted ascending by KDTree
    nbr_idx = idx[:, 1:]

    counts = np.zeros((n, n_classes))
    for c in range(n_classes):
        counts[:, c] = (intensity_labels[nbr_idx] == c).sum(axis=1)
    desc = np.concatenate([nbr_dist, counts], axis=1)

    # standardize columns so distance and count scales are comparable
    mu, sd = desc.mean(axis=0), desc.std(axis=0)
    sd[sd == 0] = 1.0
    fit = fit_gmm((desc - mu) / sd, k=k_env, seed=seed)

    pops = np.bincount(fit.labels, minlength=k_env) / n
    anomalous_clusters = np.nonzero(pops < anomaly_fraction)[0]
    flags = np.isin(fit.labels, anomalous_clusters)

    # field-of-view edges distort environments; keep them out of defect calls
    margin = border_margin * float(np.median(nbr_dist[:, 0]))
    flags &= _hull_distance(atoms.positions) > margin

    components: list[AnomalyComponent] = []
    flagged = np.nonzero(flags)[0]
    if len(flagged):
        pos_in_flagged = {a: i for i, a in enumerate(flagged)}
        rows, cols = [], []
        for a in flagged:
            for b in nbr_idx[a]:
                if b in pos_in_flagged:
                    rows.append(pos_in_flagged[a])
                    cols.append(pos_in_flagged[b])
        adj = coo_matrix(
            (np.ones(len(rows)), (rows, cols)), shape=(len(flagged), len(flagged))
        )
        ncomp, comp_labels = connected_components(adj, directed=False)
        for c in range(ncomp):
            members = flagged[comp_labels == c]
            pts = atoms.positions[members]
            components.append(
                AnomalyComponent(
                    atom_indices=members,
                    size=len(members),
                    bbox=(
                        float(pts[:, 0].min()),
                        float(pts[:, 1].min()),
                        float(pts[:, 0].max()),
                        float(pts[:, 1].max()),
                    ),
                    elongation=_elongation(pts),
                )
            )
    components.sort(key=lambda c: -c.size)
    return EnvMap(
        descriptors=desc,
        env_labels=fit.labels,
        anomaly_flags=flags,
        components=tuple(components),
    )
