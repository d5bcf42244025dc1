"""Exact Euclidean MST and the perturbed-MST neighbourhood graph."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.spatial.distance import cdist, pdist, squareform


@dataclass
class PerturbationConfig:
    t_p: int = 20
    r_p: float = 0.5
    k_noise: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.t_p < 1:
            raise ValueError("t_p must be >= 1")
        if not 0.0 <= self.r_p <= 1.0:
            raise ValueError("r_p must lie in [0, 1]")
        if self.k_noise < 1:
            raise ValueError("k_noise must be >= 1")


@dataclass
class NeighborhoodGraph:
    weights: np.ndarray

    @property
    def n(self) -> int:
        return self.weights.shape[0]

    def edges(self):
        """``(i, j, weight)`` for every positive weight with ``i < j``."""
        i, j = np.nonzero(np.triu(self.weights, 1))
        return [(int(a), int(b), float(self.weights[a, b])) for a, b in zip(i, j)]

    def save_csv(self, path) -> None:
        with Path(path).open("w", encoding="utf-8") as fh:
            fh.write("i,j,weight\n")
            for a, b, w in self.edges():
                fh.write(f"{a},{b},{w!r}\n")


def _prim(dist: np.ndarray):
    """Dense Prim on a full distance matrix.

    Ties resolve to the lowest vertex index, and to the earliest-added tree
    vertex when several are equidistant.
    """
    n = dist.shape[0]
    in_tree = np.zeros(n, dtype=bool)
    in_tree[0] = True
    best = dist[0].copy()
    parent = np.zeros(n, dtype=int)
    best[0] = np.inf
    edges = []
    for _ in range(n - 1):
        cand = np.where(in_tree, np.inf, best)
        v = int(np.argmin(cand))
        u = int(parent[v])
        edges.append((min(u, v), max(u, v)))
        in_tree[v] = True
        closer = (dist[v] < best) & ~in_tree
        best = np.where(closer, dist[v], best)
        parent = np.where(closer, v, parent)
    return sorted(edges)


def euclidean_mst(points) -> list:
    """Minimum spanning tree of the complete Euclidean graph.

    Returns ``n - 1`` edges ``(i, j)`` with ``i < j``, sorted.
    """
    x = np.atleast_2d(np.asarray(points, dtype=float))
    if x.shape[0] < 2:
        raise ValueError("euclidean_mst needs at least 2 points")
    if not np.all(np.isfinite(x)):
        raise ValueError("points must be finite")
    return _prim(squareform(pdist(x)))


def knn_distance(x: np.ndarray, k: int) -> np.ndarray:
    """Euclidean distance from each row to its k-th nearest other row."""
    d = cdist(x, x)
    np.fill_diagonal(d, np.inf)
    return np.partition(d, k - 1, axis=1)[:, k - 1]


def perturbation_rng(seed: int, p: int) -> np.random.Generator:
    # stream depends only on (seed, p), never on execution order
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(p)]))


def pmst(points, cfg: PerturbationConfig, threads: Optional[int] = 1) -> NeighborhoodGraph:
    """Average of MST indicators over ``t_p`` noisy copies of ``points``.

    Each copy jitters point ``i`` with isotropic Gaussian noise of std
    ``r_p * d(x_i, k_noise-th neighbour)``, computed once on the clean cloud.
    """
    x = np.atleast_2d(np.asarray(points, dtype=float))
    n, m = x.shape
    if n < 2:
        raise ValueError("pmst needs at least 2 points")
    if cfg.k_noise >= n:
        raise ValueError(f"k_noise={cfg.k_noise} must be < n={n}")
    sigma = cfg.r_p * knn_distance(x, cfg.k_noise)

    def one(p):
        if cfg.r_p == 0:
            xp = x
        else:
            xp = x + sigma[:, None] * perturbation_rng(cfg.seed, p).standard_normal((n, m))
        ind = np.zeros((n, n))
        for i, j in euclidean_mst(xp):
            ind[i, j] = ind[j, i] = 1.0
        return ind

    ps = range(1, cfg.t_p + 1)
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            indicators = list(ex.map(one, ps))
    else:
        indicators = [one(p) for p in ps]
    total = np.zeros((n, n))
    for ind in indicators:  # fixed order p = 1..t_p
        total += ind
    return NeighborhoodGraph(total / cfg.t_p)
