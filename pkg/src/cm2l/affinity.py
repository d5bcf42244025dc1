"""Locally scaled intra-modal affinities, link-propagated inter-modal
affinities and the composite joint dissimilarity."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .data import CorrespondenceSet
from .graph import NeighborhoodGraph


@dataclass
class ScalingConfig:
    k_scale: int = 5
    eps_scale: float = 1e-12

    def __post_init__(self):
        if self.k_scale < 1:
            raise ValueError("k_scale must be >= 1")
        if self.eps_scale <= 0:
            raise ValueError("eps_scale must be > 0")


@dataclass
class AffinityBlocks:
    w11: np.ndarray
    w22: np.ndarray
    w12: np.ndarray

    @property
    def n1(self) -> int:
        return self.w11.shape[0]

    @property
    def n2(self) -> int:
        return self.w22.shape[0]


def _sqdist(x: np.ndarray) -> np.ndarray:
    d = cdist(x, x, "sqeuclidean")
    np.fill_diagonal(d, 0.0)
    return d


def local_scales(points, cfg: ScalingConfig) -> np.ndarray:
    """Squared distance from each point to its ``k_scale``-th nearest other
    point, floored at ``eps_scale``."""
    x = np.atleast_2d(np.asarray(points, dtype=float))
    n = x.shape[0]
    if n <= cfg.k_scale:
        raise ValueError(f"need more than k_scale={cfg.k_scale} points, got {n}")
    d = _sqdist(x)
    np.fill_diagonal(d, np.inf)
    s = np.partition(d, cfg.k_scale - 1, axis=1)[:, cfg.k_scale - 1]
    return np.maximum(s, cfg.eps_scale)


def scaled_distance_matrix(points, scales) -> np.ndarray:
    """``||x_i - x_j||^2 / (2 s_i s_j)``."""
    x = np.atleast_2d(np.asarray(points, dtype=float))
    s = np.asarray(scales, dtype=float)
    if s.shape != (x.shape[0],) or np.any(s <= 0):
        raise ValueError("scales must be strictly positive, one per point")
    d = _sqdist(x) / (2.0 * np.outer(s, s))
    return 0.5 * (d + d.T)


def normalize_distances(d) -> np.ndarray:
    """Divide by the largest off-diagonal entry (no-op if that is 0)."""
    d = np.asarray(d, dtype=float)
    off = d[~np.eye(d.shape[0], dtype=bool)]
    top = off.max() if off.size else 0.0
    if top == 0:
        return d.copy()
    out = d / top
    # exact 1 at the maximiser regardless of rounding
    out[d == top] = 1.0
    return out


def intra_affinity(dist_norm, graph: NeighborhoodGraph) -> np.ndarray:
    """``exp(-D) * delta`` off the diagonal, unit diagonal."""
    d = np.asarray(dist_norm, dtype=float)
    if d.shape != graph.weights.shape:
        raise ValueError(f"shape mismatch {d.shape} vs graph {graph.weights.shape}")
    w = np.exp(-d) * graph.weights
    np.fill_diagonal(w, 1.0)
    return w


def inter_affinity(w11, w22, links: CorrespondenceSet) -> np.ndarray:
    """``W12[i, j] = max over links (a, b) of sqrt(w11[i, a] * w22[b, j])``."""
    if len(links) == 0:
        raise ValueError("inter_affinity needs at least one link")
    w11 = np.asarray(w11, dtype=float)
    w22 = np.asarray(w22, dtype=float)
    links.validate(w11.shape[0], w22.shape[0])
    best = np.zeros((w11.shape[0], w22.shape[0]))
    for a, b in links.pairs:
        np.maximum(best, np.outer(w11[:, a], w22[b, :]), out=best)
    # sqrt is monotone, so take it once after the max
    return np.sqrt(best)


def joint_dissimilarity(blocks: AffinityBlocks) -> np.ndarray:
    """``1 - [[W11, W12], [W12^T, W22]]`` with an exact zero diagonal."""
    w = np.block([[blocks.w11, blocks.w12], [blocks.w12.T, blocks.w22]])
    d = 1.0 - w
    d = 0.5 * (d + d.T)
    np.fill_diagonal(d, 0.0)
    return np.clip(d, 0.0, 1.0)


def modality_affinity(points, graph: NeighborhoodGraph, cfg: ScalingConfig) -> np.ndarray:
    """Scales, scaled distances, normalisation and masking for one modality."""
    d = scaled_distance_matrix(points, local_scales(points, cfg))
    return intra_affinity(normalize_distances(d), graph)


def build_blocks(x1, x2, g1, g2, links, cfg: ScalingConfig) -> AffinityBlocks:
    w11 = modality_affinity(x1, g1, cfg)
    w22 = modality_affinity(x2, g2, cfg)
    return AffinityBlocks(w11, w22, inter_affinity(w11, w22, links))
