"""Joint spectral embedding (instance level) and linear feature-level maps."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.linalg import LinAlgError, block_diag, eigh


class DegenerateGeometry(ValueError):
    pass


@dataclass
class EmbedConfig:
    eigen_threshold: float = 1e-5
    q_max: Optional[int] = None
    ridge_mu: float = 1e-6

    def __post_init__(self):
        if self.eigen_threshold <= 0:
            raise ValueError("eigen_threshold must be > 0")
        if self.q_max is not None and self.q_max < 1:
            raise ValueError("q_max must be >= 1")
        if self.ridge_mu < 0:
            raise ValueError("ridge_mu must be >= 0")


@dataclass
class JointEmbedding:
    z1: np.ndarray
    z2: np.ndarray
    eigenvalues: np.ndarray

    @property
    def q(self) -> int:
        return self.z1.shape[1]

    def z(self, modality: int) -> np.ndarray:
        return self.z1 if modality == 1 else self.z2


@dataclass
class FeatureMaps:
    alpha: np.ndarray
    beta: np.ndarray
    eigenvalues: np.ndarray

    @property
    def q(self) -> int:
        return self.alpha.shape[1]


def tau(d) -> np.ndarray:
    """Double-centred squared dissimilarities, ``-H S H / 2``."""
    d = np.asarray(d, dtype=float)
    s = d * d
    # H S H without forming H: subtract row and column means, add grand mean
    row = s.mean(axis=1, keepdims=True)
    col = s.mean(axis=0, keepdims=True)
    t = -0.5 * (s - row - col + s.mean())
    return 0.5 * (t + t.T)


def fix_signs(vecs: np.ndarray) -> np.ndarray:
    """Flip each column so its largest-magnitude entry is positive."""
    idx = np.argmax(np.abs(vecs), axis=0)
    signs = np.sign(vecs[idx, np.arange(vecs.shape[1])])
    signs[signs == 0] = 1.0
    return vecs * signs


def _select(vals: np.ndarray, cfg: EmbedConfig) -> np.ndarray:
    order = np.argsort(-vals, kind="stable")
    keep = order[vals[order] > cfg.eigen_threshold]
    if cfg.q_max is not None:
        keep = keep[: cfg.q_max]
    if keep.size == 0:
        raise DegenerateGeometry("degenerate geometry: no eigenvalue above threshold")
    return keep


def embed_instance_level(d, n1: int, cfg: EmbedConfig = EmbedConfig()) -> JointEmbedding:
    """Rank-q minimiser of ``||tau(D) - Z Z^T||_F`` via eigendecomposition.

    Only eigenvalues above ``cfg.eigen_threshold`` are kept (negative ones of a
    non-Euclidean ``D`` are discarded), capped at ``cfg.q_max``. Rows
    ``[:n1]`` are modality 1, the rest modality 2.
    """
    d = np.asarray(d, dtype=float)
    if not 0 < n1 < d.shape[0]:
        raise ValueError(f"n1={n1} must split a {d.shape[0]}-point problem")
    vals, vecs = np.linalg.eigh(tau(d))
    keep = _select(vals, cfg)
    lam = vals[keep]
    z = fix_signs(vecs[:, keep]) * np.sqrt(lam)
    return JointEmbedding(z[:n1].copy(), z[n1:].copy(), lam)


def feature_level_problem(x1, x2, d, ridge_mu: float):
    """The pair ``(A, B)`` of ``A g = lam B g`` with
    ``A = V tau(D) V^T`` and ``B = V V^T + mu I``, ``V = blockdiag(X1^T, X2^T)``."""
    v = block_diag(np.asarray(x1, dtype=float).T, np.asarray(x2, dtype=float).T)
    a = v @ tau(d) @ v.T
    b = v @ v.T + ridge_mu * np.eye(v.shape[0])
    return 0.5 * (a + a.T), 0.5 * (b + b.T)


def fit_feature_level(x1, x2, d, cfg: EmbedConfig = EmbedConfig()) -> FeatureMaps:
    """Linear maps ``alpha`` (m1 x q), ``beta`` (m2 x q) from the symmetric
    generalised eigenproblem, top-q eigenvalues above threshold."""
    x1 = np.atleast_2d(np.asarray(x1, dtype=float))
    x2 = np.atleast_2d(np.asarray(x2, dtype=float))
    d = np.asarray(d, dtype=float)
    if d.shape[0] != x1.shape[0] + x2.shape[0]:
        raise ValueError("dissimilarity size must equal n1 + n2")
    if not (np.all(np.isfinite(x1)) and np.all(np.isfinite(x2))):
        raise ValueError("feature matrices must be finite")
    a, b = feature_level_problem(x1, x2, d, cfg.ridge_mu)
    try:
        vals, vecs = eigh(a, b)
    except LinAlgError as exc:
        raise DegenerateGeometry(f"B is numerically singular: {exc}") from None
    keep = _select(vals, cfg)
    gamma = fix_signs(vecs[:, keep])
    m1 = x1.shape[1]
    return FeatureMaps(gamma[:m1].copy(), gamma[m1:].copy(), vals[keep])


def project_feature_level(x, maps: FeatureMaps, which_modality: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    w = maps.alpha if which_modality == 1 else maps.beta
    if which_modality not in (1, 2):
        raise ValueError("which_modality must be 1 or 2")
    if x.shape[-1] != w.shape[0]:
        raise ValueError(f"expected {w.shape[0]} features, got {x.shape[-1]}")
    return x @ w


def strain(t: np.ndarray, z: np.ndarray) -> float:
    """Frobenius objective ``||tau - Z Z^T||``."""
    return float(np.linalg.norm(t - z @ z.T))
