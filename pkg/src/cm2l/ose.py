"""Out-of-sample extension by local PCA followed by local Procrustes."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .embedding import fix_signs


class DegenerateTangentSpace(ValueError):
    pass


@dataclass
class OseConfig:
    k_ose: int = 20
    q: int = 2

    def __post_init__(self):
        if self.q < 1:
            raise ValueError("q must be >= 1")
        if self.k_ose < self.q + 1:
            raise ValueError(f"k_ose={self.k_ose} must be >= q + 1 = {self.q + 1}")


def procrustes_similarity(source, target):
    """Least-squares ``target ~ scale * source @ rotation + translation``.

    ``rotation`` ranges over the full orthogonal group (reflections allowed).

    Returns
    -------
    scale : float
    rotation : (q, q) array
    translation : (q,) array
    """
    a = np.atleast_2d(np.asarray(source, dtype=float))
    b = np.atleast_2d(np.asarray(target, dtype=float))
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    mu_a, mu_b = a.mean(axis=0), b.mean(axis=0)
    a0, b0 = a - mu_a, b - mu_b
    var = float(np.sum(a0 * a0))
    if var <= 1e-300:
        raise DegenerateTangentSpace("source has zero variance")
    u, sv, vt = np.linalg.svd(a0.T @ b0)
    rotation = u @ vt
    scale = float(sv.sum() / var)
    if scale <= 0:
        # target collapses to a point; any rotation is optimal
        scale, rotation = 1e-300, np.eye(a.shape[1])
    translation = mu_b - scale * mu_a @ rotation
    return scale, rotation, translation


def apply_similarity(x, scale, rotation, translation) -> np.ndarray:
    return scale * np.asarray(x) @ rotation + translation


def nearest(x_t: np.ndarray, train_x: np.ndarray, k: int) -> np.ndarray:
    """Indices of the k nearest rows, ties to the lowest index."""
    d = np.sum((train_x - x_t) ** 2, axis=1)
    return np.argsort(d, kind="stable")[:k]


def local_tangent(points: np.ndarray, q: int):
    """Centre, then top-q principal directions (m x q) with fixed signs."""
    centre = points.mean(axis=0)
    c = points - centre
    _, sv, vt = np.linalg.svd(c, full_matrices=False)
    if sv.size == 0 or sv[0] <= 1e-12 * max(1.0, np.abs(points).max()):
        raise DegenerateTangentSpace("degenerate tangent space")
    v = vt[:q].T
    if v.shape[1] < q:
        v = np.hstack([v, np.zeros((v.shape[0], q - v.shape[1]))])
    return centre, fix_signs(v)


def out_of_sample(x_t, train_x, train_z, cfg: OseConfig) -> np.ndarray:
    """Project an unseen point into the embedding through its neighbourhood.

    The ``k_ose`` nearest training points plus ``x_t`` define a local PCA
    frame; a similarity transform fitted from the neighbours' frame
    coordinates onto their embeddings is then applied to ``x_t``.
    """
    x_t = np.asarray(x_t, dtype=float).ravel()
    train_x = np.atleast_2d(np.asarray(train_x, dtype=float))
    train_z = np.atleast_2d(np.asarray(train_z, dtype=float))
    if train_x.shape[0] != train_z.shape[0]:
        raise ValueError("train_x and train_z must have matching rows")
    if x_t.shape[0] != train_x.shape[1]:
        raise ValueError(f"expected {train_x.shape[1]} features, got {x_t.shape[0]}")
    if cfg.k_ose > train_x.shape[0]:
        raise ValueError(f"k_ose={cfg.k_ose} exceeds {train_x.shape[0]} training points")
    q = train_z.shape[1]
    if q != cfg.q:
        raise ValueError(f"embedding has q={q}, config expects {cfg.q}")
    nb = nearest(x_t, train_x, cfg.k_ose)
    local = np.vstack([train_x[nb], x_t])
    centre, v = local_tangent(local, q)
    coords = (local - centre) @ v
    scale, rot, shift = procrustes_similarity(coords[:-1], train_z[nb])
    return apply_similarity(coords[-1], scale, rot, shift)


def out_of_sample_batch(xs, train_x, train_z, cfg: OseConfig) -> np.ndarray:
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    return np.vstack([out_of_sample(x, train_x, train_z, cfg) for x in xs])
