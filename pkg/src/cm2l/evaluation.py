"""Retrieval protocol: accuracy/alogRMSD versus scope, repeated seeded
splits, and the CCA and Procrustes-alignment baselines."""

from __future__ import annotations

import csv
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .data import CorrespondenceSet, ModalityDataset, SplitSpec, split_train_test
from .embedding import fix_signs
from .ose import procrustes_similarity
from .retrieval import FitConfig, _q_cap, classify_by_retrieval, fit_model, knn

METHODS = ("cm2l-i", "cm2l-f", "cca", "pa")
ALOGRMSD_FLOOR = 1e-12


@dataclass
class BaselineConfig:
    cca_corr_threshold: float = 0.1
    cca_ridge: float = 1e-6
    pa_dim: Optional[int] = None

    def __post_init__(self):
        if not 0 < self.cca_corr_threshold < 1:
            raise ValueError("cca_corr_threshold must lie in (0, 1)")


@dataclass
class ScopeCurve:
    ks: list
    values: list
    per_repeat_values: np.ndarray

    @property
    def repeats(self) -> int:
        return self.per_repeat_values.shape[0]

    @property
    def std(self) -> list:
        return self.per_repeat_values.std(axis=0).tolist()


# ---------------------------------------------------------------------------
# baselines


class LinearProjectionModel:
    """Affine maps ``(x - mean_j) @ W_j + offset_j`` into a shared space."""

    def __init__(self, means, maps, train_x1, train_x2, offsets=None, correlations=None):
        self.means = means
        self.maps = maps
        self.offsets = offsets or {1: 0.0, 2: 0.0}
        self.correlations = correlations
        self._targets = {1: self.project(train_x1, 1), 2: self.project(train_x2, 2)}

    @property
    def q(self) -> int:
        return self.maps[1].shape[1]

    def project(self, xs, source: int) -> np.ndarray:
        xs = np.atleast_2d(np.asarray(xs, dtype=float))
        w = self.maps[source]
        if xs.shape[1] != w.shape[0]:
            raise ValueError(f"expected {w.shape[0]} features, got {xs.shape[1]}")
        return (xs - self.means[source]) @ w + self.offsets[source]

    def target_embedding(self, modality: int) -> np.ndarray:
        return self._targets[modality]


def _inv_sqrt(c: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh(c)
    if vals.min() <= 0:
        raise np.linalg.LinAlgError("covariance is not positive definite; increase the ridge")
    return (vecs / np.sqrt(vals)) @ vecs.T


def cca_directions(a: np.ndarray, b: np.ndarray, ridge: float = 1e-6):
    """Canonical directions of paired samples, correlations non-increasing.

    Returns ``(mean_a, mean_b, W_a, W_b, correlations)``.
    """
    mu_a, mu_b = a.mean(axis=0), b.mean(axis=0)
    a0, b0 = a - mu_a, b - mu_b
    n = a.shape[0]
    caa = a0.T @ a0 / (n - 1) + ridge * np.eye(a.shape[1])
    cbb = b0.T @ b0 / (n - 1) + ridge * np.eye(b.shape[1])
    cab = a0.T @ b0 / (n - 1)
    ia, ib = _inv_sqrt(caa), _inv_sqrt(cbb)
    u, corr, vt = np.linalg.svd(ia @ cab @ ib, full_matrices=False)
    return mu_a, mu_b, ia @ u, ib @ vt.T, np.clip(corr, 0.0, 1.0)


def fit_cca_baseline(x1, x2, links: CorrespondenceSet, cfg: BaselineConfig = BaselineConfig()):
    """CCA on the linked pairs; keep components correlating above threshold."""
    x1 = np.atleast_2d(np.asarray(x1, dtype=float))
    x2 = np.atleast_2d(np.asarray(x2, dtype=float))
    links.validate(x1.shape[0], x2.shape[0])
    if len(links) < 2:
        raise ValueError("CCA needs at least 2 linked pairs")
    mu1, mu2, w1, w2, corr = cca_directions(x1[links.idx1], x2[links.idx2], cfg.cca_ridge)
    keep = corr > cfg.cca_corr_threshold
    if not keep.any():
        raise ValueError(f"no canonical correlation exceeds {cfg.cca_corr_threshold}")
    return LinearProjectionModel(
        {1: mu1, 2: mu2}, {1: w1[:, keep], 2: w2[:, keep]}, x1, x2, correlations=corr[keep]
    )


def _pca(x: np.ndarray, dim: int):
    mu = x.mean(axis=0)
    _, _, vt = np.linalg.svd(x - mu, full_matrices=False)
    return mu, fix_signs(vt[:dim].T)


def fit_pa_baseline(x1, x2, links: CorrespondenceSet, cfg: BaselineConfig = BaselineConfig()):
    """PCA each modality to ``pa_dim``, then a similarity Procrustes map from
    modality-1 link coordinates onto modality-2 link coordinates.

    The common space is modality 2's PCA frame. ``model.transform`` holds the
    recovered ``(scale, rotation, translation)``.
    """
    x1 = np.atleast_2d(np.asarray(x1, dtype=float))
    x2 = np.atleast_2d(np.asarray(x2, dtype=float))
    links.validate(x1.shape[0], x2.shape[0])
    dim = cfg.pa_dim if cfg.pa_dim is not None else min(x1.shape[1], x2.shape[1])
    if not 1 <= dim <= min(x1.shape[1], x2.shape[1]):
        raise ValueError(f"pa_dim={dim} must lie in [1, min(m1, m2)]")
    if len(links) < dim + 1:
        raise ValueError(f"PA needs at least pa_dim + 1 = {dim + 1} links, got {len(links)}")
    mu1, p1 = _pca(x1, dim)
    mu2, p2 = _pca(x2, dim)
    s, r, t = procrustes_similarity((x1[links.idx1] - mu1) @ p1, (x2[links.idx2] - mu2) @ p2)
    model = LinearProjectionModel(
        {1: mu1, 2: mu2}, {1: s * p1 @ r, 2: p2}, x1, x2, offsets={1: t, 2: np.zeros(dim)}
    )
    model.transform = (s, r, t)
    return model


# ---------------------------------------------------------------------------
# metrics


def _neighbours(model, queries: np.ndarray, source: int, kmax: int):
    target = model.target_embedding(2 if source == 1 else 1)
    return [knn(z, target, kmax) for z in model.project(queries, source)]


def accuracy_scope(model, queries: ModalityDataset, targets: ModalityDataset, ks, source: int = 1) -> ScopeCurve:
    """Top-k majority-vote accuracy for each k in ``ks``.

    ``queries`` are test instances of the source modality; ``targets`` are the
    training instances of the other modality whose labels vote.
    """
    ks = [int(k) for k in ks]
    if not ks or min(ks) < 1:
        raise ValueError("ks must be positive")
    if queries.labels is None or targets.labels is None:
        raise ValueError("accuracy needs labels on queries and targets")
    results = _neighbours(model, queries.features, source, max(ks))
    values = []
    for k in ks:
        hits = 0
        for res, truth in zip(results, queries.labels):
            idx = res.indices[:k]
            hits += classify_by_retrieval(targets.labels[idx], res.distances[:k]) == truth
        values.append(hits / queries.n)
    return ScopeCurve(ks, values, np.array([values]))


def alogrmsd(query_compositions, retrieved_compositions) -> float:
    """``-ln`` of the mean over queries of the RMS composition deviation
    across each query's retrieved neighbours (floored at 1e-12)."""
    cq = np.atleast_2d(np.asarray(query_compositions, dtype=float))
    cr = np.asarray(retrieved_compositions, dtype=float)
    if cr.ndim != 3 or cr.shape[0] != cq.shape[0] or cr.shape[2] != cq.shape[1]:
        raise ValueError("retrieved compositions must be n_t x k x c")
    if cr.shape[1] == 0:
        raise ValueError("k must be >= 1")
    sq = np.sum((cr - cq[:, None, :]) ** 2, axis=2)
    rmsd = np.sqrt(sq.mean(axis=1))
    return float(-np.log(max(rmsd.mean(), ALOGRMSD_FLOOR)))


def alogrmsd_scope(model, queries: ModalityDataset, targets: ModalityDataset, ks, source: int = 1) -> ScopeCurve:
    ks = [int(k) for k in ks]
    if not ks or min(ks) < 1:
        raise ValueError("ks must be positive")
    if queries.compositions is None or targets.compositions is None:
        raise ValueError("alogrmsd needs composition columns on both modalities")
    results = _neighbours(model, queries.features, source, max(ks))
    idx = np.array([r.indices for r in results])
    values = [alogrmsd(queries.compositions, targets.compositions[idx[:, :k]]) for k in ks]
    return ScopeCurve(ks, values, np.array([values]))


# ---------------------------------------------------------------------------
# protocol


def repeat_seed(seed: int, r: int) -> int:
    return int(np.random.SeedSequence([int(seed), int(r)]).generate_state(1, np.uint64)[0])


def fit_method(name: str, train1, train2, links, fit_cfg: FitConfig, base_cfg: BaselineConfig):
    if name == "cm2l-i":
        return fit_model(train1.features, train2.features, links, replace(fit_cfg, variant="i"))
    if name == "cm2l-f":
        return fit_model(train1.features, train2.features, links, replace(fit_cfg, variant="f"))
    if name == "cca":
        return fit_cca_baseline(train1.features, train2.features, links, base_cfg)
    if name == "pa":
        if base_cfg.pa_dim is None:
            # dimension-matched to the joint embedding's cap
            fit_v = replace(fit_cfg, variant="i")
            dim = _q_cap(fit_v, train1.m, train2.m)
            dim = min(dim, len(links) - 1)
            base_cfg = replace(base_cfg, pa_dim=max(dim, 1))
        return fit_pa_baseline(train1.features, train2.features, links, base_cfg)
    raise ValueError(f"unknown method {name!r}; choose from {', '.join(METHODS)}")


def _one_repeat(r, d1, d2, c, methods, spec, ks, metric, source, fit_cfg, base_cfg):
    seed_r = repeat_seed(spec.seed, r)
    sp = split_train_test(d1, d2, c, replace(spec, seed=seed_r))
    cfg_r = replace(fit_cfg, seed=seed_r)
    if source == 1:
        queries, targets = sp.test1, sp.train2
    else:
        queries, targets = sp.test2, sp.train1
    score = accuracy_scope if metric == "accuracy" else alogrmsd_scope
    out = {}
    for name in methods:
        model = fit_method(name, sp.train1, sp.train2, sp.links, cfg_r, base_cfg)
        out[name] = score(model, queries, targets, ks, source).values
    return out


def run_protocol(
    d1: ModalityDataset,
    d2: ModalityDataset,
    c: CorrespondenceSet,
    methods: Sequence[str],
    spec: SplitSpec,
    repeats: int = 10,
    ks=(1, 5, 10),
    metric: str = "accuracy",
    source: int = 1,
    fit_cfg: FitConfig = FitConfig(),
    base_cfg: BaselineConfig = BaselineConfig(),
    threads: int = 1,
) -> dict:
    """Repeated split / fit / evaluate; one :class:`ScopeCurve` per method.

    Repeat ``r`` draws everything from ``repeat_seed(spec.seed, r)``, so the
    result does not depend on ``threads``.
    """
    if metric not in ("accuracy", "alogrmsd"):
        raise ValueError(f"unknown metric {metric!r}")
    for name in methods:
        if name not in METHODS:
            raise ValueError(f"unknown method {name!r}; choose from {', '.join(METHODS)}")
    if metric == "accuracy" and (d1.labels is None or d2.labels is None):
        raise ValueError("accuracy metric needs labels in both datasets")
    if metric == "alogrmsd" and (d1.compositions is None or d2.compositions is None):
        raise ValueError("alogrmsd metric needs composition columns in both datasets")
    ks = [int(k) for k in ks]

    def job(r):
        return _one_repeat(r, d1, d2, c, methods, spec, ks, metric, source, fit_cfg, base_cfg)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            per_repeat = list(ex.map(job, range(repeats)))
    else:
        per_repeat = [job(r) for r in range(repeats)]

    curves = {}
    for name in methods:
        vals = np.array([rep[name] for rep in per_repeat])
        curves[name] = ScopeCurve(ks, vals.mean(axis=0).tolist(), vals)
    return curves


def write_curves(curves: dict, path, direction: str, correspondence_fraction: float, metric: str) -> None:
    """``method,direction,correspondence_fraction,k,metric,mean,std,r0..``"""
    repeats = max(c.repeats for c in curves.values())
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(
            ["method", "direction", "correspondence_fraction", "k", "metric", "mean", "std"]
            + [f"r{i}" for i in range(repeats)]
        )
        for name, curve in curves.items():
            std = curve.std
            for j, k in enumerate(curve.ks):
                w.writerow(
                    [name, direction, repr(float(correspondence_fraction)), k, metric,
                     repr(float(curve.values[j])), repr(float(std[j]))]
                    + [repr(float(v)) for v in curve.per_repeat_values[:, j]]
                )


def write_summary(curves: dict, path, config: dict) -> None:
    summary = {
        "config": config,
        "alogrmsd_floor": ALOGRMSD_FLOOR,
        "curves": {
            name: {"ks": c.ks, "mean": c.values, "std": c.std, "repeats": c.repeats}
            for name, c in curves.items()
        },
    }
    Path(path).write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")


def config_snapshot(fit_cfg: FitConfig, base_cfg: BaselineConfig, spec: SplitSpec) -> dict:
    return {"fit": asdict(fit_cfg), "baseline": asdict(base_cfg), "split": asdict(spec)}
