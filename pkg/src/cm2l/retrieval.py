"""Fitting the joint space end to end and cross-modal nearest-neighbour
retrieval inside it."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .affinity import ScalingConfig, build_blocks, joint_dissimilarity
from .data import CorrespondenceSet, load_matrix, save_matrix
from .embedding import (
    EmbedConfig,
    FeatureMaps,
    JointEmbedding,
    embed_instance_level,
    fit_feature_level,
    project_feature_level,
)
from .graph import PerturbationConfig, pmst
from .ose import OseConfig, out_of_sample_batch

FORMAT_VERSION = "cm2l-v1"


@dataclass
class FitConfig:
    """Every hyperparameter of one fit; defaults follow the published settings."""

    variant: str = "i"  # "i" instance level, "f" feature level
    t_p: int = 20
    r_p: float = 0.5
    k_noise: int = 5
    k_scale: int = 5
    eps_scale: float = 1e-12
    eigen_threshold: float = 1e-5
    q_max: Optional[int] = None
    ridge_mu: float = 1e-6
    k_ose: int = 20
    seed: int = 0

    def __post_init__(self):
        if self.variant not in ("i", "f"):
            raise ValueError(f"variant must be 'i' or 'f', got {self.variant!r}")

    def perturbation(self) -> PerturbationConfig:
        return PerturbationConfig(self.t_p, self.r_p, self.k_noise, self.seed)

    def scaling(self) -> ScalingConfig:
        return ScalingConfig(self.k_scale, self.eps_scale)

    def embed(self, q_cap: Optional[int]) -> EmbedConfig:
        return EmbedConfig(self.eigen_threshold, q_cap, self.ridge_mu)


@dataclass
class FittedModel:
    variant: str
    embedding: JointEmbedding
    train_x1: np.ndarray
    train_x2: np.ndarray
    ose_cfg: OseConfig
    maps: Optional[FeatureMaps] = None
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.embedding.z1.shape[0] != self.train_x1.shape[0]:
            raise ValueError("modality-1 embedding rows do not match training features")
        if self.embedding.z2.shape[0] != self.train_x2.shape[0]:
            raise ValueError("modality-2 embedding rows do not match training features")

    @property
    def q(self) -> int:
        return self.embedding.q

    def train_x(self, modality: int) -> np.ndarray:
        return self.train_x1 if modality == 1 else self.train_x2

    def target_embedding(self, modality: int) -> np.ndarray:
        return self.embedding.z(modality)

    def project(self, xs, source: int) -> np.ndarray:
        xs = np.atleast_2d(np.asarray(xs, dtype=float))
        return np.vstack([project_query(x, self, source) for x in xs])


@dataclass
class RankedResult:
    indices: np.ndarray
    distances: np.ndarray


def _q_cap(cfg: FitConfig, m1: int, m2: int) -> int:
    cap = min(m1, m2)
    if cfg.variant == "i":
        # OSE needs k_ose >= q + 1 anchors
        cap = min(cap, cfg.k_ose - 1)
    if cfg.q_max is not None:
        cap = min(cap, cfg.q_max)
    return cap


def joint_geometry(x1, x2, links: CorrespondenceSet, cfg: FitConfig, threads: int = 1):
    """pMST graphs, affinity blocks and the joint dissimilarity for one fit.

    Both modalities share the perturbation seed.
    """
    pert = cfg.perturbation()
    g1 = pmst(x1, pert, threads=threads)
    g2 = pmst(x2, pert, threads=threads)
    blocks = build_blocks(x1, x2, g1, g2, links, cfg.scaling())
    return blocks, joint_dissimilarity(blocks)


def fit_model(x1, x2, links: CorrespondenceSet, cfg: FitConfig = FitConfig(), threads: int = 1) -> FittedModel:
    x1 = np.atleast_2d(np.asarray(x1, dtype=float))
    x2 = np.atleast_2d(np.asarray(x2, dtype=float))
    links.validate(x1.shape[0], x2.shape[0])
    _, d = joint_geometry(x1, x2, links, cfg, threads)
    ecfg = cfg.embed(_q_cap(cfg, x1.shape[1], x2.shape[1]))
    maps = None
    if cfg.variant == "i":
        emb = embed_instance_level(d, x1.shape[0], ecfg)
    else:
        maps = fit_feature_level(x1, x2, d, ecfg)
        emb = JointEmbedding(x1 @ maps.alpha, x2 @ maps.beta, maps.eigenvalues)
    ose_cfg = OseConfig(min(cfg.k_ose, x1.shape[0], x2.shape[0]), emb.q)
    return FittedModel(cfg.variant, emb, x1, x2, ose_cfg, maps, {"config": asdict(cfg)})


def project_query(x_q, model: FittedModel, source_modality: int) -> np.ndarray:
    """Map one source-modality instance into the joint space."""
    if source_modality not in (1, 2):
        raise ValueError("source_modality must be 1 or 2")
    x_q = np.asarray(x_q, dtype=float).ravel()
    train_x = model.train_x(source_modality)
    if x_q.shape[0] != train_x.shape[1]:
        raise ValueError(f"query has {x_q.shape[0]} features, modality {source_modality} has {train_x.shape[1]}")
    if model.variant == "f":
        return project_feature_level(x_q, model.maps, source_modality)
    # a query identical to a fitted instance keeps its fitted coordinates
    same = np.flatnonzero(np.all(train_x == x_q, axis=1))
    if same.size:
        return model.target_embedding(source_modality)[same[0]].copy()
    return out_of_sample_batch(x_q, train_x, model.target_embedding(source_modality), model.ose_cfg)[0]


def knn(z_q, target_z, k: int) -> RankedResult:
    """The k nearest target rows by Euclidean distance, ties to lower index."""
    if k < 1:
        raise ValueError("k must be >= 1")
    target_z = np.atleast_2d(np.asarray(target_z, dtype=float))
    if target_z.shape[0] == 0:
        raise ValueError("empty target set")
    d = np.sqrt(np.sum((target_z - np.asarray(z_q, dtype=float).ravel()) ** 2, axis=1))
    order = np.argsort(d, kind="stable")[:k]
    return RankedResult(order, d[order])


def classify_by_retrieval(neighbor_labels, neighbor_distances):
    """Majority label; ties go to the class whose nearest member is closest."""
    labels = list(neighbor_labels)
    if not labels or len(labels) != len(neighbor_distances):
        raise ValueError("need equally many (>= 1) labels and distances")
    counts, closest = {}, {}
    for lab, dist in zip(labels, neighbor_distances):
        counts[lab] = counts.get(lab, 0) + 1
        closest[lab] = min(closest.get(lab, np.inf), dist)
    # python's max keeps the first maximal key; insertion order is rank order
    return max(counts, key=lambda lab: (counts[lab], -closest[lab]))


def retrieve(model: FittedModel, xs, source: int, k: int):
    """Project every row of ``xs`` and fetch its k nearest cross-modal
    training instances."""
    target = model.target_embedding(2 if source == 1 else 1)
    return [knn(z, target, k) for z in model.project(xs, source)]


# ---------------------------------------------------------------------------
# model archive


def save_model(model: FittedModel, directory) -> Path:
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    meta = {
        "format_version": FORMAT_VERSION,
        "variant": model.variant,
        "n1": int(model.train_x1.shape[0]),
        "n2": int(model.train_x2.shape[0]),
        "q": model.q,
        "eigenvalues": [float(v) for v in model.embedding.eigenvalues],
        "k_ose": model.ose_cfg.k_ose,
        "config": model.provenance.get("config", {}),
        "seed": model.provenance.get("config", {}).get("seed"),
        "provenance": model.provenance,
    }
    (out / "meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    save_matrix(model.embedding.z1, out / "z1.csv")
    save_matrix(model.embedding.z2, out / "z2.csv")
    save_matrix(model.train_x1, out / "x1.csv")
    save_matrix(model.train_x2, out / "x2.csv")
    if model.maps is not None:
        save_matrix(model.maps.alpha, out / "alpha.csv")
        save_matrix(model.maps.beta, out / "beta.csv")
    return out


def load_model(directory) -> FittedModel:
    src = Path(directory)
    meta_path = src / "meta.json"
    if not meta_path.is_file():
        raise FileNotFoundError(f"no model archive at {src} (missing meta.json)")
    meta = json.loads(meta_path.read_text())
    if meta.get("format_version") != FORMAT_VERSION:
        raise ValueError(f"unsupported model format {meta.get('format_version')!r}")
    eig = np.array(meta["eigenvalues"], dtype=float)
    emb = JointEmbedding(load_matrix(src / "z1.csv"), load_matrix(src / "z2.csv"), eig)
    maps = None
    if meta["variant"] == "f":
        maps = FeatureMaps(load_matrix(src / "alpha.csv"), load_matrix(src / "beta.csv"), eig)
    return FittedModel(
        meta["variant"],
        emb,
        load_matrix(src / "x1.csv"),
        load_matrix(src / "x2.csv"),
        OseConfig(meta["k_ose"], meta["q"]),
        maps,
        meta.get("provenance", {}),
    )
