"""Datasets, CSV I/O, the synthetic two-view circle generator and splitting."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np


class DataError(ValueError):
    pass


@dataclass
class ModalityDataset:
    """One modality: an ``n x m`` feature matrix plus optional annotations.

    Attributes
    ----------
    modality_id : str
    features : (n, m) float array
    labels : optional (n,) array of class ids (strings)
    compositions : optional (n, c) array of probability vectors
    """

    modality_id: str
    features: np.ndarray
    labels: Optional[np.ndarray] = None
    compositions: Optional[np.ndarray] = None

    def __post_init__(self):
        self.features = np.atleast_2d(np.asarray(self.features, dtype=float))
        n, m = self.features.shape
        if n < 1 or m < 1:
            raise DataError(f"{self.modality_id}: empty feature matrix {self.features.shape}")
        if not np.all(np.isfinite(self.features)):
            raise DataError(f"{self.modality_id}: non-finite feature entries")
        if self.labels is not None:
            self.labels = np.asarray(self.labels).astype(str)
            if self.labels.shape != (n,):
                raise DataError(f"{self.modality_id}: expected {n} labels, got {self.labels.shape}")
        if self.compositions is not None:
            c = np.atleast_2d(np.asarray(self.compositions, dtype=float))
            if c.shape[0] != n:
                raise DataError(f"{self.modality_id}: expected {n} composition rows")
            if np.any(c < 0) or np.any(c > 1):
                raise DataError(f"{self.modality_id}: composition entries outside [0, 1]")
            if np.any(np.abs(c.sum(axis=1) - 1.0) > 1e-9):
                raise DataError(f"{self.modality_id}: composition rows must sum to 1")
            self.compositions = c

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def m(self) -> int:
        return self.features.shape[1]

    def subset(self, idx) -> "ModalityDataset":
        idx = np.asarray(idx, dtype=int)
        return ModalityDataset(
            self.modality_id,
            self.features[idx],
            None if self.labels is None else self.labels[idx],
            None if self.compositions is None else self.compositions[idx],
        )


@dataclass
class CorrespondenceSet:
    """Known cross-modal pairs ``(index_in_modality1, index_in_modality2)``."""

    pairs: list

    def __post_init__(self):
        self.pairs = [(int(a), int(b)) for a, b in self.pairs]

    def __len__(self):
        return len(self.pairs)

    @property
    def idx1(self) -> np.ndarray:
        return np.array([a for a, _ in self.pairs], dtype=int)

    @property
    def idx2(self) -> np.ndarray:
        return np.array([b for _, b in self.pairs], dtype=int)

    def validate(self, n1: int, n2: int) -> None:
        if not 1 <= len(self.pairs) <= min(n1, n2):
            raise DataError(f"need 1..{min(n1, n2)} correspondences, got {len(self.pairs)}")
        a, b = self.idx1, self.idx2
        if a.min() < 0 or a.max() >= n1 or b.min() < 0 or b.max() >= n2:
            raise DataError("correspondence index out of range")
        if len(set(a.tolist())) != len(a) or len(set(b.tolist())) != len(b):
            raise DataError("an instance appears in more than one correspondence")


@dataclass
class SplitSpec:
    train_fraction: float = 0.8
    correspondence_fraction: float = 0.8
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.train_fraction < 1:
            raise DataError("train_fraction must lie in (0, 1)")
        if not 0 < self.correspondence_fraction <= 1:
            raise DataError("correspondence_fraction must lie in (0, 1]")


@dataclass
class SyntheticConfig:
    n_per_modality: int = 400
    latent_dim: int = 2
    ambient_dims: tuple = (10, 15)
    noise_std: float = 0.05
    n_classes: int = 4
    seed: int = 0

    def __post_init__(self):
        self.ambient_dims = tuple(int(d) for d in self.ambient_dims)
        if self.latent_dim < 2:
            raise DataError("latent_dim must be >= 2 (the latent manifold is a circle)")
        if self.latent_dim > min(self.ambient_dims):
            raise DataError("latent_dim must not exceed min(m1, m2)")
        if self.n_classes < 2:
            raise DataError("n_classes must be >= 2")
        if self.n_per_modality < self.n_classes:
            raise DataError("n_per_modality must be >= n_classes")
        if self.noise_std < 0:
            raise DataError("noise_std must be >= 0")


# ---------------------------------------------------------------------------
# CSV I/O


def _header_layout(header: Sequence[str]):
    n_feat = sum(1 for h in header if h.startswith("f"))
    n_comp = sum(1 for h in header if h.startswith("c"))
    return n_feat, n_comp, bool(header) and header[-1] == "label"


def load_dataset(
    path,
    has_labels: Optional[bool] = None,
    composition_cols: Optional[int] = None,
    modality_id: Optional[str] = None,
) -> ModalityDataset:
    """Parse a dataset CSV (features, then compositions, then label).

    ``has_labels`` / ``composition_cols`` left as ``None`` are inferred from
    the header. Errors cite 1-based file line numbers.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"no such dataset file: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DataError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    _, inferred_comp, inferred_label = _header_layout(header)
    if has_labels is None:
        has_labels = inferred_label
    if composition_cols is None:
        composition_cols = inferred_comp
    n_cols = len(header)
    n_feat = n_cols - composition_cols - int(has_labels)
    if n_feat < 1:
        raise DataError(f"{path}: header leaves no feature columns")

    feats, comps, labels = [], [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != n_cols:
            raise DataError(f"{path}: line {lineno}: expected {n_cols} columns, got {len(row)}")
        try:
            numeric = [float(v) for v in row[: n_feat + composition_cols]]
        except ValueError:
            raise DataError(f"{path}: line {lineno}: non-numeric value") from None
        if not all(math.isfinite(v) for v in numeric):
            raise DataError(f"{path}: line {lineno}: non-finite value")
        feats.append(numeric[:n_feat])
        if composition_cols:
            c = numeric[n_feat:]
            if abs(sum(c) - 1.0) > 1e-6 or min(c) < 0 or max(c) > 1:
                raise DataError(f"{path}: line {lineno}: composition does not sum to 1")
            comps.append(c)
        if has_labels:
            labels.append(row[-1].strip())
    if not feats:
        raise DataError(f"{path}: no data rows")

    compositions = None
    if composition_cols:
        compositions = np.array(comps)
        # rows pass the 1e-6 file tolerance; renormalise only those off the 1e-9 invariant
        sums = compositions.sum(axis=1, keepdims=True)
        off = np.abs(sums - 1.0) > 1e-9
        compositions = np.where(off, compositions / sums, compositions)
    return ModalityDataset(
        modality_id or path.stem,
        np.array(feats),
        np.array(labels) if has_labels else None,
        compositions,
    )


def save_dataset(ds: ModalityDataset, path) -> None:
    header = [f"f{j}" for j in range(ds.m)]
    if ds.compositions is not None:
        header += [f"c{j}" for j in range(ds.compositions.shape[1])]
    if ds.labels is not None:
        header.append("label")
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for i in range(ds.n):
            row = [repr(float(v)) for v in ds.features[i]]
            if ds.compositions is not None:
                row += [repr(float(v)) for v in ds.compositions[i]]
            if ds.labels is not None:
                row.append(str(ds.labels[i]))
            w.writerow(row)


def load_correspondences(path) -> CorrespondenceSet:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"no such correspondence file: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or [h.strip() for h in rows[0]] != ["idx1", "idx2"]:
        raise DataError(f"{path}: expected header 'idx1,idx2'")
    pairs = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != 2:
            raise DataError(f"{path}: line {lineno}: expected 2 columns")
        try:
            pairs.append((int(row[0]), int(row[1])))
        except ValueError:
            raise DataError(f"{path}: line {lineno}: non-integer index") from None
    return CorrespondenceSet(pairs)


def save_correspondences(c: CorrespondenceSet, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["idx1", "idx2"])
        w.writerows(c.pairs)


def save_matrix(a: np.ndarray, path) -> None:
    """Dense row-major CSV with 17 significant digits."""
    a = np.atleast_2d(np.asarray(a, dtype=float))
    np.savetxt(path, a, delimiter=",", fmt="%.17g")


def load_matrix(path) -> np.ndarray:
    return np.atleast_2d(np.loadtxt(path, delimiter=",", dtype=float, ndmin=2))


# ---------------------------------------------------------------------------
# synthetic data


def latent_angles(cfg: SyntheticConfig) -> np.ndarray:
    """The latent circle angles drawn for ``cfg`` (first draw of its stream)."""
    rng = np.random.default_rng(cfg.seed)
    return rng.uniform(0.0, 2 * np.pi, size=cfg.n_per_modality)


def generate_synthetic_pair(cfg: SyntheticConfig):
    """Two nonlinear views of points on a unit circle, fully corresponding.

    Labels are the angular sector index (quadrant for 4 classes). Each view is
    ``tanh(latent @ A_j) + noise`` with a fixed random linear map ``A_j``.
    """
    rng = np.random.default_rng(cfg.seed)
    theta = rng.uniform(0.0, 2 * np.pi, size=cfg.n_per_modality)
    latent = np.zeros((cfg.n_per_modality, cfg.latent_dim))
    latent[:, 0] = np.cos(theta)
    latent[:, 1] = np.sin(theta)
    sector = np.minimum((theta / (2 * np.pi / cfg.n_classes)).astype(int), cfg.n_classes - 1)
    labels = sector.astype(str)

    views = []
    for j, m in enumerate(cfg.ambient_dims, start=1):
        A = rng.standard_normal((cfg.latent_dim, m))
        x = np.tanh(latent @ A)
        if cfg.noise_std > 0:
            x = x + cfg.noise_std * rng.standard_normal(x.shape)
        views.append(ModalityDataset(f"modality{j}", x, labels.copy()))
    links = CorrespondenceSet([(i, i) for i in range(cfg.n_per_modality)])
    return views[0], views[1], links


# ---------------------------------------------------------------------------
# splitting


@dataclass
class Split:
    """Outcome of :func:`split_train_test`; index arrays refer to the inputs."""

    train1: ModalityDataset
    train2: ModalityDataset
    links: CorrespondenceSet
    test1: ModalityDataset
    test2: ModalityDataset
    train_idx1: np.ndarray = field(repr=False)
    train_idx2: np.ndarray = field(repr=False)
    test_idx1: np.ndarray = field(repr=False)
    test_idx2: np.ndarray = field(repr=False)


def _n_train(n: int, frac: float) -> int:
    return int(math.floor(n * frac + 0.5))


def split_train_test(
    d1: ModalityDataset, d2: ModalityDataset, c: CorrespondenceSet, spec: SplitSpec
) -> Split:
    """Seeded train/test split keeping corresponding pairs on one side.

    Within train, only the first ``ceil(correspondence_fraction * P)`` pairs of
    a seeded shuffle remain known links; the others stay in train as
    instances without correspondence.
    """
    c.validate(d1.n, d2.n)
    rng = np.random.default_rng(spec.seed)
    pairs = np.array(c.pairs, dtype=int)
    free1 = np.setdiff1d(np.arange(d1.n), pairs[:, 0])
    free2 = np.setdiff1d(np.arange(d2.n), pairs[:, 1])

    perm = rng.permutation(len(pairs))
    n_tr = _n_train(len(pairs), spec.train_fraction)
    train_pairs, test_pairs = pairs[perm[:n_tr]], pairs[perm[n_tr:]]
    f1 = rng.permutation(free1)
    f2 = rng.permutation(free2)
    k1, k2 = _n_train(len(f1), spec.train_fraction), _n_train(len(f2), spec.train_fraction)

    tr1 = np.sort(np.concatenate([train_pairs[:, 0], f1[:k1]]))
    tr2 = np.sort(np.concatenate([train_pairs[:, 1], f2[:k2]]))
    te1 = np.sort(np.concatenate([test_pairs[:, 0], f1[k1:]]))
    te2 = np.sort(np.concatenate([test_pairs[:, 1], f2[k2:]]))
    if len(tr1) < 2 or len(tr2) < 2:
        raise DataError("train side would receive fewer than 2 instances in a modality")

    n_keep = math.ceil(spec.correspondence_fraction * len(train_pairs) - 1e-9)
    kept = train_pairs[rng.permutation(len(train_pairs))[:n_keep]]
    pos1 = {g: i for i, g in enumerate(tr1.tolist())}
    pos2 = {g: i for i, g in enumerate(tr2.tolist())}
    links = CorrespondenceSet(sorted((pos1[a], pos2[b]) for a, b in kept.tolist()))
    return Split(
        d1.subset(tr1), d2.subset(tr2), links, d1.subset(te1), d2.subset(te2),
        tr1, tr2, te1, te2,
    )
