"""Subspace (SIMCA-style) classification over HOSVD class models, and the
FTD-driven domain-transfer variant.

For every class the normalized training samples are stacked along a new first
mode and decomposed by HOSVD. The basis of a class is the set of orthonormal
arrays ``D_1, D_2, ...`` spanning the dominant part of that stack; a sample
``y`` (normalized) is assigned to the class with the smallest residual
``1 - sum_nu <y, D_nu>^2``.

With the FTD variant each class stack is first fitted by a functional Tucker
model on the training grid. The class tensor is then re-evaluated on whatever
grid the test data lives on and the bases are rebuilt from that
reconstruction, so training and test domains do not need to coincide.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence

import numpy as np

from . import ftd
from . import kernel as kern
from .linalg import truncated_svd
from .tensor import multi_mode_product, unfold
from .tucker import hosvd


def _workers() -> int:
    try:
        return max(1, int(os.environ.get("FTUCKER_THREADS", "1")))
    except ValueError:
        return 1


def _map(fn, items):
    items = list(items)
    n = min(_workers(), len(items))
    if n <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


@dataclass
class LabeledDataset:
    samples: List[np.ndarray]
    labels: List[int]
    grid: np.ndarray
    label_names: Optional[List[str]] = None

    def __post_init__(self):
        if len(self.samples) == 0:
            raise ValueError("dataset has no samples")
        if len(self.samples) != len(self.labels):
            raise ValueError("samples and labels differ in length")
        self.samples = [np.asarray(s, dtype=np.float64) for s in self.samples]
        self.labels = [int(c) for c in self.labels]
        self.grid = kern.as_grid(self.grid)
        shape = self.samples[0].shape
        for s in self.samples:
            if s.shape != shape:
                raise ValueError(f"sample shapes differ: {s.shape} vs {shape}")
        if shape[-1] != self.grid.size:
            raise ValueError(
                f"last sample extent {shape[-1]} does not match {self.grid.size} grid points"
            )

    @property
    def sample_shape(self):
        return self.samples[0].shape

    @property
    def classes(self) -> List[int]:
        return sorted(set(self.labels))

    @property
    def num_classes(self) -> int:
        if self.label_names is not None:
            return len(self.label_names)
        return max(self.labels) + 1

    def __len__(self):
        return len(self.samples)

    def select(self, indices) -> "LabeledDataset":
        return LabeledDataset(
            samples=[self.samples[i] for i in indices],
            labels=[self.labels[i] for i in indices],
            grid=self.grid,
            label_names=self.label_names,
        )

    def class_tensor(self, label: int, normalize: bool = True) -> np.ndarray:
        """Samples of one class stacked along a new first mode."""
        members = [s for s, c in zip(self.samples, self.labels) if c == label]
        if not members:
            raise ValueError(f"class {label} has no samples")
        if normalize:
            members = [normalized(s) for s in members]
        return np.stack(members, axis=0)


def normalized(y) -> np.ndarray:
    y = np.asarray(y, dtype=np.float64)
    n = np.linalg.norm(y.ravel())
    if n == 0:
        raise ValueError("cannot normalize a zero sample")
    return y / n


@dataclass
class ClassBasis:
    """Orthonormal basis arrays of one class, most dominant first."""

    label: int
    elements: np.ndarray  # shape (k_max, *sample_shape)
    weights: np.ndarray = field(default=None)  # singular values, informational

    def __post_init__(self):
        if self.elements.shape[0] < 1:
            raise ValueError("a class basis needs at least one element")

    @property
    def k_max(self) -> int:
        return self.elements.shape[0]

    @property
    def sample_shape(self):
        return self.elements.shape[1:]

    def matrix(self, k: Optional[int] = None) -> np.ndarray:
        k = self.k_max if k is None else k
        if not 1 <= k <= self.k_max:
            raise ValueError(f"k={k} out of range for a basis with {self.k_max} elements")
        return self.elements[:k].reshape(k, -1)


def basis_from_stack(stack, ranks: Sequence[int], label: int = 0) -> ClassBasis:
    """Class basis from a tensor of stacked (normalized) samples.

    HOSVD with the sample mode untruncated and ``ranks`` on the remaining
    modes gives ``D = G x_1 B x_2 C ...``, whose mode-0 slices span the class
    subspace. The sample-mode factor is rotated to the singular vectors of
    ``D_(0)`` so that the slices are mutually orthogonal and sorted by
    dominance; their normalized versions form the basis.
    """
    stack = np.asarray(stack, dtype=np.float64)
    ranks = [int(r) for r in ranks]
    if len(ranks) != stack.ndim - 1:
        raise ValueError(f"expected {stack.ndim - 1} ranks, got {len(ranks)}")
    m = stack.shape[0]
    dec = hosvd(stack, [m] + ranks)
    d = multi_mode_product(dec.core, [None] + dec.factors[1:])
    d0 = unfold(d, 0)
    r = min(d0.shape)
    svd = truncated_svd(d0, r)
    keep = svd.s > svd.s[0] * 1e-12 if svd.s[0] > 0 else np.zeros(r, bool)
    keep[0] = True
    vt = svd.vt[keep]
    # rows of vt are the unit-norm slices sigma_nu^{-1} * (rotated D)_nu, reshaped
    sample_shape = stack.shape[1:]
    elements = np.stack([np.reshape(v, sample_shape, order="F") for v in vt])
    return ClassBasis(label=label, elements=elements, weights=svd.s[keep])


def _check_k(data: LabeledDataset, k: Optional[int]) -> None:
    if k is None:
        return
    counts = {c: data.labels.count(c) for c in data.classes}
    for c, n in counts.items():
        if k >= n:
            raise ValueError(f"k={k} must be smaller than the {n} training samples of class {c}")
    if k < 1:
        raise ValueError("k must be >= 1")


def train_hosvd(data: LabeledDataset, ranks: Sequence[int], k: Optional[int] = None) -> List[ClassBasis]:
    """Per-class bases from the HOSVD of the stacked training samples.

    ``ranks`` are the truncation ranks of the non-sample modes. When ``k`` is
    given it is validated against the class sizes; bases keep every available
    element so that predictions can be made for several ``k`` afterwards.
    """
    _check_k(data, k)
    return _map(lambda c: basis_from_stack(data.class_tensor(c), ranks, c), data.classes)


def residual(y, basis: ClassBasis, k: Optional[int] = None, tol: float = 1e-6) -> float:
    """``1 - sum_nu <y, D_nu>^2`` for a unit-norm sample ``y``."""
    y = np.asarray(y, dtype=np.float64)
    if y.shape != basis.sample_shape:
        raise ValueError(f"sample shape {y.shape} does not match basis {basis.sample_shape}")
    if abs(np.linalg.norm(y.ravel()) - 1.0) > tol:
        raise ValueError("residual expects a unit-norm sample")
    coef = basis.matrix(k) @ y.reshape(-1)
    return float(1.0 - coef @ coef)


def residuals(samples, bases: Sequence[ClassBasis], k: Optional[int] = None) -> np.ndarray:
    """Residual matrix ``(n_samples, n_classes)``; samples are normalized here."""
    y = np.stack([normalized(s).reshape(-1) for s in samples])
    out = np.empty((y.shape[0], len(bases)))
    for j, b in enumerate(bases):
        # a basis may hold fewer elements than k when the class stack is rank deficient
        coef = y @ b.matrix(None if k is None else min(k, b.k_max)).T
        out[:, j] = 1.0 - np.sum(coef * coef, axis=1)
    return out


def predict_many(samples, bases: Sequence[ClassBasis], k: Optional[int] = None) -> np.ndarray:
    """Label with the smallest residual for every sample; ties go to the
    smallest label."""
    bases = sorted(bases, key=lambda b: b.label)
    labels = np.array([b.label for b in bases])
    return labels[np.argmin(residuals(samples, bases, k), axis=1)]


def predict(y, bases: Sequence[ClassBasis], k: Optional[int] = None) -> int:
    if not bases:
        raise ValueError("no class bases given")
    return int(predict_many([y], bases, k)[0])


def train_ftd(data: LabeledDataset, cfg: ftd.FtdConfig, sample_rank: Optional[int] = None) -> Dict[int, ftd.FtdModel]:
    """One functional Tucker model per class, fitted on ``data.grid``.

    ``cfg.ranks`` are the ranks of the non-sample modes (continuous rank
    last). The sample-mode rank defaults to the class size, capped at the
    product of the other ranks.
    """
    if len(cfg.ranks) != len(data.sample_shape):
        raise ValueError(
            f"expected {len(data.sample_shape)} non-sample ranks, got {len(cfg.ranks)}"
        )
    cap = int(np.prod(cfg.ranks))

    def fit_one(c):
        stack = data.class_tensor(c)
        r0 = min(stack.shape[0], cap) if sample_rank is None else int(sample_rank)
        return c, ftd.fit(stack, replace(cfg, ranks=(r0,) + tuple(cfg.ranks)), data.grid)

    return dict(_map(fit_one, data.classes))


def transfer_bases(models: Dict[int, ftd.FtdModel], new_grid, ranks: Sequence[int]) -> List[ClassBasis]:
    """Rebuild class bases on ``new_grid`` from fitted FTD models."""
    new_grid = kern.as_grid(new_grid)

    def one(item):
        c, model = item
        rec = ftd.reconstruct_on(model, new_grid)
        stack = np.stack([normalized(s) for s in rec])
        return basis_from_stack(stack, ranks, c)

    return _map(one, sorted(models.items()))


def stratified_folds(labels, folds: int, seed: int = 0) -> np.ndarray:
    """Fold id for every sample; each class is shuffled and dealt round-robin."""
    labels = np.asarray(labels)
    if folds < 2:
        raise ValueError("need at least 2 folds")
    rng = np.random.default_rng(seed)
    assignment = np.empty(labels.size, dtype=int)
    for c in np.unique(labels):
        members = np.flatnonzero(labels == c)
        if members.size < folds:
            raise ValueError(f"class {c} has {members.size} samples, fewer than {folds} folds")
        members = rng.permutation(members)
        assignment[members] = np.arange(members.size) % folds
    return assignment


def cross_validate(data: LabeledDataset, rank_grid, k_values, folds: int = 5, seed: int = 0) -> np.ndarray:
    """Mean HOSVD-classification accuracy over stratified folds.

    Returns an array of shape ``(len(rank_grid), len(k_values))``.
    """
    from .metrics import accuracy

    k_values = [int(k) for k in k_values]
    rank_grid = [tuple(int(r) for r in ranks) for ranks in rank_grid]
    fold_of = stratified_folds(data.labels, folds, seed)
    scores = np.zeros((len(rank_grid), len(k_values)))
    for f in range(folds):
        train = data.select(np.flatnonzero(fold_of != f))
        val = data.select(np.flatnonzero(fold_of == f))
        _check_k(train, max(k_values))
        for i, ranks in enumerate(rank_grid):
            bases = train_hosvd(train, ranks)
            for j, k in enumerate(k_values):
                scores[i, j] += accuracy(val.labels, predict_many(val.samples, bases, k))
    return scores / folds
