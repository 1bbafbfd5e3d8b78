"""Seeded data generators.

``synth_digit_dataset`` builds the semi-synthetic "digits with a continuous
mode" data: every class has a 2-D template image and two smooth curves; each
sample's lower half is multiplied (outer product) with one curve and its upper
half with the other, so a noiseless sample has continuous-mode rank 2.
Templates are seeded random blob images rather than scanned digits.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np
from scipy.interpolate import CubicSpline

from . import kernel as kern
from .classify import LabeledDataset
from .ftd import FtdModel, _reconstruct


@dataclass(frozen=True)
class SynthConfig:
    num_classes: int = 10
    samples_per_class: int = 48
    image_size: Tuple[int, int] = (16, 16)
    p: int = 50
    knot_count: int = 10
    value_range: Tuple[float, float] = (1.0, 10.0)
    noise_std: float = 0.05
    seed: int = 0
    grid_range: Tuple[float, float] = (1.0, 10.0)
    bumps: int = 3

    def __post_init__(self):
        if self.num_classes < 1 or self.samples_per_class < 1 or self.p < 1:
            raise ValueError("num_classes, samples_per_class and p must be positive")
        if min(self.image_size) < 2:
            raise ValueError("images need at least 2 rows and columns")
        if self.knot_count < 4:
            raise ValueError("knot_count must be >= 4")
        if not self.value_range[0] < self.value_range[1]:
            raise ValueError("value_range must satisfy lo < hi")
        if self.noise_std < 0:
            raise ValueError("noise_std must be non-negative")

    @property
    def grid(self) -> np.ndarray:
        return np.linspace(self.grid_range[0], self.grid_range[1], self.p)


def _angle(a, b) -> float:
    c = abs(np.dot(a, b)) / (np.linalg.norm(a) * np.linalg.norm(b))
    return float(np.arccos(min(1.0, c)))


def spline_curve(knot_values, grid) -> np.ndarray:
    """Natural cubic spline through ``knot_values`` at equally spaced knots
    spanning ``grid``, evaluated on ``grid``."""
    grid = kern.as_grid(grid)
    knots = np.linspace(grid[0], grid[-1], len(knot_values))
    if grid.size == 1:
        return np.asarray(knot_values[:1], dtype=np.float64)
    return CubicSpline(knots, knot_values, bc_type="natural")(grid)


def smooth_curves(seed, knot_count: int, value_range, grid, max_tries: int = 100):
    """Two linearly independent smooth curves ``(s_lower, s_upper)`` on ``grid``."""
    rng = np.random.default_rng(seed)
    lo, hi = value_range
    for _ in range(max_tries):
        lower = spline_curve(rng.uniform(lo, hi, knot_count), grid)
        upper = spline_curve(rng.uniform(lo, hi, knot_count), grid)
        if lower.size == 1 or _angle(lower, upper) >= 1e-3:
            return lower, upper
    raise RuntimeError("could not draw linearly independent curves")


def blob_template(rng, size, bumps: int = 3) -> np.ndarray:
    """Sum of Gaussian bumps with random centers, widths and amplitudes.

    Centers are drawn from the middle half of the image and the bumps are
    wide, so templates of different classes overlap substantially (as digit
    images do) and the spatial pattern alone separates classes only partly.
    """
    h, w = size
    rows, cols = np.mgrid[0:h, 0:w]
    img = np.zeros(size)
    for _ in range(bumps):
        cy = rng.uniform(h / 4, 3 * h / 4 - 1)
        cx = rng.uniform(w / 4, 3 * w / 4 - 1)
        width = rng.uniform(2.5, 4.5)
        amp = rng.uniform(0.5, 1.0)
        img += amp * np.exp(-((rows - cy) ** 2 + (cols - cx) ** 2) / (2 * width ** 2))
    return img


def expand_sample(image, s_lower, s_upper) -> np.ndarray:
    """``lower_half(image) o s_lower + upper_half(image) o s_upper``."""
    image = np.asarray(image, dtype=np.float64)
    half = image.shape[0] // 2
    upper = image.copy()
    upper[half:] = 0.0
    lower = image.copy()
    lower[:half] = 0.0
    return (
        lower[:, :, None] * np.asarray(s_lower)[None, None, :]
        + upper[:, :, None] * np.asarray(s_upper)[None, None, :]
    )


def synth_digit_dataset(cfg: SynthConfig) -> LabeledDataset:
    rng = np.random.default_rng(cfg.seed)
    grid = cfg.grid
    class_seeds = rng.integers(0, 2**32 - 1, size=cfg.num_classes)
    samples, labels = [], []
    for c, cseed in enumerate(class_seeds):
        crng = np.random.default_rng(int(cseed))
        template = blob_template(crng, cfg.image_size, cfg.bumps)
        s_lower, s_upper = smooth_curves(
            int(crng.integers(0, 2**32 - 1)), cfg.knot_count, cfg.value_range, grid
        )
        for _ in range(cfg.samples_per_class):
            img = template + cfg.noise_std * crng.standard_normal(cfg.image_size)
            samples.append(expand_sample(img, s_lower, s_upper))
            labels.append(c)
    return LabeledDataset(samples=samples, labels=labels, grid=grid)


def subsample(data: LabeledDataset, indices: Sequence[int]) -> LabeledDataset:
    """Restrict every sample and the grid to the given continuous-mode indices."""
    idx = np.asarray(indices, dtype=int)
    p = data.grid.size
    if idx.size == 0:
        raise ValueError("no grid indices given")
    if idx.min() < 0 or idx.max() >= p:
        raise ValueError(f"grid indices must lie in [0, {p - 1}]")
    if np.any(np.diff(idx) <= 0):
        raise ValueError("grid indices must be strictly increasing")
    return LabeledDataset(
        samples=[s[..., idx] for s in data.samples],
        labels=list(data.labels),
        grid=data.grid[idx],
        label_names=data.label_names,
    )


def split_train_test(data: LabeledDataset, train_fraction: float, seed: int = 0):
    """Stratified split; each class contributes ``round(fraction * n_c)`` training
    samples (at least one per side)."""
    if not 0 < train_fraction < 1:
        raise ValueError("train_fraction must lie strictly between 0 and 1")
    rng = np.random.default_rng(seed)
    labels = np.asarray(data.labels)
    train_idx, test_idx = [], []
    for c in data.classes:
        members = np.flatnonzero(labels == c)
        if members.size < 2:
            raise ValueError(f"class {c} has fewer than 2 samples")
        members = rng.permutation(members)
        n_train = int(np.clip(round(train_fraction * members.size), 1, members.size - 1))
        train_idx.extend(members[:n_train].tolist())
        test_idx.extend(members[n_train:].tolist())
    train_idx.sort()
    test_idx.sort()
    return data.select(train_idx), data.select(test_idx)


def planted_ftd_instance(shape, ranks, spec: kern.KernelSpec, seed: int = 0, grid=None):
    """Exact tensor ``[[G; A_0, ..., K W]]`` and its generating model.

    Discrete factors are random orthonormal matrices, the core is standard
    Gaussian and ``W`` is Gaussian scaled by ``1/p`` (``K W`` is then smooth
    because the kernel is).
    """
    shape = tuple(int(n) for n in shape)
    ranks = tuple(int(r) for r in ranks)
    if len(shape) != len(ranks) or any(r > n for r, n in zip(ranks, shape)):
        raise ValueError(f"ranks {ranks} invalid for shape {shape}")
    p = shape[-1]
    grid = np.linspace(1.0, 10.0, p) if grid is None else kern.as_grid(grid)
    rng = np.random.default_rng(seed)
    factors = [np.linalg.qr(rng.standard_normal((n, r)))[0] for n, r in zip(shape[:-1], ranks[:-1])]
    w = rng.standard_normal((p, ranks[-1])) / p
    core = rng.standard_normal(ranks)
    k = kern.gram(spec, grid)
    t = _reconstruct(core, factors, k @ w)
    model = FtdModel(core=core, discrete_factors=factors, weights=w, design=grid,
                     kernel=spec, lam=0.0, _gram=k)
    return t, model
