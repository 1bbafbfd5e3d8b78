"""Kernels on the continuous mode.

A design grid is a strictly increasing 1-D float array of sampling locations.
Only the Gaussian kernel ``exp(-(x - y)^2 / (2 c^2))`` is implemented; its
width ``c`` is exposed as ``bandwidth`` (the same quantity is sometimes
written ``d`` when experiments are reported).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

FAMILIES = ("gaussian",)


@dataclass(frozen=True)
class KernelSpec:
    family: str = "gaussian"
    bandwidth: float = 1.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown kernel family {self.family!r}; expected one of {FAMILIES}")
        if not np.isfinite(self.bandwidth) or self.bandwidth <= 0:
            raise ValueError(f"bandwidth must be positive, got {self.bandwidth}")

    def to_dict(self) -> dict:
        return {"family": self.family, "bandwidth": float(self.bandwidth)}

    @classmethod
    def from_dict(cls, d: dict) -> "KernelSpec":
        return cls(family=str(d.get("family", "gaussian")).lower(), bandwidth=float(d["bandwidth"]))


def as_grid(points) -> np.ndarray:
    """Validate and return a design grid."""
    x = np.asarray(points, dtype=np.float64).reshape(-1)
    if x.size < 1:
        raise ValueError("a design grid needs at least one point")
    if not np.all(np.isfinite(x)):
        raise ValueError("design grid contains non-finite points")
    if np.any(np.diff(x) <= 0):
        raise ValueError("design grid must be strictly increasing")
    return x


def cross_gram(spec: KernelSpec, eval_points, design) -> np.ndarray:
    """Matrix of kernel values ``K(eval_i, design_j)``."""
    x = as_grid(eval_points)
    y = as_grid(design)
    d = x[:, None] - y[None, :]
    return np.exp(-(d * d) / (2.0 * spec.bandwidth ** 2))


def gram(spec: KernelSpec, grid) -> np.ndarray:
    """Kernel matrix on a design grid (symmetric, unit diagonal)."""
    return cross_gram(spec, grid, grid)
