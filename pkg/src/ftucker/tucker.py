"""Truncated HOSVD and Tucker reconstruction."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Sequence

import numpy as np

from .linalg import truncated_svd
from .tensor import as_tensor, kronecker, multi_mode_product, norm, unfold


@dataclass
class TuckerFactors:
    core: np.ndarray
    factors: List[np.ndarray] = field(default_factory=list)

    def __post_init__(self):
        if len(self.factors) != self.core.ndim:
            raise ValueError(
                f"{len(self.factors)} factors given for an order-{self.core.ndim} core"
            )
        for k, f in enumerate(self.factors):
            if f.shape[1] != self.core.shape[k]:
                raise ValueError(
                    f"factor {k} has {f.shape[1]} columns but core extent is {self.core.shape[k]}"
                )

    @property
    def shape(self):
        return tuple(f.shape[0] for f in self.factors)

    @property
    def ranks(self):
        return self.core.shape


def hosvd(t, ranks: Sequence[int]) -> TuckerFactors:
    """Truncated higher-order SVD.

    ``factor_k`` holds the leading ``ranks[k]`` left singular vectors of the
    mode-k unfolding; the core is ``t`` multiplied by every factor transpose.
    """
    t = as_tensor(t)
    ranks = [int(r) for r in ranks]
    if len(ranks) != t.ndim:
        raise ValueError(f"expected {t.ndim} ranks, got {len(ranks)}")
    factors = []
    for k, r in enumerate(ranks):
        n_k = t.shape[k]
        if n_k == 1:
            r = 1
        if not 1 <= r <= n_k:
            raise ValueError(f"rank {r} out of range for mode {k} of extent {n_k}")
        unf = unfold(t, k)
        if r > unf.shape[1]:
            # fewer fibers than requested components: pad with an orthonormal complement
            u = truncated_svd(unf, unf.shape[1]).u
            q, _ = np.linalg.qr(np.hstack([u, np.eye(n_k)]))
            u = np.hstack([u, q[:, u.shape[1]:r]])
        else:
            u = truncated_svd(unf, r).u
        factors.append(u)
    core = multi_mode_product(t, factors, transpose=True)
    return TuckerFactors(core=core, factors=factors)


def reconstruct(f: TuckerFactors) -> np.ndarray:
    """``core x_0 U_0 x_1 U_1 ...`` via sequential mode products."""
    return multi_mode_product(f.core, f.factors)


def reconstruct_kron(f: TuckerFactors, k: int = 0) -> np.ndarray:
    """Mode-k unfolding of the reconstruction via the explicit Kronecker form

    ``U_k G_(k) (U_{N-1} kron ... kron U_{k+1} kron U_{k-1} kron ... kron U_0)^T``.

    Slower than :func:`reconstruct`; kept as a cross-check.
    """
    others = [f.factors[j] for j in range(len(f.factors)) if j != k]
    kr = np.ones((1, 1))
    for u in others:
        kr = kronecker(u, kr)
    return f.factors[k] @ unfold(f.core, k) @ kr.T


def relative_error(t, f: TuckerFactors) -> float:
    t = as_tensor(t)
    tn = norm(t)
    if tn == 0:
        raise ValueError("relative error is undefined for a zero tensor")
    return norm(t - reconstruct(f)) / tn
