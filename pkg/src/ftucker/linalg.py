"""Dense factorizations and solvers used by HOSVD and the ALS sweeps."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg


class RankDeficiencyWarning(RuntimeWarning):
    """Raised (as a warning) when a least-squares design lacks full column rank."""


class NotPositiveDefiniteError(np.linalg.LinAlgError):
    pass


@dataclass(frozen=True)
class SvdResult:
    u: np.ndarray
    s: np.ndarray
    vt: np.ndarray


def _fix_signs(u: np.ndarray, vt: np.ndarray) -> None:
    # largest-magnitude entry of every left singular vector is made non-negative
    idx = np.argmax(np.abs(u), axis=0)
    signs = np.sign(u[idx, np.arange(u.shape[1])])
    signs[signs == 0] = 1.0
    u *= signs
    vt *= signs[:, None]


def truncated_svd(m, rank: int) -> SvdResult:
    """Leading ``rank`` singular triplets of ``m`` with a deterministic sign."""
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2:
        raise ValueError("truncated_svd expects a matrix")
    if not 1 <= rank <= min(m.shape):
        raise ValueError(f"rank {rank} out of range for a {m.shape[0]}x{m.shape[1]} matrix")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix contains non-finite entries")
    try:
        u, s, vt = scipy.linalg.svd(m, full_matrices=False, lapack_driver="gesdd")
    except np.linalg.LinAlgError:
        u, s, vt = scipy.linalg.svd(m, full_matrices=False, lapack_driver="gesvd")
    u = np.array(u[:, :rank])
    vt = np.array(vt[:rank])
    _fix_signs(u, vt)
    return SvdResult(u=u, s=s[:rank].copy(), vt=vt)


def solve_spd(l, rhs, sym_tol: float = 1e-8) -> np.ndarray:
    """Solve ``l x = rhs`` for symmetric positive definite ``l``.

    A Cholesky factorization is attempted first. If it fails, diagonal jitter
    ``eps * trace(l) / n`` is added with ``eps`` in 1e-12, 1e-10, 1e-8 before
    giving up with :class:`NotPositiveDefiniteError`.
    """
    l = np.asarray(l, dtype=np.float64)
    rhs = np.asarray(rhs, dtype=np.float64)
    n = l.shape[0]
    if l.ndim != 2 or l.shape[1] != n or rhs.shape[0] != n:
        raise ValueError(f"incompatible shapes {l.shape} and {rhs.shape}")
    scale = max(1.0, float(np.max(np.abs(l))))
    if np.max(np.abs(l - l.T)) > sym_tol * scale:
        raise ValueError("matrix is not symmetric")
    shift = abs(float(np.trace(l))) / n
    for eps in (0.0, 1e-12, 1e-10, 1e-8):
        try:
            factor = scipy.linalg.cho_factor(l + eps * shift * np.eye(n), lower=True)
        except np.linalg.LinAlgError:
            continue
        return scipy.linalg.cho_solve(factor, rhs)
    raise NotPositiveDefiniteError("matrix is not positive definite within the jitter budget")


def _lstsq(design, rhs):
    sol, _, rank, _ = scipy.linalg.lstsq(design, rhs, lapack_driver="gelsd")
    return sol, rank


def solve_right(t, m) -> np.ndarray:
    """Minimize ``||t - A m||_F`` over ``A`` (minimum-norm solution)."""
    t = np.asarray(t, dtype=np.float64)
    m = np.asarray(m, dtype=np.float64)
    if m.shape[1] != t.shape[1]:
        raise ValueError(f"incompatible shapes {t.shape} and {m.shape}")
    sol, _ = _lstsq(m.T, t.T)
    return sol.T


def solve_left(c, y, warn: bool = True) -> np.ndarray:
    """Minimize ``||c G - y||_F`` over ``G`` (minimum-norm solution).

    Emits :class:`RankDeficiencyWarning` when ``c`` lacks full column rank.
    """
    c = np.asarray(c, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if c.shape[0] != y.shape[0]:
        raise ValueError(f"incompatible shapes {c.shape} and {y.shape}")
    sol, rank = _lstsq(c, y)
    if warn and rank < c.shape[1]:
        warnings.warn(
            f"design matrix has rank {rank} < {c.shape[1]} columns; "
            "returning the minimum-norm solution",
            RankDeficiencyWarning,
            stacklevel=2,
        )
    return sol
