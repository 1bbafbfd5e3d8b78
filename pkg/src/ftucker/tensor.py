"""Dense tensor primitives.

Tensors are plain ``numpy.ndarray`` objects of dtype float64. Whenever a
tensor is flattened (``vec``, unfoldings, file payloads) the element order is
column-major: the first index varies fastest. Mode indices are 0-based.

The mode-k unfolding follows the Kolda-Bader convention: the columns are the
mode-k fibers and the remaining modes are ordered with the lower mode index
varying fastest. With this ordering the Tucker identities hold in their usual
form, e.g. ``unfold(G x_0 A x_1 B x_2 C, 0) == A @ unfold(G, 0) @ kron(C, B).T``.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np


def as_tensor(t) -> np.ndarray:
    """Return ``t`` as a float64 array with at least one dimension."""
    arr = np.asarray(t, dtype=np.float64)
    if arr.ndim == 0:
        raise ValueError("tensors must have order >= 1")
    if any(e < 1 for e in arr.shape):
        raise ValueError(f"every extent must be >= 1, got shape {arr.shape}")
    return arr


def _check_mode(ndim: int, k: int) -> None:
    if not 0 <= k < ndim:
        raise ValueError(f"mode {k} out of range for order-{ndim} tensor")


def unfold(t, k: int) -> np.ndarray:
    """Mode-k unfolding, shape ``(I_k, prod_{j != k} I_j)``."""
    t = as_tensor(t)
    _check_mode(t.ndim, k)
    return np.reshape(np.moveaxis(t, k, 0), (t.shape[k], -1), order="F")


def fold(m, k: int, shape: Sequence[int]) -> np.ndarray:
    """Inverse of :func:`unfold`."""
    m = np.asarray(m, dtype=np.float64)
    shape = tuple(int(s) for s in shape)
    _check_mode(len(shape), k)
    rest = int(np.prod(shape)) // shape[k] if shape[k] else 0
    if m.ndim != 2 or m.shape != (shape[k], rest):
        raise ValueError(
            f"matrix of shape {m.shape} cannot be folded into {shape} along mode {k}"
        )
    moved = (shape[k],) + shape[:k] + shape[k + 1:]
    return np.moveaxis(np.reshape(m, moved, order="F"), 0, k)


def mode_product(t, m, k: int) -> np.ndarray:
    """k-mode product ``t x_k m``: every mode-k fiber is multiplied by ``m``."""
    t = as_tensor(t)
    m = np.asarray(m, dtype=np.float64)
    _check_mode(t.ndim, k)
    if m.ndim != 2 or m.shape[1] != t.shape[k]:
        raise ValueError(
            f"matrix with {m.shape[-1]} columns cannot act on mode {k} of extent {t.shape[k]}"
        )
    # tensordot contracts m's columns against mode k and appends the new axis last
    return np.moveaxis(np.tensordot(t, m, axes=(k, 1)), -1, k)


def multi_mode_product(t, matrices, modes=None, transpose: bool = False) -> np.ndarray:
    """Apply a sequence of k-mode products; ``None`` entries are skipped."""
    t = as_tensor(t)
    if modes is None:
        modes = range(len(matrices))
    for m, k in zip(matrices, modes):
        if m is None:
            continue
        t = mode_product(t, m.T if transpose else m, k)
    return t


def kronecker(a, b) -> np.ndarray:
    """Kronecker product of two matrices."""
    return np.kron(np.atleast_2d(a), np.atleast_2d(b))


def weighted_norm_sq(w, k, sym_tol: float = 1e-10) -> float:
    """``sum_i w_i^T K w_i`` over the columns of ``w``.

    Equal to ``vec(W)^T (I_s kron K) vec(W)``.
    """
    w = np.asarray(w, dtype=np.float64)
    k = np.asarray(k, dtype=np.float64)
    if w.ndim == 1:
        w = w[:, None]
    if k.ndim != 2 or k.shape[0] != k.shape[1] or k.shape[0] != w.shape[0]:
        raise ValueError(f"kernel of shape {k.shape} does not match weights {w.shape}")
    scale = max(1.0, float(np.max(np.abs(k))))
    if np.max(np.abs(k - k.T)) > sym_tol * scale:
        raise ValueError("kernel matrix is not symmetric")
    return float(np.sum(w * (k @ w)))


def inner(a, b) -> float:
    """Euclidean inner product over all entries."""
    a = as_tensor(a)
    b = as_tensor(b)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    return float(np.dot(a.ravel(), b.ravel()))


def norm(t) -> float:
    """Frobenius norm of a tensor."""
    return float(np.linalg.norm(as_tensor(t).ravel()))


def vec(t) -> np.ndarray:
    """Column-major vectorization."""
    return np.reshape(as_tensor(t), -1, order="F")
