"""Independent reference computations shared by several test modules."""

import numpy as np


def kron_all(mats):
    """``mats[-1] kron ... kron mats[0]`` (the lowest mode varies fastest)."""
    out = np.ones((1, 1))
    for m in mats:
        out = np.kron(m, out)
    return out


def unfold_last(t):
    """Mode-(N-1) unfolding built column by column from the last-mode fibers."""
    flat = t.reshape(-1, t.shape[-1], order="F")
    return flat.T


def weights_by_normal_equations(t, core, factors, k, lam):
    """Minimizer of 1/2||T - G x A.. x (K W)||^2 + lam/2 tr(W^T K W) from the
    explicit vectorized normal equations ``[Phi^T Phi + lam (I kron K)] w = Phi^T vec(T_(d))``
    with ``Phi = (A_kron G_(d)^T) kron K``."""
    d = len(factors)
    s = core.shape[d]
    g_d = unfold_last(core)
    phi = np.kron(kron_all(factors) @ g_d.T, k)
    lhs = phi.T @ phi + lam * np.kron(np.eye(s), k)
    rhs = phi.T @ unfold_last(t).reshape(-1, order="F")
    w = np.linalg.solve(lhs, rhs)
    return w.reshape((k.shape[0], s), order="F")


def model_tensor(core, factors, c):
    """Tucker model assembled entrywise through einsum (no mode products)."""
    letters = "abcdefgh"
    ranks = letters[: core.ndim]
    outs = "ijklmnop"[: core.ndim]
    mats = list(factors) + [c]
    expr = ranks + "," + ",".join(o + r for o, r in zip(outs, ranks)) + "->" + outs
    return np.einsum(expr, core, *mats)


def w_objective(t, core, factors, k, lam, w):
    r = t - model_tensor(core, factors, k @ w)
    return 0.5 * np.sum(r * r) + 0.5 * lam * np.trace(w.T @ k @ w)
