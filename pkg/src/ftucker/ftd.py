"""Functional Tucker decomposition (FTD).

The last mode of the input tensor is treated as samples of a continuous
function on a design grid ``x_1 < ... < x_p``. Its factor is a quasimatrix
whose columns live in the RKHS of a kernel ``K``; by the representer form the
evaluated factor is ``C = K W`` for a weight matrix ``W`` (p x s). The model

    T  ~  G x_0 A_0 x_1 A_1 ... x_d (K W)

is fitted by alternating least squares on

    1/2 ||T - G x_0 A_0 ... x_d K W||^2 + lam/2 ||W||_K^2

with orthonormal discrete factors ``A_j``. Once fitted, the continuous factor
can be evaluated at any points through the cross kernel, which is what makes
interpolation and domain transfer possible.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import List

import numpy as np

from . import kernel as kern
from .linalg import RankDeficiencyWarning, solve_left, solve_right, solve_spd, truncated_svd
from .tensor import as_tensor, fold, mode_product, norm, unfold, weighted_norm_sq

MAX_WEIGHT_SYSTEM = 20000


@dataclass(frozen=True)
class FtdConfig:
    """Fit settings. ``ranks`` lists the discrete-mode ranks followed by the
    continuous-mode rank ``s``."""

    ranks: tuple
    lam: float = 1.0
    max_iters: int = 200
    tol: float = 1e-8
    seed: int = 0
    kernel: kern.KernelSpec = field(default_factory=kern.KernelSpec)
    # stop when |eps_t - eps_{t-1}| < tol * ||T|| instead of < tol
    scale_tol_by_norm: bool = False
    weight_solver: str = "eig"
    init: str = "hosvd"

    def __post_init__(self):
        object.__setattr__(self, "ranks", tuple(int(r) for r in self.ranks))
        if any(r < 1 for r in self.ranks):
            raise ValueError(f"ranks must be positive, got {self.ranks}")
        if not self.lam > 0:
            raise ValueError(f"lambda must be positive, got {self.lam}")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if not self.tol > 0:
            raise ValueError("tol must be positive")


@dataclass
class FtdModel:
    core: np.ndarray
    discrete_factors: List[np.ndarray]
    weights: np.ndarray
    design: np.ndarray
    kernel: kern.KernelSpec
    lam: float
    trace: List[float] = field(default_factory=list)
    objective_trace: List[float] = field(default_factory=list)
    converged: bool = False
    _gram: np.ndarray = field(default=None, repr=False)

    @property
    def gram(self) -> np.ndarray:
        if self._gram is None:
            self._gram = kern.gram(self.kernel, self.design)
        return self._gram

    @property
    def continuous_factor(self) -> np.ndarray:
        """Evaluated functional factor ``K W`` on the design grid."""
        return self.gram @ self.weights

    @property
    def ranks(self):
        return self.core.shape

    @property
    def n_iter(self) -> int:
        return len(self.trace)

    def reconstruct(self) -> np.ndarray:
        return _reconstruct(self.core, self.discrete_factors, self.continuous_factor)


def _reconstruct(core, factors, c) -> np.ndarray:
    out = core
    for j, a in enumerate(factors):
        out = mode_product(out, a, j)
    return mode_product(out, c, len(factors))


def _project(t, factors) -> np.ndarray:
    """``t`` multiplied by every discrete factor transpose."""
    for j, a in enumerate(factors):
        t = mode_product(t, a.T, j)
    return t


def _check_ranks(shape, ranks) -> None:
    if len(ranks) != len(shape):
        raise ValueError(f"expected {len(shape)} ranks for shape {shape}, got {len(ranks)}")
    for k, (r, n) in enumerate(zip(ranks, shape)):
        if r > n:
            raise ValueError(f"rank {r} exceeds extent {n} of mode {k}")
        # a mode rank above the product of the others leaves core directions
        # undetermined and lets the core/weights scale diverge
        others = int(np.prod([q for j, q in enumerate(ranks) if j != k]))
        if r > others:
            raise ValueError(
                f"rank {r} of mode {k} exceeds the product {others} of the other ranks"
            )


def weight_system(t, core, discrete_factors, k, lam):
    """Explicit ``(L, r)`` with ``L = G_(d) G_(d)^T kron K + lam I`` and
    ``r = vec(Y_(d) G_(d)^T)``, ``Y`` being ``t`` projected onto the discrete
    factors."""
    d = len(discrete_factors)
    p = k.shape[0]
    s = core.shape[d]
    if s * p > MAX_WEIGHT_SYSTEM:
        raise ValueError(
            f"weight system of size {s * p} exceeds the limit of {MAX_WEIGHT_SYSTEM}"
        )
    g_d = unfold(core, d)
    lhs = np.kron(g_d @ g_d.T, k) + lam * np.eye(s * p)
    lhs = 0.5 * (lhs + lhs.T)
    rhs = (unfold(_project(t, discrete_factors), d) @ g_d.T).reshape(-1, order="F")
    return lhs, rhs


def solve_weights(t, core, discrete_factors, k, lam, method: str = "eig") -> np.ndarray:
    """Exact minimizer over ``W`` of the regularized objective, others fixed.

    Solves ``(G_(d) G_(d)^T kron K + lam I) vec(W) = vec(Y_(d) G_(d)^T)`` where
    ``Y`` is ``t`` projected onto the discrete factors. This is the
    stationarity condition of the W-subproblem provided the discrete factors
    have orthonormal columns.

    ``method="eig"`` diagonalizes both Kronecker terms, so the solve reduces to
    an elementwise division in the joint eigenbasis. ``method="cholesky"``
    assembles the ``sp x sp`` system and factors it; it loses accuracy once
    ``K`` is badly conditioned.
    """
    t = as_tensor(t)
    k = np.asarray(k, dtype=np.float64)
    d = len(discrete_factors)
    p = t.shape[d]
    s = core.shape[d]
    if t.ndim != d + 1 or k.shape != (p, p):
        raise ValueError(f"kernel matrix {k.shape} does not match continuous extent {p}")
    if method == "cholesky":
        lhs, rhs = weight_system(t, core, discrete_factors, k, lam)
        return solve_spd(lhs, rhs).reshape((p, s), order="F")
    if method != "eig":
        raise ValueError(f"unknown method {method!r}")
    g_d = unfold(core, d)
    r = unfold(_project(t, discrete_factors), d) @ g_d.T
    core_vals, core_vecs = np.linalg.eigh(g_d @ g_d.T)
    kern_vals, kern_vecs = np.linalg.eigh(0.5 * (k + k.T))
    # both matrices are PSD; clip round-off below zero
    core_vals = np.clip(core_vals, 0.0, None)
    kern_vals = np.clip(kern_vals, 0.0, None)
    rt = kern_vecs.T @ r @ core_vecs
    wt = rt / (np.outer(kern_vals, core_vals) + lam)
    return kern_vecs @ wt @ core_vecs.T


def solve_core(t, discrete_factors, c) -> np.ndarray:
    """Least-squares core for fixed orthonormal discrete factors and ``C = K W``."""
    d = len(discrete_factors)
    y = _project(t, discrete_factors)
    y_d = unfold(y, d)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RankDeficiencyWarning)
        g_d = solve_left(c, y_d)
    shape = tuple(a.shape[1] for a in discrete_factors) + (c.shape[1],)
    return fold(g_d, d, shape)


def update_discrete_factor(t, core, discrete_factors, c, k):
    """Least-squares update of discrete factor ``k`` followed by SVD
    orthogonalization. Returns the new orthonormal factor and the core with
    ``Sigma V^T`` absorbed, leaving the reconstruction unchanged."""
    d = len(discrete_factors)
    m = core
    for j, a in enumerate(discrete_factors):
        if j != k:
            m = mode_product(m, a, j)
    m = mode_product(m, c, d)
    a_new = solve_right(unfold(t, k), unfold(m, k))
    svd = truncated_svd(a_new, core.shape[k])
    core = mode_product(core, svd.s[:, None] * svd.vt, k)
    return svd.u, core


def objective(model: FtdModel, t) -> float:
    """``1/2 ||t - model||^2 + lam/2 ||W||_K^2``."""
    t = as_tensor(t)
    rec = model.reconstruct()
    if rec.shape != t.shape:
        raise ValueError(f"model shape {rec.shape} does not match tensor {t.shape}")
    resid = norm(t - rec)
    return 0.5 * resid ** 2 + 0.5 * model.lam * weighted_norm_sq(model.weights, model.gram)


def _objective_parts(t, core, factors, w, k, lam):
    c = k @ w
    resid = norm(t - _reconstruct(core, factors, c))
    return resid, 0.5 * resid ** 2 + 0.5 * lam * weighted_norm_sq(w, k)


def initialize(t, cfg: FtdConfig, k: np.ndarray):
    """Starting point for the sweeps.

    ``init="hosvd"``: discrete factors are the leading left singular vectors
    of the unfoldings and ``W`` solves ``(K + lam I) W = U_d`` for the leading
    continuous-mode singular vectors ``U_d``. ``init="random"``: orthonormalized
    Gaussian discrete factors and Gaussian ``W`` scaled by ``1/p``. In both
    cases the core is the least-squares core for that start.
    """
    d = t.ndim - 1
    p = t.shape[d]
    if cfg.init == "hosvd":
        factors = [truncated_svd(unfold(t, j), cfg.ranks[j]).u for j in range(d)]
        u_d = truncated_svd(unfold(t, d), cfg.ranks[d]).u
        w = solve_spd(0.5 * (k + k.T) + cfg.lam * np.eye(p), u_d)
    elif cfg.init == "random":
        rng = np.random.default_rng(cfg.seed)
        factors = []
        for j in range(d):
            q, _ = np.linalg.qr(rng.standard_normal((t.shape[j], cfg.ranks[j])))
            factors.append(q)
        w = rng.standard_normal((p, cfg.ranks[d])) / p
    else:
        raise ValueError(f"unknown init {cfg.init!r}")
    core = solve_core(t, factors, k @ w)
    return factors, w, core


def fit(t, cfg: FtdConfig, design, callback=None) -> FtdModel:
    """Fit a functional Tucker model by alternating least squares.

    Each sweep updates the discrete factors in ascending mode order (least
    squares, then SVD orthogonalization with ``Sigma V^T`` pushed into the
    core), then the weights ``W``, then the core. The relative error
    ``||T - model|| / ||T||`` after every sweep is stored in ``model.trace``.
    When given, ``callback(stage, state)`` runs after the initialization and
    after every block update; ``stage`` is ``"init"``, ``"mode<j>"``,
    ``"weights"`` or ``"core"`` and ``state`` holds the current core, discrete
    factors, weights and Gram matrix.
    """
    t = as_tensor(t)
    if not np.all(np.isfinite(t)):
        raise ValueError("input tensor contains non-finite entries")
    if t.ndim < 2:
        raise ValueError("FTD needs at least one discrete mode and one continuous mode")
    design = kern.as_grid(design)
    d = t.ndim - 1
    if t.shape[d] != design.size:
        raise ValueError(
            f"continuous extent {t.shape[d]} does not match {design.size} design points"
        )
    _check_ranks(t.shape, cfg.ranks)
    t_norm = norm(t)
    if t_norm == 0:
        raise ValueError("cannot fit a zero tensor")

    k = kern.gram(cfg.kernel, design)
    factors, w, core = initialize(t, cfg, k)
    c = k @ w

    def report(stage):
        if callback is not None:
            callback(stage, dict(core=core, factors=list(factors), weights=w, gram=k))

    report("init")
    trace, obj_trace = [], []
    threshold = cfg.tol * (t_norm if cfg.scale_tol_by_norm else 1.0)
    converged = False
    for sweep in range(cfg.max_iters):
        for j in range(d):
            factors[j], core = update_discrete_factor(t, core, factors, c, j)
            report(f"mode{j}")
        w = solve_weights(t, core, factors, k, cfg.lam, method=cfg.weight_solver)
        c = k @ w
        report("weights")
        core = solve_core(t, factors, c)
        report("core")

        resid, obj = _objective_parts(t, core, factors, w, k, cfg.lam)
        trace.append(resid / t_norm)
        obj_trace.append(obj)
        if sweep > 0 and abs(trace[-1] - trace[-2]) < threshold:
            converged = True
            break

    return FtdModel(
        core=core,
        discrete_factors=factors,
        weights=w,
        design=design,
        kernel=cfg.kernel,
        lam=float(cfg.lam),
        trace=trace,
        objective_trace=obj_trace,
        converged=converged,
        _gram=k,
    )


def evaluate_factor(model: FtdModel, points) -> np.ndarray:
    """Continuous factor evaluated at arbitrary points: ``K(points, design) W``."""
    points = kern.as_grid(points)
    if points.size == model.design.size and np.array_equal(points, model.design):
        return model.gram @ model.weights
    return kern.cross_gram(model.kernel, points, model.design) @ model.weights


def reconstruct_on(model: FtdModel, points) -> np.ndarray:
    """Model tensor with its continuous mode evaluated at ``points``."""
    return _reconstruct(model.core, model.discrete_factors, evaluate_factor(model, points))
