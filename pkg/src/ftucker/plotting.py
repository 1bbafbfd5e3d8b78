"""Report figures.

Everything renders through the Agg backend and PNGs are written without the
``Software`` metadata entry, so the same inputs give byte-identical files.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

COLORS = {"hosvd": "#1f77b4", "ftd": "#d62728"}
LABELS = {"hosvd": "HOSVD", "ftd": "FTD"}


def _clean(ax):
    ax.spines["top"].set_visible(False)
    ax.spines["right"].set_visible(False)
    ax.grid(alpha=0.3, linewidth=0.5)


def save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=100, metadata={"Software": None})
    plt.close(fig)
    return path


def plot_domain_curves(ks, curves, ylabel, path) -> Path:
    """Two panels: metric vs. k on the equal domain and the transfer domain.

    ``curves`` maps ``"equal"``/``"transfer"`` to ``{"hosvd": [...], "ftd": [...]}``.
    """
    fig, axes = plt.subplots(1, 2, figsize=(9, 3.6), sharey=True)
    for ax, domain in zip(axes, ("equal", "transfer")):
        for method in ("hosvd", "ftd"):
            ax.plot(ks, curves[domain][method], marker="o", markersize=3,
                    color=COLORS[method], label=LABELS[method])
        ax.set_title(f"{domain} domain")
        ax.set_xlabel("basis size k")
        ax.set_ylim(-0.02, 1.02)
        _clean(ax)
    axes[0].set_ylabel(ylabel)
    axes[1].legend(loc="lower right", frameon=False)
    fig.tight_layout()
    return save(fig, path)


def plot_trace(rel_error, objective, path) -> Path:
    fig, axes = plt.subplots(1, 2, figsize=(9, 3.4))
    sweeps = np.arange(len(rel_error))
    axes[0].semilogy(sweeps, rel_error, color="k")
    axes[0].set_ylabel("relative error")
    axes[1].semilogy(sweeps, objective, color="k")
    axes[1].set_ylabel("objective")
    for ax in axes:
        ax.set_xlabel("sweep")
        _clean(ax)
    fig.tight_layout()
    return save(fig, path)


def plot_fibers(grid, values, labels, path, design=None, design_values=None) -> Path:
    """Continuous-mode fibers on ``grid`` (one column of ``values`` per fiber),
    optionally with the model's values at its design points as markers."""
    fig, ax = plt.subplots(figsize=(6, 3.6))
    values = np.atleast_2d(np.asarray(values).T).T
    for j, lab in enumerate(labels):
        line, = ax.plot(grid, values[:, j], label=lab)
        if design is not None:
            ax.plot(design, design_values[:, j], "o", markersize=3, color=line.get_color())
    ax.set_xlabel("x")
    ax.set_ylabel("value")
    if labels:
        ax.legend(frameon=False, fontsize="small")
    _clean(ax)
    fig.tight_layout()
    return save(fig, path)


def plot_metric_curves(ks, series, path, title=None) -> Path:
    """One panel, one line per entry of ``series`` (label -> values over k)."""
    fig, ax = plt.subplots(figsize=(5, 3.6))
    for label, values in series.items():
        ax.plot(ks, values, marker="o", markersize=3, label=label)
    ax.set_xlabel("basis size k")
    ax.set_ylim(-0.02, 1.02)
    if title:
        ax.set_title(title)
    ax.legend(loc="lower right", frameon=False)
    _clean(ax)
    fig.tight_layout()
    return save(fig, path)


def plot_cv_heatmap(scores, row_labels, col_labels, path, title=None) -> Path:
    """Mean accuracy over a grid of rank choices (rows x columns)."""
    scores = np.atleast_2d(np.asarray(scores))
    fig, ax = plt.subplots(figsize=(2.2 + 0.7 * len(col_labels), 1.6 + 0.4 * len(row_labels)))
    im = ax.imshow(scores, aspect="auto", cmap="viridis", vmin=0, vmax=1)
    ax.set_xticks(range(len(col_labels)), col_labels)
    ax.set_yticks(range(len(row_labels)), row_labels)
    ax.set_xlabel("continuous rank" if len(col_labels) > 1 else "")
    ax.set_ylabel("spatial rank" if len(col_labels) > 1 else "ranks")
    if title:
        ax.set_title(title)
    fig.colorbar(im, ax=ax, label="mean accuracy")
    fig.tight_layout()
    return save(fig, path)
