"""Equal-domain vs. transfer-domain classification on the synthetic digit data.

Training samples are restricted to every fourth grid point. Test samples are
evaluated either on the same points ("equal") or on a contiguous window at
the start of the grid ("transfer"). HOSVD class bases are always built on the
training points, so under transfer they are compared against data from a
different domain. FTD class models are re-evaluated on the test points and
their bases rebuilt there.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import List, Tuple

import numpy as np

from . import classify as cl
from . import datagen as dg
from . import ftd
from .kernel import KernelSpec
from .metrics import accuracy, macro_f1

METRICS = ("accuracy", "macro_f1")
DOMAINS = ("equal", "transfer")
METHODS = ("hosvd", "ftd")


@dataclass
class ExperimentConfig:
    ranks: List[int] = field(default_factory=lambda: [5, 5, 2])
    k_values: List[int] = field(default_factory=lambda: list(range(1, 16)))
    lam: float = 1.0
    bandwidth: float = 4.0
    tau: float = 1e-6
    max_iters: int = 50
    seed: int = 0
    train_grid_idx: List[int] = field(default_factory=lambda: list(range(0, 50, 4)))
    test_grid_idx: List[int] = field(default_factory=lambda: list(range(13)))
    train_fraction: float = 40 / 48
    num_classes: int = 10
    samples_per_class: int = 48
    image_size: Tuple[int, int] = (16, 16)
    p: int = 50
    noise_std: float = 0.05

    def __post_init__(self):
        self.ranks = [int(r) for r in self.ranks]
        self.k_values = [int(k) for k in self.k_values]
        self.train_grid_idx = [int(i) for i in self.train_grid_idx]
        self.test_grid_idx = [int(i) for i in self.test_grid_idx]
        self.image_size = tuple(int(n) for n in self.image_size)
        if len(self.ranks) != 3 or min(self.ranks) < 1:
            raise ValueError("ranks must hold three positive ints (rows, cols, continuous)")
        if not self.k_values or min(self.k_values) < 1:
            raise ValueError("k_values must be positive")
        if self.lam <= 0 or self.bandwidth <= 0 or self.tau <= 0 or self.max_iters < 1:
            raise ValueError("lambda, bandwidth, tau and max_iters must be positive")
        if not 0 < self.train_fraction < 1:
            raise ValueError("train_fraction must lie in (0, 1)")
        for name in ("train_grid_idx", "test_grid_idx"):
            idx = getattr(self, name)
            if not idx or min(idx) < 0 or max(idx) >= self.p:
                raise ValueError(f"{name} must be non-empty and lie in [0, {self.p - 1}]")
        if len(self.train_grid_idx) != len(self.test_grid_idx):
            raise ValueError("train and test grids must have the same number of points")

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        doc = json.loads(Path(path).read_text())
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known - {"lambda"}
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        if "lambda" in doc:
            doc["lam"] = doc.pop("lambda")
        return cls(**doc)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["lambda"] = d.pop("lam")
        d["image_size"] = list(self.image_size)
        return d


def _curves(test, bases, ks, num_classes):
    acc, f1 = [], []
    for k in ks:
        pred = cl.predict_many(test.samples, bases, k)
        acc.append(accuracy(test.labels, pred))
        f1.append(macro_f1(test.labels, pred, num_classes))
    return acc, f1


def run_digits(cfg: ExperimentConfig) -> dict:
    data = dg.synth_digit_dataset(dg.SynthConfig(
        num_classes=cfg.num_classes,
        samples_per_class=cfg.samples_per_class,
        image_size=cfg.image_size,
        p=cfg.p,
        noise_std=cfg.noise_std,
        seed=cfg.seed,
    ))
    train, test = dg.split_train_test(data, cfg.train_fraction, cfg.seed)
    train = dg.subsample(train, cfg.train_grid_idx)
    tests = {
        "equal": dg.subsample(test, cfg.train_grid_idx),
        "transfer": dg.subsample(test, cfg.test_grid_idx),
    }
    cl._check_k(train, max(cfg.k_values))

    hosvd_bases = cl.train_hosvd(train, cfg.ranks)
    fit_cfg = ftd.FtdConfig(
        ranks=tuple(cfg.ranks), lam=cfg.lam, max_iters=cfg.max_iters, tol=cfg.tau,
        seed=cfg.seed, kernel=KernelSpec("gaussian", cfg.bandwidth),
    )
    models = cl.train_ftd(train, fit_cfg)

    curves = {m: {d: {} for d in DOMAINS} for m in METRICS}
    for domain, tdata in tests.items():
        ftd_bases = cl.transfer_bases(models, tdata.grid, cfg.ranks)
        for method, bases in (("hosvd", hosvd_bases), ("ftd", ftd_bases)):
            acc, f1 = _curves(tdata, bases, cfg.k_values, cfg.num_classes)
            curves["accuracy"][domain][method] = acc
            curves["macro_f1"][domain][method] = f1

    means = {
        m: {d: {meth: float(np.mean(curves[m][d][meth])) for meth in METHODS} for d in DOMAINS}
        for m in METRICS
    }
    gaps = {
        m: {d: means[m][d]["ftd"] - means[m][d]["hosvd"] for d in DOMAINS} for m in METRICS
    }
    return {
        "config": cfg.to_dict(),
        "k": list(cfg.k_values),
        "curves": curves,
        "means": means,
        "ftd_minus_hosvd": gaps,
        "ftd_final_relative_error": {str(c): m.trace[-1] for c, m in sorted(models.items())},
        "ftd_sweeps": {str(c): m.n_iter for c, m in sorted(models.items())},
    }


def write_results(result: dict, out_dir, figures: bool = True) -> List[Path]:
    """CSV curves (one per metric and domain), ``summary.json`` and figures."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    ks = result["k"]
    for metric in METRICS:
        for domain in DOMAINS:
            path = out_dir / f"{metric}_{domain}.csv"
            rows = ["k,hosvd,ftd"]
            c = result["curves"][metric][domain]
            for i, k in enumerate(ks):
                rows.append(f"{k},{float(c['hosvd'][i])!r},{float(c['ftd'][i])!r}")
            path.write_text("\n".join(rows) + "\n")
            written.append(path)
    summary = out_dir / "summary.json"
    summary.write_text(json.dumps(result, indent=2, sort_keys=True) + "\n")
    written.append(summary)
    if figures:
        from .plotting import plot_domain_curves

        labels = {"accuracy": "success rate", "macro_f1": "macro F1"}
        for metric in METRICS:
            path = out_dir / f"{metric}.png"
            plot_domain_curves(ks, result["curves"][metric], labels[metric], path)
            written.append(path)
    return written
