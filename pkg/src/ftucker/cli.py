"""Command-line interface.

Exit codes: 0 on success, 2 for usage and validation errors (bad flags,
missing or malformed inputs, infeasible ranks), 1 for anything unexpected.
Figures are written next to the delimited outputs unless ``--no-figures``.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from . import classify as cl
from . import datagen as dg
from . import ftd
from . import io as fio
from .experiment import ExperimentConfig, run_digits, write_results
from .kernel import KernelSpec, as_grid
from .metrics import accuracy, confusion_matrix, macro_f1
from .tucker import hosvd, relative_error


class UsageError(ValueError):
    pass


# -- argument parsing helpers ---------------------------------------------

def parse_ints(text: str, name: str = "value") -> List[int]:
    try:
        out = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"{name}: expected comma-separated integers, got {text!r}") from None
    if not out:
        raise UsageError(f"{name}: empty list")
    return out


def parse_floats(text: str, name: str = "points") -> np.ndarray:
    try:
        out = [float(v) for v in text.replace(",", " ").split()]
    except ValueError:
        raise UsageError(f"{name}: expected numbers, got {text!r}") from None
    if not out:
        raise UsageError(f"{name}: empty list")
    return np.asarray(out)


def parse_index_spec(text: str, n: int, name: str = "indices") -> List[int]:
    """Comma-separated items, each an index or a ``start:stop[:step]`` slice
    (stop exclusive). Indices are 0-based and must end up strictly increasing."""
    out: List[int] = []
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        try:
            if ":" in item:
                parts = [int(p) if p else None for p in item.split(":")]
                if len(parts) > 3:
                    raise ValueError
                out.extend(range(n)[slice(*parts)])
            else:
                out.append(int(item))
        except ValueError:
            raise UsageError(f"{name}: cannot parse {item!r}") from None
    if not out:
        raise UsageError(f"{name}: selects no grid points")
    if min(out) < 0 or max(out) >= n:
        raise UsageError(f"{name}: indices must lie in [0, {n - 1}]")
    if any(b <= a for a, b in zip(out, out[1:])):
        raise UsageError(f"{name}: indices must be strictly increasing")
    return out


def read_points_file(path) -> np.ndarray:
    path = Path(path)
    if not path.exists():
        raise UsageError(f"grid file {path} does not exist")
    text = path.read_text().strip()
    if text.startswith("["):
        try:
            return np.asarray(json.loads(text), dtype=np.float64)
        except (json.JSONDecodeError, TypeError, ValueError) as exc:
            raise UsageError(f"{path}: invalid JSON point list ({exc})") from None
    return parse_floats(text, str(path))


def _points(args) -> Optional[np.ndarray]:
    if getattr(args, "points", None) is not None and getattr(args, "grid_file", None) is not None:
        raise UsageError("give either --points or --grid-file, not both")
    if getattr(args, "points", None) is not None:
        return as_grid(parse_floats(args.points))
    if getattr(args, "grid_file", None) is not None:
        return as_grid(read_points_file(args.grid_file))
    return None


def _positive(name, value, allow_zero=False):
    if value is None:
        return
    if not np.isfinite(value) or value < 0 or (value == 0 and not allow_zero):
        raise UsageError(f"{name} must be {'non-negative' if allow_zero else 'positive'}, got {value}")


def _require_file(path, what="input file"):
    if not Path(path).is_file():
        raise UsageError(f"{what} {path} does not exist")


def _num(v) -> str:
    # shortest round-trip representation; ints stay ints
    return str(int(v)) if isinstance(v, (int, np.integer)) else repr(float(v))


def _write_csv(path, header: Sequence[str], rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(v if isinstance(v, str) else _num(v) for v in row))
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text("\n".join(lines) + "\n")


def _figure_path(path) -> Path:
    return Path(path).with_suffix(".png")


def _print_json(obj) -> None:
    print(json.dumps(obj, sort_keys=True))


def _ftd_config(args, ranks) -> ftd.FtdConfig:
    _positive("--lambda", args.lam)
    _positive("--bandwidth", args.bandwidth)
    _positive("--tau", args.tau)
    if args.max_iters < 1:
        raise UsageError("--max-iters must be >= 1")
    return ftd.FtdConfig(
        ranks=tuple(ranks), lam=args.lam, max_iters=args.max_iters, tol=args.tau,
        seed=args.seed, kernel=KernelSpec("gaussian", args.bandwidth),
    )


# -- commands ---------------------------------------------------------------

def cmd_synth(args) -> int:
    for name in ("classes", "per_class", "p"):
        if getattr(args, name) < 1:
            raise UsageError(f"--{name.replace('_', '-')} must be >= 1")
    size = parse_ints(args.size.replace("x", ","), "--size")
    if len(size) == 1:
        size = size * 2
    if len(size) != 2 or min(size) < 2:
        raise UsageError("--size must be N or HxW with both extents >= 2")
    _positive("--noise", args.noise, allow_zero=True)
    cfg = dg.SynthConfig(num_classes=args.classes, samples_per_class=args.per_class,
                         image_size=tuple(size), p=args.p, noise_std=args.noise, seed=args.seed)
    path = fio.write_dataset(dg.synth_digit_dataset(cfg), args.out)
    _print_json({"manifest": str(path), "samples": args.classes * args.per_class,
                 "shape": [*size, args.p]})
    return 0


def cmd_decompose(args) -> int:
    _require_file(args.input)
    t = fio.read_tensor(args.input)
    ranks = parse_ints(args.ranks, "--ranks")
    if len(ranks) != t.ndim:
        raise UsageError(f"--ranks has {len(ranks)} entries for an order-{t.ndim} tensor")
    for r, n in zip(ranks, t.shape):
        if not 1 <= r <= n:
            raise UsageError(f"rank {r} out of range for extent {n}")
    grid = _points(args)
    if grid is not None and grid.size != t.shape[-1]:
        raise UsageError(f"grid has {grid.size} points, tensor's last extent is {t.shape[-1]}")

    if args.method == "hosvd":
        dec = hosvd(t, ranks)
        fio.save_model(dec, args.out, grid)
        _print_json({"method": "hosvd", "relative_error": relative_error(t, dec)})
        return 0

    cfg = _ftd_config(args, ranks)
    if grid is None:
        grid = np.arange(1.0, t.shape[-1] + 1.0)
    ftd._check_ranks(t.shape, cfg.ranks)
    model = ftd.fit(t, cfg, grid)
    fio.save_model(model, args.out)
    if args.trace_out:
        _write_csv(args.trace_out, ["sweep", "rel_error", "objective"],
                   [(i, e, o) for i, (e, o) in enumerate(zip(model.trace, model.objective_trace))])
        if not args.no_figures:
            from .plotting import plot_trace

            plot_trace(model.trace, model.objective_trace, _figure_path(args.trace_out))
    _print_json({"method": "ftd", "relative_error": model.trace[-1],
                 "sweeps": model.n_iter, "converged": model.converged})
    return 0


def cmd_interpolate(args) -> int:
    _require_file(args.model, "model file")
    model = fio.load_model(args.model)
    if not isinstance(model, ftd.FtdModel):
        raise UsageError("interpolate needs an ftd model")
    points = _points(args)
    if points is None:
        raise UsageError("give --points or --grid-file")
    fibers = []
    for spec in args.fiber or []:
        idx = parse_ints(spec, "--fiber")
        shape = model.core.shape[:-1]
        extents = [a.shape[0] for a in model.discrete_factors]
        if len(idx) != len(shape):
            raise UsageError(f"--fiber needs {len(shape)} indices, got {len(idx)}")
        if any(not 0 <= i < n for i, n in zip(idx, extents)):
            raise UsageError(f"--fiber {spec} out of range for extents {extents}")
        fibers.append(tuple(idx))

    x = ftd.reconstruct_on(model, points)
    fio.write_tensor(args.out, x)
    out = {"out": str(args.out), "shape": list(x.shape)}
    if fibers:
        csv_path = Path(args.fiber_out or Path(args.out).with_name(Path(args.out).stem + "_fibers.csv"))
        names = ["x"] + ["fiber_" + "_".join(map(str, f)) for f in fibers]
        values = np.stack([x[f] for f in fibers], axis=1)
        _write_csv(csv_path, names, [(float(p), *map(float, v)) for p, v in zip(points, values)])
        out["fibers"] = str(csv_path)
        if not args.no_figures:
            from .plotting import plot_fibers

            at_design = model.reconstruct()
            design_vals = np.stack([at_design[f] for f in fibers], axis=1)
            plot_fibers(points, values, names[1:], _figure_path(csv_path),
                        design=model.design, design_values=design_vals)
    _print_json(out)
    return 0


def _load_split(args):
    _require_file(args.manifest, "manifest")
    data = fio.read_manifest(args.manifest)
    if args.train_fraction is None:
        return data, data
    if not 0 < args.train_fraction < 1:
        raise UsageError("--train-fraction must lie in (0, 1)")
    return dg.split_train_test(data, args.train_fraction, args.seed)


def cmd_classify_train(args) -> int:
    ranks = parse_ints(args.ranks, "--ranks")
    train, _ = _load_split(args)
    idx = parse_index_spec(args.train_grid_idx or ":", train.grid.size, "--train-grid-idx")
    train = dg.subsample(train, idx)
    if len(ranks) != len(train.sample_shape):
        raise UsageError(f"--ranks needs {len(train.sample_shape)} entries (non-sample modes)")
    for r, n in zip(ranks, train.sample_shape):
        if not 1 <= r <= n:
            raise UsageError(f"rank {r} out of range for extent {n}")
    if args.k is not None:
        cl._check_k(train, args.k)

    model_dir = Path(args.model_dir)
    model_dir.mkdir(parents=True, exist_ok=True)
    meta = {
        "method": args.method,
        "ranks": ranks,
        "train_grid_idx": idx,
        "train_grid": [float(v) for v in train.grid],
        "label_names": train.label_names,
        "class_sizes": {str(c): train.labels.count(c) for c in train.classes},
        "train_fraction": args.train_fraction,
        "split_seed": args.seed,
        "files": [],
    }
    if args.method == "hosvd":
        models = {b.label: b for b in cl.train_hosvd(train, ranks)}
    else:
        cfg = _ftd_config(args, ranks)
        smallest = min(meta["class_sizes"].values())
        sample_rank = min(smallest, int(np.prod(ranks)))
        ftd._check_ranks((smallest, *train.sample_shape), (sample_rank, *ranks))
        models = cl.train_ftd(train, cfg)
    for c in sorted(models):
        name = f"class{c:03d}.json"
        fio.save_model(models[c], model_dir / name)
        meta["files"].append(name)
    fio.dump_json(meta, model_dir / "meta.json")
    _print_json({"model_dir": str(model_dir), "classes": len(models), "method": args.method})
    return 0


def _load_classifier(args):
    model_dir = Path(args.model_dir)
    _require_file(model_dir / "meta.json", "model metadata")
    meta = json.loads((model_dir / "meta.json").read_text())
    _require_file(args.manifest, "manifest")
    test = fio.read_manifest(args.manifest)
    # reproduce the training split unless the whole manifest is requested
    if meta.get("train_fraction") is not None and args.part != "all":
        train, held_out = dg.split_train_test(test, meta["train_fraction"], meta["split_seed"])
        test = held_out if args.part == "test" else train
    idx = parse_index_spec(args.test_grid_idx or ":", test.grid.size, "--test-grid-idx")
    test = dg.subsample(test, idx)
    models = [fio.load_model(model_dir / f) for f in meta["files"]]
    if meta["method"] == "hosvd":
        bases = models
        if bases[0].sample_shape != test.sample_shape:
            raise UsageError(
                f"hosvd bases expect samples of shape {bases[0].sample_shape}, "
                f"test data has {test.sample_shape}"
            )
    else:
        by_label = {int(Path(f).stem[5:]): m for f, m in zip(meta["files"], models)}
        bases = cl.transfer_bases(by_label, test.grid, meta["ranks"])
    return meta, test, bases


def _check_k_meta(meta, k):
    if k < 1:
        raise UsageError("k must be >= 1")
    for c, n in meta["class_sizes"].items():
        if k >= n:
            raise UsageError(f"k={k} must be smaller than the {n} training samples of class {c}")


def cmd_classify_predict(args) -> int:
    meta, test, bases = _load_classifier(args)
    _check_k_meta(meta, args.k)
    pred = cl.predict_many(test.samples, bases, args.k)
    names = meta["label_names"] or [str(c) for c in range(max(pred) + 1)]
    _write_csv(args.out, ["sample", "truth", "predicted"],
               [(str(i), names[t], names[p]) for i, (t, p) in enumerate(zip(test.labels, pred))])
    _print_json({"out": str(args.out), "samples": len(test), "k": args.k})
    return 0


def cmd_classify_eval(args) -> int:
    meta, test, bases = _load_classifier(args)
    ks = [args.k] if args.k is not None else parse_index_spec(args.k_list, 10**6, "--k-list")
    for k in ks:
        _check_k_meta(meta, k)
    n_cls = len(meta["label_names"]) if meta["label_names"] else test.num_classes
    acc, f1, cms = [], [], {}
    for k in ks:
        pred = cl.predict_many(test.samples, bases, k)
        acc.append(accuracy(test.labels, pred))
        f1.append(macro_f1(test.labels, pred, n_cls))
        cms[str(k)] = confusion_matrix(test.labels, pred, n_cls).tolist()
    metrics = {"method": meta["method"], "k": ks, "accuracy": acc, "macro_f1": f1,
               "confusion": cms, "label_names": meta["label_names"]}
    if args.metrics_out:
        fio.dump_json(metrics, args.metrics_out)
    if args.curves_out:
        _write_csv(args.curves_out, ["k", "accuracy", "macro_f1"], zip(ks, acc, f1))
        if not args.no_figures:
            from .plotting import plot_metric_curves

            plot_metric_curves(ks, {"accuracy": acc, "macro F1": f1}, _figure_path(args.curves_out),
                               title=meta["method"].upper())
    _print_json({"k": ks, "accuracy": acc, "macro_f1": f1})
    return 0


def parse_rank_grid(path, order: int):
    """Rank grid file: either ``{"spatial": [...], "continuous": [...]}`` (the
    spatial rank is shared by every discrete mode) or a list of rank tuples.
    Returns ``(row_labels, col_labels, cells)`` with ``cells[i][j]`` a rank tuple."""
    _require_file(path, "rank grid file")
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: invalid JSON ({exc})") from None
    if isinstance(doc, dict):
        if set(doc) != {"spatial", "continuous"}:
            raise UsageError(f"{path}: expected keys 'spatial' and 'continuous'")
        sp = [int(v) for v in doc["spatial"]]
        co = [int(v) for v in doc["continuous"]]
        if not sp or not co:
            raise UsageError(f"{path}: empty rank axis")
        cells = [[(s,) * (order - 1) + (c,) for c in co] for s in sp]
        return [str(s) for s in sp], [str(c) for c in co], cells
    if isinstance(doc, list) and doc:
        cells = [[tuple(int(v) for v in r)] for r in doc]
        return ["x".join(map(str, r[0])) for r in cells], ["ranks"], cells
    raise UsageError(f"{path}: rank grid must be an object or a non-empty list")


def cmd_cv(args) -> int:
    if args.folds < 2:
        raise UsageError("--folds must be >= 2")
    _require_file(args.manifest, "manifest")
    data = fio.read_manifest(args.manifest)
    if args.grid_idx:
        data = dg.subsample(data, parse_index_spec(args.grid_idx, data.grid.size, "--grid-idx"))
    order = len(data.sample_shape)
    rows, cols, cells = parse_rank_grid(args.rank_grid, order)
    flat = [r for row in cells for r in row]
    for ranks in flat:
        if len(ranks) != order or any(not 1 <= r <= n for r, n in zip(ranks, data.sample_shape)):
            raise UsageError(f"rank tuple {ranks} invalid for samples of shape {data.sample_shape}")
    ks = parse_ints(args.k_list, "--k-list")
    sizes = [data.labels.count(c) for c in data.classes]
    if min(sizes) < args.folds:
        raise UsageError(f"a class has {min(sizes)} samples, fewer than {args.folds} folds")
    smallest_train = min(n - -(-n // args.folds) for n in sizes)
    if min(ks) < 1 or max(ks) >= smallest_train:
        raise UsageError(f"k must lie in [1, {smallest_train - 1}] for these folds")

    scores = cl.cross_validate(data, flat, ks, folds=args.folds, seed=args.seed)
    n_cols = len(cols)
    out_rows = []
    for j, k in enumerate(ks):
        for i, lab in enumerate(rows):
            out_rows.append((str(k), lab, *[float(scores[i * n_cols + c, j]) for c in range(n_cols)]))
    _write_csv(args.out, ["k", "row", *cols], out_rows)
    if not args.no_figures:
        from .plotting import plot_cv_heatmap

        for j, k in enumerate(ks):
            grid = scores[:, j].reshape(len(rows), n_cols)
            path = Path(args.out).with_name(f"{Path(args.out).stem}_k{k}.png")
            plot_cv_heatmap(grid, rows, cols, path, title=f"k = {k}")
    _print_json({"out": str(args.out), "cells": len(flat), "k": ks,
                 "best": float(scores.max())})
    return 0


def cmd_experiment_digits(args) -> int:
    cfg = ExperimentConfig.from_json(args.config) if args.config else ExperimentConfig()
    if args.seed is not None:
        cfg = ExperimentConfig(**{**cfg.__dict__, "seed": args.seed})
    result = run_digits(cfg)
    write_results(result, args.out_dir, figures=not args.no_figures)
    _print_json({"out_dir": str(args.out_dir), "means": result["means"]})
    return 0


# -- parser -----------------------------------------------------------------

def _add_ftd_flags(p, defaults_tau=1e-8):
    p.add_argument("--lambda", dest="lam", type=float, default=1.0, help="regularization weight")
    p.add_argument("--bandwidth", type=float, default=4.0, help="Gaussian kernel bandwidth")
    p.add_argument("--tau", type=float, default=defaults_tau, help="stopping tolerance")
    p.add_argument("--max-iters", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ftucker", description="Functional Tucker decomposition toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate the synthetic digit dataset")
    p.add_argument("--classes", type=int, default=10)
    p.add_argument("--per-class", type=int, default=48)
    p.add_argument("--size", default="16", help="image size N or HxW")
    p.add_argument("--p", type=int, default=50, help="continuous-mode grid points")
    p.add_argument("--noise", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("decompose", help="HOSVD or FTD of one tensor file")
    p.add_argument("--method", choices=("hosvd", "ftd"), default="ftd")
    p.add_argument("--ranks", required=True, help="comma-separated ranks, one per mode")
    _add_ftd_flags(p)
    p.add_argument("--in", dest="input", required=True, help="DTF1 tensor file")
    p.add_argument("--grid", dest="points", help="continuous-mode design points")
    p.add_argument("--grid-file")
    p.add_argument("--out", required=True, help="model JSON")
    p.add_argument("--trace-out", help="CSV of per-sweep relative error and objective")
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("interpolate", help="evaluate an FTD model on new points")
    p.add_argument("--model", required=True)
    p.add_argument("--points")
    p.add_argument("--grid-file")
    p.add_argument("--out", required=True, help="DTF1 tensor file")
    p.add_argument("--fiber", action="append", help="discrete indices i,j of a fiber to dump")
    p.add_argument("--fiber-out", help="fiber CSV (default: <out>_fibers.csv)")
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_interpolate)

    p = sub.add_parser("classify", help="subspace classification")
    csub = p.add_subparsers(dest="stage", required=True)

    def common(q):
        q.add_argument("--manifest", required=True)
        q.add_argument("--model-dir", required=True)
        q.add_argument("--seed", type=int, default=0, help="split seed")
        q.add_argument("--train-fraction", type=float)

    q = csub.add_parser("train")
    common(q)
    q.add_argument("--method", choices=("hosvd", "ftd"), default="hosvd")
    q.add_argument("--ranks", required=True, help="ranks of the non-sample modes")
    q.add_argument("--k", type=int, help="validated against class sizes")
    q.add_argument("--train-grid-idx", help="0-based indices, e.g. 0:50:4")
    q.add_argument("--lambda", dest="lam", type=float, default=1.0)
    q.add_argument("--bandwidth", type=float, default=4.0)
    q.add_argument("--tau", type=float, default=1e-6)
    q.add_argument("--max-iters", type=int, default=50)
    q.set_defaults(func=cmd_classify_train)

    for stage, func in (("predict", cmd_classify_predict), ("eval", cmd_classify_eval)):
        q = csub.add_parser(stage)
        common(q)
        q.add_argument("--test-grid-idx", help="0-based indices, e.g. 0:13")
        q.add_argument("--part", choices=("test", "train", "all"), default="test",
                       help="which part of the split to use (all when no split was made)")
        q.add_argument("--k", type=int, required=stage == "predict")
        q.set_defaults(func=func)
        if stage == "predict":
            q.add_argument("--out", required=True, help="predictions CSV")
        else:
            q.add_argument("--k-list", default="1:16", help="k values as an index spec")
            q.add_argument("--metrics-out")
            q.add_argument("--curves-out")
            q.add_argument("--no-figures", action="store_true")

    p = sub.add_parser("cv", help="cross-validated HOSVD classification over a rank grid")
    p.add_argument("--manifest", required=True)
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--rank-grid", required=True, help="JSON rank grid file")
    p.add_argument("--k-list", required=True)
    p.add_argument("--grid-idx", help="restrict the continuous mode first")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_cv)

    p = sub.add_parser("experiment", help="end-to-end experiments")
    esub = p.add_subparsers(dest="name", required=True)
    q = esub.add_parser("digits", help="equal vs. transfer domain on synthetic digits")
    q.add_argument("--seed", type=int)
    q.add_argument("--config", help="ExperimentConfig JSON")
    q.add_argument("--out-dir", required=True)
    q.add_argument("--no-figures", action="store_true")
    q.set_defaults(func=cmd_experiment_digits)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, fio.FormatError, FileNotFoundError) as exc:
        print(f"ftucker: error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001
        print(f"ftucker: unexpected error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
