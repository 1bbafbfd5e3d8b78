"""File formats.

DTF1 tensor files::

    b"DTF1" | order: uint8 | extents: order x uint64 LE | payload: float64 LE, column-major

Models are JSON documents whose arrays are embedded as base64-encoded DTF1
blocks. Datasets are described by a JSON manifest::

    {"grid": [x_1, ..., x_p],
     "classes": [{"label": "name", "samples": ["relative/or/absolute.dtf", ...]}, ...]}

Sample paths are resolved relative to the manifest's directory.
"""

from __future__ import annotations

import base64
import json
import struct
from pathlib import Path
from typing import List

import numpy as np

from .classify import ClassBasis, LabeledDataset
from .ftd import FtdModel
from .kernel import KernelSpec, as_grid
from .tucker import TuckerFactors

MAGIC = b"DTF1"
FORMAT_VERSION = 1


class FormatError(ValueError):
    pass


def tensor_to_bytes(t) -> bytes:
    t = np.asarray(t, dtype=np.float64)
    if t.ndim < 1 or t.ndim > 255:
        raise ValueError("DTF1 stores tensors of order 1..255")
    header = MAGIC + struct.pack("<B", t.ndim) + struct.pack(f"<{t.ndim}Q", *t.shape)
    payload = np.asarray(t.reshape(-1, order="F"), dtype="<f8").tobytes()
    return header + payload


def tensor_from_bytes(buf: bytes) -> np.ndarray:
    if len(buf) < 5 or buf[:4] != MAGIC:
        raise FormatError("not a DTF1 tensor (bad magic)")
    order = buf[4]
    if order < 1:
        raise FormatError("DTF1 order must be >= 1")
    hdr = 5 + 8 * order
    if len(buf) < hdr:
        raise FormatError("truncated DTF1 header")
    shape = struct.unpack(f"<{order}Q", buf[5:hdr])
    n = int(np.prod(shape))
    if len(buf) != hdr + 8 * n:
        raise FormatError(
            f"DTF1 payload holds {(len(buf) - hdr) / 8:g} values, header expects {n}"
        )
    data = np.frombuffer(buf, dtype="<f8", count=n, offset=hdr)
    return np.reshape(data.astype(np.float64), shape, order="F")


def write_tensor(path, t) -> None:
    Path(path).write_bytes(tensor_to_bytes(t))


def read_tensor(path) -> np.ndarray:
    return tensor_from_bytes(Path(path).read_bytes())


def _pack(a) -> str:
    return base64.b64encode(tensor_to_bytes(np.atleast_1d(a))).decode("ascii")


def _unpack(s: str) -> np.ndarray:
    return tensor_from_bytes(base64.b64decode(s))


def dump_json(obj, path) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


# -- models ---------------------------------------------------------------

def ftd_model_to_dict(m: FtdModel) -> dict:
    return {
        "type": "ftd",
        "version": FORMAT_VERSION,
        "kernel": m.kernel.to_dict(),
        "lambda": m.lam,
        "design": _pack(m.design),
        "core": _pack(m.core),
        "discrete_factors": [_pack(a) for a in m.discrete_factors],
        "weights": _pack(m.weights),
        "trace": [float(e) for e in m.trace],
        "objective_trace": [float(e) for e in m.objective_trace],
        "converged": bool(m.converged),
    }


def ftd_model_from_dict(d: dict) -> FtdModel:
    if d.get("type") != "ftd":
        raise FormatError(f"expected an ftd model, got {d.get('type')!r}")
    return FtdModel(
        core=_unpack(d["core"]),
        discrete_factors=[_unpack(a) for a in d["discrete_factors"]],
        weights=_unpack(d["weights"]),
        design=as_grid(_unpack(d["design"])),
        kernel=KernelSpec.from_dict(d["kernel"]),
        lam=float(d["lambda"]),
        trace=list(d.get("trace", [])),
        objective_trace=list(d.get("objective_trace", [])),
        converged=bool(d.get("converged", False)),
    )


def tucker_to_dict(f: TuckerFactors, grid=None) -> dict:
    out = {
        "type": "tucker",
        "version": FORMAT_VERSION,
        "core": _pack(f.core),
        "factors": [_pack(a) for a in f.factors],
    }
    if grid is not None:
        out["design"] = _pack(grid)
    return out


def tucker_from_dict(d: dict) -> TuckerFactors:
    if d.get("type") != "tucker":
        raise FormatError(f"expected a tucker model, got {d.get('type')!r}")
    return TuckerFactors(core=_unpack(d["core"]), factors=[_unpack(a) for a in d["factors"]])


def basis_to_dict(b: ClassBasis) -> dict:
    return {
        "type": "class_basis",
        "version": FORMAT_VERSION,
        "label": int(b.label),
        "elements": _pack(b.elements),
        "weights": None if b.weights is None else _pack(b.weights),
    }


def basis_from_dict(d: dict) -> ClassBasis:
    if d.get("type") != "class_basis":
        raise FormatError(f"expected a class basis, got {d.get('type')!r}")
    w = d.get("weights")
    return ClassBasis(label=int(d["label"]), elements=_unpack(d["elements"]),
                      weights=None if w is None else _unpack(w))


def save_model(obj, path, grid=None) -> None:
    if isinstance(obj, FtdModel):
        d = ftd_model_to_dict(obj)
    elif isinstance(obj, TuckerFactors):
        d = tucker_to_dict(obj, grid)
    elif isinstance(obj, ClassBasis):
        d = basis_to_dict(obj)
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")
    dump_json(d, path)


def load_model(path):
    d = json.loads(Path(path).read_text())
    kind = d.get("type")
    if kind == "ftd":
        return ftd_model_from_dict(d)
    if kind == "tucker":
        return tucker_from_dict(d)
    if kind == "class_basis":
        return basis_from_dict(d)
    raise FormatError(f"unknown model type {kind!r}")


# -- datasets -------------------------------------------------------------

def write_dataset(data: LabeledDataset, out_dir, name: str = "manifest.json") -> Path:
    """Write every sample as a DTF1 file plus a manifest; returns the manifest path."""
    out_dir = Path(out_dir)
    (out_dir / "samples").mkdir(parents=True, exist_ok=True)
    names = data.label_names or [str(c) for c in range(data.num_classes)]
    classes = []
    for c in data.classes:
        paths = []
        members = [i for i, lab in enumerate(data.labels) if lab == c]
        for j, i in enumerate(members):
            rel = f"samples/class{c:03d}_{j:05d}.dtf"
            write_tensor(out_dir / rel, data.samples[i])
            paths.append(rel)
        classes.append({"label": names[c], "samples": paths})
    manifest = {"grid": [float(x) for x in data.grid], "classes": classes}
    path = out_dir / name
    dump_json(manifest, path)
    return path


def read_manifest(path) -> LabeledDataset:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON ({exc})") from exc
    if "grid" not in doc or "classes" not in doc:
        raise FormatError(f"{path}: manifest needs 'grid' and 'classes'")
    grid = as_grid(doc["grid"])
    samples, labels, names = [], [], []
    for c, entry in enumerate(doc["classes"]):
        names.append(str(entry["label"]))
        if not entry.get("samples"):
            raise FormatError(f"class {entry['label']!r} lists no samples")
        for rel in entry["samples"]:
            f = Path(rel) if Path(rel).is_absolute() else path.parent / rel
            if not f.exists():
                raise FormatError(f"sample file {f} does not exist")
            t = read_tensor(f)
            if t.shape[-1] != grid.size:
                raise FormatError(
                    f"{f}: last extent {t.shape[-1]} does not match {grid.size} grid points"
                )
            samples.append(t)
            labels.append(c)
    return LabeledDataset(samples=samples, labels=labels, grid=grid, label_names=names)


def load_bases(paths) -> List[ClassBasis]:
    return [load_model(p) for p in paths]
