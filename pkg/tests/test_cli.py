import hashlib
import json
from pathlib import Path

import numpy as np
import pytest

from ftucker import datagen as dg
from ftucker import io as fio
from ftucker.cli import main, parse_index_spec
from ftucker.kernel import KernelSpec


def run(*args):
    return main([str(a) for a in args])


def digest(folder: Path):
    return {p.relative_to(folder).as_posix(): hashlib.sha256(p.read_bytes()).hexdigest()
            for p in sorted(folder.rglob("*")) if p.is_file()}


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    out = tmp_path_factory.mktemp("ds")
    assert run("synth", "--classes", 3, "--per-class", 10, "--p", 20, "--seed", 7, "--out", out) == 0
    return out / "manifest.json"


@pytest.fixture(scope="module")
def planted(tmp_path_factory):
    out = tmp_path_factory.mktemp("planted")
    t, _ = dg.planted_ftd_instance((8, 7, 20), (3, 3, 2), KernelSpec("gaussian", 4.0), seed=1)
    fio.write_tensor(out / "t.dtf", t)
    (out / "grid.txt").write_text(" ".join(repr(float(x)) for x in np.linspace(1, 10, 20)))
    return out


def test_index_spec():
    assert parse_index_spec("0:50:4", 50) == list(range(0, 50, 4))
    assert parse_index_spec("0:13", 50) == list(range(13))
    assert parse_index_spec("1,3,5", 6) == [1, 3, 5]
    for bad in ("", "3,1", "0:60,70", "a"):
        with pytest.raises(ValueError):
            parse_index_spec(bad, 50)


def test_synth_counts(tmp_path):
    assert run("synth", "--classes", 10, "--per-class", 40, "--p", 50, "--seed", 7,
               "--out", tmp_path) == 0
    data = fio.read_manifest(tmp_path / "manifest.json")
    assert len(data) == 400 and data.sample_shape == (16, 16, 50)


def test_synth_usage_errors(tmp_path, capsys):
    assert run("synth", "--per-class", 0, "--out", tmp_path) == 2
    assert "per-class" in capsys.readouterr().err
    with pytest.raises(SystemExit) as exc:
        run("synth", "--bogus")
    assert exc.value.code == 2


def test_decompose_ftd(planted, tmp_path, capsys):
    rc = run("decompose", "--in", planted / "t.dtf", "--method", "ftd", "--ranks", "3,3,2",
             "--lambda", 1e-8, "--grid-file", planted / "grid.txt", "--out", tmp_path / "m.json",
             "--trace-out", tmp_path / "trace.csv")
    assert rc == 0
    report = json.loads(capsys.readouterr().out)
    assert report["relative_error"] <= 1e-4
    rows = np.loadtxt(tmp_path / "trace.csv", delimiter=",", skiprows=1, ndmin=2)
    assert np.all(np.diff(rows[:, 2]) <= 1e-9)
    assert (tmp_path / "trace.png").read_bytes()[:4] == b"\x89PNG"


def test_decompose_hosvd_full_rank(planted, tmp_path, capsys):
    assert run("decompose", "--in", planted / "t.dtf", "--method", "hosvd", "--ranks", "8,7,20",
               "--out", tmp_path / "h.json") == 0
    assert json.loads(capsys.readouterr().out)["relative_error"] <= 1e-9


@pytest.mark.parametrize("args", [
    ("--in", "missing.dtf", "--ranks", "1,1,1"),
    ("--ranks", "3,3,12"),
    ("--ranks", "3,3"),
    ("--ranks", "3,3,2", "--lambda", "-1"),
    ("--ranks", "3,3,2", "--grid", "1,2,3"),
])
def test_decompose_errors(planted, tmp_path, args):
    base = ["decompose", "--method", "ftd", "--out", tmp_path / "m.json"]
    if "--in" not in args:
        base += ["--in", planted / "t.dtf"]
    assert run(*base, *args) == 2


def test_interpolate(planted, tmp_path):
    model = tmp_path / "m.json"
    assert run("decompose", "--in", planted / "t.dtf", "--ranks", "3,3,2", "--lambda", 1e-8,
               "--grid-file", planted / "grid.txt", "--out", model) == 0
    assert run("interpolate", "--model", model, "--grid-file", planted / "grid.txt",
               "--out", tmp_path / "same.dtf") == 0
    m = fio.load_model(model)
    np.testing.assert_allclose(fio.read_tensor(tmp_path / "same.dtf"), m.reconstruct(), atol=1e-12)

    assert run("interpolate", "--model", model, "--points", "1.5,2.25,9", "--out",
               tmp_path / "x.dtf", "--fiber", "1,2", "--fiber", "0,0") == 0
    x = fio.read_tensor(tmp_path / "x.dtf")
    rows = np.loadtxt(tmp_path / "x_fibers.csv", delimiter=",", skiprows=1)
    np.testing.assert_array_equal(rows[:, 0], [1.5, 2.25, 9.0])
    np.testing.assert_array_equal(rows[:, 1], x[1, 2])
    assert (tmp_path / "x_fibers.png").exists()

    assert run("interpolate", "--model", model, "--points", "", "--out", tmp_path / "e.dtf") == 2
    assert run("interpolate", "--model", model, "--points", "3,2", "--out", tmp_path / "e.dtf") == 2
    assert run("interpolate", "--model", model, "--points", "1", "--fiber", "9,0",
               "--out", tmp_path / "e.dtf") == 2


def test_classify_roundtrip(dataset, tmp_path, capsys):
    for method in ("hosvd", "ftd"):
        md = tmp_path / method
        assert run("classify", "train", "--method", method, "--manifest", dataset, "--model-dir", md,
                   "--ranks", "5,5,2", "--train-fraction", 0.8, "--train-grid-idx", "0:20:2",
                   "--max-iters", 10) == 0
        assert run("classify", "eval", "--manifest", dataset, "--model-dir", md,
                   "--test-grid-idx", "0:20:2", "--k-list", "1:4",
                   "--metrics-out", tmp_path / f"{method}.json",
                   "--curves-out", tmp_path / f"{method}.csv") == 0
        metrics = json.loads((tmp_path / f"{method}.json").read_text())
        assert metrics["k"] == [1, 2, 3]
        assert min(metrics["accuracy"]) >= 0.9
        assert sum(map(sum, metrics["confusion"]["1"])) == 6
        assert run("classify", "predict", "--manifest", dataset, "--model-dir", md,
                   "--test-grid-idx", "0:20:2", "--k", 2, "--out", tmp_path / "p.csv") == 0
        assert len((tmp_path / "p.csv").read_text().splitlines()) == 7
    capsys.readouterr()


def test_classify_errors(dataset, tmp_path):
    md = tmp_path / "m"
    with pytest.raises(SystemExit) as exc:
        run("classify", "train", "--method", "svm", "--manifest", dataset, "--model-dir", md,
            "--ranks", "5,5,2")
    assert exc.value.code == 2
    assert run("classify", "train", "--manifest", dataset, "--model-dir", md, "--ranks", "5,5,2",
               "--train-grid-idx", "0:99,100") == 2
    assert run("classify", "train", "--manifest", dataset, "--model-dir", md, "--ranks", "5,5,2",
               "--k", 10) == 2
    assert run("classify", "train", "--manifest", dataset, "--model-dir", md, "--ranks", "5,5,2",
               "--train-fraction", 0.8) == 0
    assert run("classify", "predict", "--manifest", dataset, "--model-dir", md, "--k", 8,
               "--out", tmp_path / "p.csv") == 2
    # hosvd bases cannot be applied to samples with a different number of grid points
    assert run("classify", "eval", "--manifest", dataset, "--model-dir", md,
               "--test-grid-idx", "0:5") == 2


def test_cv(dataset, tmp_path):
    grid = tmp_path / "grid.json"
    grid.write_text(json.dumps({"spatial": [2, 5], "continuous": [1, 2]}))
    assert run("cv", "--manifest", dataset, "--folds", 5, "--rank-grid", grid, "--k-list", "1,3",
               "--out", tmp_path / "cv.csv") == 0
    lines = (tmp_path / "cv.csv").read_text().splitlines()
    assert lines[0] == "k,row,1,2" and len(lines) == 5
    assert (tmp_path / "cv_k1.png").exists()
    assert run("cv", "--manifest", dataset, "--folds", 1, "--rank-grid", grid, "--k-list", "1",
               "--out", tmp_path / "cv.csv") == 2
    assert run("cv", "--manifest", dataset, "--folds", 5, "--rank-grid", grid, "--k-list", "8",
               "--out", tmp_path / "cv.csv") == 2
    grid.write_text("[]")
    assert run("cv", "--manifest", dataset, "--rank-grid", grid, "--k-list", "1",
               "--out", tmp_path / "cv.csv") == 2


def test_experiment_small_config(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"num_classes": 3, "samples_per_class": 12, "p": 20,
                               "train_grid_idx": list(range(0, 20, 4)), "test_grid_idx": list(range(5)),
                               "k_values": [1, 2, 3], "max_iters": 5, "train_fraction": 0.75}))
    assert run("experiment", "digits", "--config", cfg, "--seed", 1, "--out-dir", tmp_path / "o") == 0
    summary = json.loads((tmp_path / "o" / "summary.json").read_text())
    for metric in ("accuracy", "macro_f1"):
        for domain in ("equal", "transfer"):
            assert len(summary["curves"][metric][domain]["ftd"]) == 3
            assert (tmp_path / "o" / f"{metric}_{domain}.csv").exists()
        assert (tmp_path / "o" / f"{metric}.png").exists()
    cfg.write_text(json.dumps({"lambda": -1}))
    assert run("experiment", "digits", "--config", cfg, "--out-dir", tmp_path / "o2") == 2
    cfg.write_text(json.dumps({"typo": 1}))
    assert run("experiment", "digits", "--config", cfg, "--out-dir", tmp_path / "o2") == 2
