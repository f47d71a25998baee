import io
import re
from pathlib import Path

import numpy as np
import pytest

from ifrf.cli import run
from ifrf.data import load_csv

DATA = Path(__file__).parent / "data"
IRIS = str(DATA / "iris.csv")


def call(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = run([str(a) for a in argv], out, err)
    return code, out.getvalue(), err.getvalue()


def test_fuzzify_report(tmp_path):
    code, out, _ = call("fuzzify", "--input", IRIS, "--clusters", 3, "--shape", 5, "--hesitation", 0.8, "--dump-partitions", "--output", tmp_path / "cells.csv")
    assert code == 0
    assert "rows=150 features=4 classes=3" in out
    assert out.count("centers=") == 4
    lines = (tmp_path / "cells.csv").read_text().splitlines()
    assert lines[0] == "row,feature,partition,u,v,pi,E"
    assert len(lines) == 1 + 150 * 4 * 3


def test_train_predict_round_trip(tmp_path):
    model = tmp_path / "m.ifrf"
    args = ["train", "--input", IRIS, "--trees", 10, "--max-depth", 10, "--min-samples", 1, "--clusters", 3, "--shape", 2, "--scheme", 2, "--seed", 5, "--model", model]
    code, out, _ = call(*args)
    assert code == 0 and model.read_text().startswith("IFRF/1\n")
    first = model.read_bytes()
    assert call(*args)[0] == 0
    assert model.read_bytes() == first

    preds = tmp_path / "p.txt"
    code, out, _ = call("predict", "--model", model, "--input", IRIS, "--output", preds)
    assert code == 0
    labels = preds.read_text().splitlines()
    d = load_csv(IRIS)
    truth = [d.class_names[y] for y in d.labels]
    train_acc = 100 * np.mean([a == b for a, b in zip(labels, truth)])

    code, out, _ = call("evaluate", "--input", IRIS, "--folds", 5, "--trees", 10, "--max-depth", 10, "--min-samples", 1, "--clusters", 3, "--shape", 2, "--scheme", 2, "--seed", 5)
    cv_acc = float(re.search(r"accuracy ([\d.]+)", out).group(1))
    assert train_acc >= cv_acc


def test_evaluate_example_in_band(tmp_path):
    csv_out = tmp_path / "results.csv"
    argv = ["evaluate", "--input", IRIS, "--folds", 5, "--trees", 100, "--clusters", 3, "--seed", 7, "--output", csv_out]
    code, out, _ = call(*argv)
    assert code == 0
    mean, std = map(float, re.search(r"accuracy ([\d.]+) \+/- ([\d.]+)", out).groups())
    assert mean >= 93.3
    call(*argv)
    rows = csv_out.read_text().splitlines()
    assert rows[0].startswith("dataset,model,scheme")
    assert len(rows) == 3 and rows[1] == rows[2]


def test_evaluate_with_noise_and_tree_model():
    code, out, _ = call("evaluate", "--input", IRIS, "--folds", 3, "--noise", 0.3, "--model-type", "tree", "--clusters", 3)
    assert code == 0 and "accuracy" in out


def test_grid_search_prints_configuration(tmp_path):
    grid = tmp_path / "g.txt"
    grid.write_text("C=2,3\nd_beta=3,5\n")
    code, out, _ = call("grid-search", "--input", IRIS, "--grid", grid, "--inner-folds", 3, "--model-type", "tree")
    assert code == 0
    assert re.search(r"selected C=[23]", out)


def test_nested_evaluate(tmp_path):
    grid = tmp_path / "g.txt"
    grid.write_text("C=2,3\n")
    code, out, _ = call("evaluate", "--input", IRIS, "--folds", 3, "--grid", grid, "--inner-folds", 3, "--model-type", "tree")
    assert code == 0
    assert out.count("fold ") == 3


def test_compare_tree_benchmark(tmp_path):
    code, out, _ = call("compare", "--matrix", DATA / "tree_benchmark.csv", "--control", "IFDT", "--output", tmp_path / "r.csv")
    assert code == 0
    ranked = [line.split()[0] for line in out.splitlines() if re.match(r"^\S+\s+\d\.\d{4}$", line)]
    assert ranked[:2] == ["CIGRA", "IFDT"]
    assert "p = 0.019" in out
    table = (tmp_path / "r.csv").read_text().splitlines()
    assert table[0] == "algorithm,mean_rank,p_value,holm_threshold,reject"
    assert len(table) == 10


@pytest.mark.parametrize(
    "argv",
    [
        ["bogus"],
        ["train", "--input", IRIS],
        ["train", "--input", IRIS, "--model", "m", "--frobnicate"],
        ["train", "--input", IRIS, "--model", "m", "--scheme", "3"],
        ["train", "--input", IRIS, "--model", "m", "--shape", "1"],
        ["train", "--input", "/nonexistent.csv", "--model", "m"],
        ["evaluate", "--input", IRIS, "--noise", "1.5"],
        ["evaluate", "--input", IRIS, "--folds", "1"],
        ["compare", "--matrix", IRIS, "--alpha", "2"],
        ["grid-search", "--input", IRIS, "--grid", "/nonexistent"],
    ],
)
def test_validation_errors_exit_2(argv, tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    code, _, err = call(*argv)
    assert code == 2
    assert err
    assert not (tmp_path / "m").exists()


def test_bad_grid_file_exit_2(tmp_path):
    grid = tmp_path / "g.txt"
    grid.write_text("C=2.5\n")
    assert call("grid-search", "--input", IRIS, "--grid", grid)[0] == 2


def test_runtime_failure_exit_1_leaves_no_model(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("a,class\n")
    model = tmp_path / "m.ifrf"
    code, _, err = call("train", "--input", bad, "--model", model)
    assert code == 1 and "zero data rows" in err
    assert not model.exists()


def test_corrupt_model_exit_1(tmp_path):
    model = tmp_path / "m.ifrf"
    model.write_text("not a model\n")
    code, _, _ = call("predict", "--model", model, "--input", IRIS, "--output", tmp_path / "p.txt")
    assert code == 1
    assert not (tmp_path / "p.txt").exists()
