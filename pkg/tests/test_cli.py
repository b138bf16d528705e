import csv
import json
import os
import subprocess
import sys

import numpy as np
import pytest

from transco.cli import main
from transco.dataio import write_dataset_csv
from transco.ipod import Dataset

SMALL = {"example_id": "Ex1", "n": 60, "p": 20, "K": 3, "s": 10, "N": 150, "rho": 0.1, "h": 6,
         "w": [1.5, 0.75, -1.25], "grid_size": 12, "trials": 3}


@pytest.fixture
def clean_csv(tmp_path, rng):
    X = rng.standard_normal((40, 3))
    f = tmp_path / "clean.csv"
    write_dataset_csv(f, Dataset(X, X @ np.array([1.0, -2.0, 0.5])), response="yy")
    return f


@pytest.fixture
def small_config(tmp_path):
    f = tmp_path / "small.json"
    f.write_text(json.dumps(SMALL))
    return f


def run(argv, capsys):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_fit_ipod_clean(clean_csv, capsys):
    code, out, _ = run(["fit", "--data", clean_csv, "--response", "yy", "--method", "ipod"], capsys)
    assert code == 0
    report = json.loads(out)
    assert report["detected"] == [] and report["p"] == 3
    np.testing.assert_allclose(report["beta_hat"], [1.0, -2.0, 0.5], atol=1e-10)
    assert report["bic_path"]["grid_size"] == 41 and "converged" in report


def test_fit_ols_writes_file(clean_csv, tmp_path, capsys):
    out = tmp_path / "r.json"
    code, _, _ = run(["fit", "--data", clean_csv, "--response", "yy", "--method", "ols",
                      "--out", out], capsys)
    assert code == 0 and "detected" not in json.loads(out.read_text())


def test_transfer_methods_need_sources(clean_csv, capsys):
    for method in ("transco", "ptl"):
        code, _, err = run(["fit", "--data", clean_csv, "--response", "yy", "--method", method],
                           capsys)
        assert code == 2 and "--sources" in err


def test_invalid_inputs_exit_2(clean_csv, tmp_path, capsys):
    base = ["fit", "--data", clean_csv, "--response", "yy", "--method", "ipod"]
    assert run(base + ["--tol", "0"], capsys)[0] == 2
    assert run(base + ["--grid-size", "1"], capsys)[0] == 2
    assert run(["fit", "--data", tmp_path / "none.csv", "--response", "yy", "--method", "ipod"],
               capsys)[0] == 2
    assert run(["fit", "--data", clean_csv, "--response", "zz", "--method", "ipod"], capsys)[0] == 2
    with pytest.raises(SystemExit) as exc:
        main(["fit", "--data", str(clean_csv), "--response", "yy", "--method", "lasso"])
    assert exc.value.code == 2
    capsys.readouterr()


def test_numerical_failure_exit_1(tmp_path, capsys):
    f = tmp_path / "dup.csv"
    f.write_text("a,b,y\n" + "".join(f"{i},{2 * i},{i % 3}\n" for i in range(10)))
    code, _, err = run(["fit", "--data", f, "--response", "y", "--method", "ols"], capsys)
    assert code == 1 and "rank" in err


def test_tune_path(clean_csv, tmp_path, capsys, rng):
    X = rng.standard_normal((50, 2))
    Y = X @ np.ones(2) + rng.standard_normal(50)
    Y[:3] += 10
    data = tmp_path / "d.csv"
    write_dataset_csv(data, Dataset(X, Y))
    out = tmp_path / "path.csv"
    code, stdout, _ = run(["tune", "--data", data, "--response", "y", "--method", "ipod",
                           "--grid-size", "20", "--out", out], capsys)
    assert code == 0
    rows = list(csv.DictReader(open(out)))
    assert len(rows) == 21 and int(rows[0]["df"]) == 0
    bic = [float(r["bic"]) for r in rows]
    assert json.loads(stdout)["best_index"] == int(np.argmin(bic))
    with pytest.raises(SystemExit) as exc:
        main(["tune", "--data", str(data), "--response", "y", "--method", "ols", "--out", str(out)])
    assert exc.value.code == 2


def test_generate_then_fit_transco(small_config, tmp_path, capsys):
    f1 = {"ipod": [], "transco": []}
    for seed in range(4):
        d = tmp_path / f"g{seed}"
        assert run(["generate", "--config", small_config, "--seed", seed, "--out", d], capsys)[0] == 0
        truth = json.loads((d / "truth.json").read_text())
        assert sorted(os.listdir(d)) == ["source1.csv", "source2.csv", "source3.csv",
                                         "target.csv", "truth.json"]
        planted = set(truth["outliers_target"])
        for method in f1:
            argv = ["fit", "--data", d / "target.csv", "--response", "y", "--method", method]
            if method == "transco":
                argv += ["--sources"] + [d / f"source{k}.csv" for k in (1, 2, 3)]
            code, out, _ = run(argv, capsys)
            assert code == 0
            found = {e["index"] for e in json.loads(out)["detected"]}
            tp = len(found & planted)
            f1[method].append(2 * tp / (len(found) + len(planted)))
    assert np.mean(f1["transco"]) >= np.mean(f1["ipod"])


def test_evaluate(clean_csv, capsys):
    code, out, _ = run(["evaluate", "--data", clean_csv, "--response", "yy", "--method", "ols"],
                       capsys)
    rep = json.loads(out)
    assert code == 0 and rep["n_test"] == 12 and rep["n_train"] == 28
    assert rep["huber"] == pytest.approx(0, abs=1e-12) and rep["r2"] == pytest.approx(1.0)
    assert run(["evaluate", "--data", clean_csv, "--response", "yy", "--method", "ols",
                "--test-fraction", "1.5"], capsys)[0] == 2


def test_simulate_outputs(small_config, tmp_path, capsys):
    out = tmp_path / "sim"
    code, _, _ = run(["simulate", "--config", small_config, "--seed", "3", "--out", out,
                      "--methods", "ipod,transco,ptl,ols"], capsys)
    assert code == 0
    rows = list(csv.DictReader(open(out / "records.csv")))
    assert [r["method"] for r in rows[:4]] == ["IPOD", "TransCO", "PTL", "OLS"]
    assert len(rows) == 12 and {r["seed"] for r in rows} == {"3"}
    summary = open(out / "records_summary.csv").read().splitlines()
    assert summary[0].startswith("#") and len(summary) == 2 + 4
    plot = list(csv.DictReader(open(out / "plot_data.csv")))
    assert len(plot) == 12 and set(plot[0]) == {"method", "n", "trial", "log_mse"}


def test_simulate_deterministic(small_config, tmp_path, capsys):
    outs = []
    for i, par in enumerate(("1", "1", "2")):
        d = tmp_path / f"s{i}"
        assert run(["simulate", "--config", small_config, "--trials", "2", "--out", d,
                    "--methods", "ipod,ols", "--parallel", par], capsys)[0] == 0
        outs.append((d / "records.csv").read_bytes())
    assert outs[0] == outs[1] == outs[2]


def test_simulate_bad_input(small_config, tmp_path, capsys):
    d = tmp_path / "x"
    assert run(["simulate", "--config", small_config, "--out", d, "--methods", "foo"], capsys)[0] == 2
    assert run(["simulate", "--config", small_config, "--out", d, "--trials", "0"], capsys)[0] == 2
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(dict(SMALL, rho=1.5)))
    assert run(["simulate", "--config", bad, "--out", d], capsys)[0] == 2


def test_console_script_and_log_env(clean_csv):
    env = dict(os.environ, TRANSCO_LOG="debug")
    proc = subprocess.run([sys.executable, "-m", "transco.cli", "fit", "--data", str(clean_csv),
                           "--response", "yy", "--method", "ipod"],
                          capture_output=True, text=True, env=env)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["detected"] == []
