import subprocess
import sys

import numpy as np
import pandas as pd
import pytest

from betashrink.cli import EXIT_DATA, EXIT_NUMERIC, EXIT_OK, main, read_flat_config

from test_pipeline import synthetic_frame


@pytest.fixture
def data_csv(tmp_path):
    path = tmp_path / "data.csv"
    synthetic_frame(n=120).to_csv(path, index=False, float_format="%.17g")
    return path


def test_fit_writes_table(data_csv, tmp_path, capsys):
    out = tmp_path / "t.csv"
    code = main(["fit", "--data", str(data_csv), "--response", "y", "--inactive", "x3,x4,x5,x6",
                 "--alpha", "0.05", "--bootstrap", "20", "--seed", "42", "--out", str(out)])
    assert code == EXIT_OK
    df = pd.read_csv(out)
    assert list(df.columns) == ["variable", "estimator", "coef", "se"]
    assert len(df) == 8 * 7
    text = capsys.readouterr().out
    assert "trigamma" in text and "condition number" in text


def test_fit_is_byte_deterministic(data_csv, tmp_path):
    outs = []
    for i in range(2):
        out = tmp_path / f"t{i}.csv"
        main(["fit", "--data", str(data_csv), "--response", "y", "--inactive", "x5,x6",
              "--bootstrap", "10", "--seed", "3", "--out", str(out), "-q"])
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]


def test_fit_data_errors(tmp_path, data_csv):
    assert main(["fit", "--data", str(tmp_path / "missing.csv"), "--response", "y"]) == EXIT_DATA
    bad = tmp_path / "bad.csv"
    df = pd.read_csv(data_csv)
    df.loc[0, "y"] = 1.0
    df.to_csv(bad, index=False)
    assert main(["fit", "--data", str(bad), "--response", "y", "-q"]) == EXIT_DATA
    assert main(["fit", "--data", str(data_csv), "--response", "y", "--inactive", "zz"]) == EXIT_DATA


def test_fit_numerical_failure(tmp_path, data_csv):
    df = pd.read_csv(data_csv)
    df["dup"] = df["x0"]
    path = tmp_path / "dup.csv"
    df.to_csv(path, index=False)
    assert main(["fit", "--data", str(path), "--response", "y", "-q"]) == EXIT_NUMERIC


def test_fit_from_config(tmp_path, data_csv):
    cfg = tmp_path / "fit.cfg"
    out = tmp_path / "c.csv"
    cfg.write_text(f"data = {data_csv}\nresponse = y\ninactive = x5, x6\n"
                   f"delta = optimize\nout = {out}\n")
    assert main(["fit", "--config", str(cfg), "-q"]) == EXIT_OK
    assert out.exists()


def test_flat_config_parsing(tmp_path):
    p = tmp_path / "c.cfg"
    p.write_text("# comment\nn = 50\nrho = 0.6  # inline\nbeta1 = 1.0, -2.0\nname = abc\n"
                 "flag = true\n")
    cfg = read_flat_config(p)
    assert cfg == {"n": 50, "rho": 0.6, "beta1": (1.0, -2.0), "name": "abc", "flag": True}


def test_simulate(tmp_path):
    cfg = tmp_path / "sim.cfg"
    cfg.write_text("n = 60\np2 = 4\nrho = 0.5\nreps = 8\ndelta_grid = 0, 2\nseed = 1\n")
    fig = tmp_path / "fig.csv"
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path),
                 "--figure-data", str(fig)]) == EXIT_OK
    first = (tmp_path / "rmse.csv").read_bytes()
    assert first.splitlines()[0] == b"delta,estimator,rmse,reps_used"
    assert fig.exists()
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path)]) == EXIT_OK
    assert (tmp_path / "rmse.csv").read_bytes() == first


def test_simulate_rejects_unknown_key(tmp_path):
    cfg = tmp_path / "sim.cfg"
    cfg.write_text("n = 60\nbogus = 1\n")
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path)]) == EXIT_DATA


def test_asymptotics(tmp_path):
    out = tmp_path / "a.csv"
    assert main(["asymptotics", "--k", "0.5", "--form", "derived", "--out", str(out)]) == EXIT_OK
    df = pd.read_csv(out)
    assert list(df.estimator) == ["UR", "RR", "RLS", "RPT", "SPE", "RS", "RPS"]
    assert [c for c in df.columns if c.startswith("bias_")] == [f"bias_{j}" for j in range(1, 7)]
    assert np.all(df[[f"var_{j}{j}" for j in range(1, 7)]].to_numpy() >= 0)


def test_console_script(tmp_path):
    res = subprocess.run([sys.executable, "-m", "betashrink.cli", "asymptotics"],
                         capture_output=True, text=True, check=True)
    assert res.stdout.startswith("estimator,bias_1")
