import hashlib
import json
import subprocess
import sys

import numpy as np
import pytest

from volevent import crosssection as cx
from volevent.cli import main
from volevent.marketdata import read_cases, read_prices


def run(*args):
    return main([str(a) for a in args])


def digest(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


@pytest.fixture(scope="module")
def null_data(tmp_path_factory):
    d = tmp_path_factory.mktemp("null")
    assert run("simulate", "--out", d, "--seed", 0, "--set", "simulate.K=60",
               "--set", "simulate.groups=state", "--set", "simulate.T=1200") == 0
    return d


def data_flags(d):
    return ["--set", f"data.prices={d / 'prices.csv'}", "--set", f"data.cases={d / 'cases.csv'}"]


def test_simulate_shape(tmp_path):
    assert run("simulate", "--out", tmp_path, "--set", "simulate.K=20", "--set", "simulate.T=1200") == 0
    prices = read_prices(tmp_path / "prices.csv")
    cases = read_cases(tmp_path / "cases.csv")
    tickers = [c.ticker for c in cases]
    assert len(cases) == 20
    assert all(len(prices[t]) == 1200 for t in tickers)
    assert len(prices["MKT"]) == 1200
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["command"] == "simulate" and len(manifest["inputs"]) == 2


def test_simulate_seed_reuse(tmp_path):
    for sub in ("a", "b"):
        assert run("simulate", "--out", tmp_path / sub, "--seed", 4, "--set", "simulate.K=5",
                   "--set", "simulate.T=800") == 0
    for name in ("prices.csv", "cases.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_study_null(null_data, tmp_path, capsys):
    before = {p.name: digest(p) for p in null_data.glob("*.csv")}
    assert run("study", *data_flags(null_data), "--out", tmp_path,
               "--set", "bootstrap.replications=200") == 0
    table = (tmp_path / "table2.csv").read_text().splitlines()
    assert table[0] == "group,window,CAV,pct_vol,p_val,p_val_boot"
    rows = [line.split(",") for line in table[1:]]
    assert len(rows) == 5
    for row in rows:
        assert abs(float(row[-3])) < 0.15
    assert len(list((tmp_path / "cav").glob("state_*.json"))) == 5
    paths = (tmp_path / "cav_paths.csv").read_text().splitlines()
    assert len(paths) == 1 + 5 + 11 + 21 + 51 + 76
    assert {p.name: digest(p) for p in null_data.glob("*.csv")} == before
    assert "CAV" in capsys.readouterr().out


def test_study_window_and_group_flags(null_data, tmp_path):
    assert run("study", *data_flags(null_data), "--out", tmp_path, "--window=-1w,+1w",
               "--group", "state", "--set", "bootstrap.replications=50") == 0
    res = json.loads((tmp_path / "cav" / "state_m1w_p1w.json").read_text())
    assert res["L"] == 11 and res["K"] == 60 and res["chi2_df"] == 59 * 11


def test_missing_price_file(tmp_path, caplog):
    rc = run("study", "--set", f"data.prices={tmp_path / 'absent.csv'}",
             "--set", f"data.cases={tmp_path / 'absent_cases.csv'}")
    assert rc == 2


def test_missing_price_file_message(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "volevent.cli", "study", "--set", f"data.prices={tmp_path / 'nope.csv'}",
         "--set", f"data.cases={tmp_path / 'nope.csv'}"],
        capture_output=True, text=True,
    )
    assert proc.returncode == 2
    assert str(tmp_path / "nope.csv") in proc.stderr
    assert proc.stdout == ""


def test_config_errors(tmp_path):
    assert run("study", "--set", "bootstrap.reps=3") == 2
    cfg = tmp_path / "c.yaml"
    cfg.write_text("seed: [1, 2\n")
    assert run("study", "--config", cfg) == 2


def test_malformed_data_exit_code(tmp_path):
    (tmp_path / "p.csv").write_text("date,ticker,adj_close\n2020-01-01,MKT,x\n")
    (tmp_path / "c.csv").write_text(
        "case_id,ticker,outcome_date,registration_date,outcome_group,amount_claimed,amount_awarded\n"
    )
    assert run("study", "--set", f"data.prices={tmp_path / 'p.csv'}",
               "--set", f"data.cases={tmp_path / 'c.csv'}") == 3


def test_config_file(null_data, tmp_path):
    cfg = tmp_path / "run.yaml"
    cfg.write_text(
        f"data:\n  prices: {null_data / 'prices.csv'}\n  cases: {null_data / 'cases.csv'}\n"
        "bootstrap:\n  replications: 20\nwindows: ['-2d,+2d']\nseed: 3\n"
    )
    assert run("study", "--config", cfg, "--out", tmp_path / "o") == 0
    manifest = json.loads((tmp_path / "o" / "manifest.json").read_text())
    assert manifest["config"]["bootstrap.replications"] == 20
    assert manifest["seed"] == 3
    assert set(manifest["inputs"].values()) == {digest(null_data / "prices.csv"), digest(null_data / "cases.csv")}


def test_fit_command(null_data, tmp_path, capsys):
    assert run("fit", "C001", *data_flags(null_data), "--out", tmp_path) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["converged"] and out["case_id"] == "C001"
    assert out["estimation_range"][1] - out["estimation_range"][0] == 499
    assert run("fit", "NOPE", *data_flags(null_data)) == 3


@pytest.fixture(scope="module")
def regress_data(tmp_path_factory):
    d = tmp_path_factory.mktemp("reg")
    effects = '{"IE": 0.7, "CO": -0.5}'
    assert run("simulate", "--out", d, "--seed", 1, "--set", "simulate.K=80",
               "--set", "simulate.T=1000", "--set", "simulate.groups=investor;state",
               "--set", "simulate.market_sd=0.0001", "--set", f"simulate.feature_effects={effects}") == 0
    return d


def test_regress_matches_oracle(regress_data, tmp_path):
    assert run("regress", *data_flags(regress_data), "--out", tmp_path) == 0
    res = json.loads((tmp_path / "regression.json").read_text())
    cases = {c.case_id: c for c in read_cases(regress_data / "cases.csv")}
    rows = [cx.case_features(cases[cid]).row() for cid in res["case_ids"]]
    X, y = np.array(rows), np.array(res["response"])
    beta, *_ = np.linalg.lstsq(X, y, rcond=None)
    np.testing.assert_allclose(res["estimates"], beta, rtol=1e-8, atol=1e-10)
    assert res["adj_r2"] <= 1
    est = dict(zip(res["names"], res["estimates"]))
    se = dict(zip(res["names"], res["std_errors"]))
    assert abs(est["IE"] - 0.7) < 3 * se["IE"]
    assert abs(est["CO"] + 0.5) < 3 * se["CO"]
    assert "Std. Error" in (tmp_path / "regression.txt").read_text()


def test_regress_too_few(tmp_path):
    d = tmp_path / "d"
    assert run("simulate", "--out", d, "--set", "simulate.K=8", "--set", "simulate.T=800",
               "--set", "simulate.groups=state") == 0
    assert run("regress", *data_flags(d), "--out", tmp_path / "o") == 4
