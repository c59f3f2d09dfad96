import json

import numpy as np
import pandas as pd
import pytest

from fincorr import cli, config

LABELS = ["A", "B", "C", "D", "E"]


@pytest.fixture(scope="module")
def small_run(tmp_path_factory):
    """Five markets, ~700 business days, one date with 2 of 5 markets closed."""
    d = tmp_path_factory.mktemp("run")
    rng = np.random.default_rng(7)
    dates = pd.bdate_range("2020-01-01", periods=700)
    common = rng.standard_normal(700)
    R = 0.01 * (0.6 * common + 0.8 * rng.standard_normal((5, 700)))
    prices = 100 * np.exp(np.cumsum(R, axis=1))
    df = pd.DataFrame(prices.T, columns=LABELS).astype(object)
    df.loc[100, ["A", "B"]] = ""
    df.loc[200, ["C"]] = ""
    df.insert(0, "date", dates.strftime("%Y-%m-%d"))
    df.to_csv(d / "prices.csv", index=False)
    cfg = config.RunConfig(seed=11, out="out")
    cfg.input.path = "prices.csv"
    cfg.periods = {"first": ["2020-01-01", "2021-01-01"], "second": ["2021-01-01", "2022-09-01"]}
    cfg.save(d / "run.toml")
    return d, dates


def _run(d, *args):
    return cli.run([*args, "--config", str(d / "run.toml")])


def test_ingest_reports_removed_date(small_run, capsys):
    d, dates = small_run
    assert _run(d, "ingest") == 0
    rep = json.loads((d / "out" / "ingest" / "ingest_report.json").read_text())
    assert rep["removed_dates"] == [dates[100].strftime("%Y-%m-%d")]
    assert rep["fill_counts"]["C"] == 1
    assert rep["n_returns"] == 698
    mask = pd.read_csv(d / "out" / "ingest" / "panel.mask.csv")
    assert mask["C"].sum() == 1


def test_full_pipeline_and_determinism(small_run, tmp_path):
    d, _ = small_run
    for cmd in ("ingest", "rmt", "network", "mfdfa"):
        assert _run(d, cmd) == 0
    out = d / "out"
    first = (out / "manifest.json").read_text()
    listed = {a["path"] for a in json.loads(first)["artifacts"]}
    on_disk = {p.relative_to(out).as_posix() for p in out.rglob("*") if p.is_file()} - {"manifest.json", "timings.json"}
    assert listed == on_disk

    traces = pd.read_csv(out / "rmt" / "traces.csv")
    comps = pd.read_csv(out / "rmt" / "traces_components.csv")
    assert len(traces) == 698 // 25
    ci = comps.groupby("window")["X_m"].sum()
    np.testing.assert_allclose(traces.set_index("window")["ci"], ci, rtol=1e-9)

    metrics = pd.read_csv(out / "network" / "metrics.csv")
    assert list(metrics.columns) == ["period", "theta", "mean_degree", "clustering", "components", "max_component", "max_clique"]
    for _, g in metrics.groupby("period"):
        g = g.sort_values("theta")
        assert np.all(np.diff(g["mean_degree"]) <= 0)
        assert np.all(np.diff(g["components"]) >= 0)
    for p in ("first", "second", "full"):
        assert len(pd.read_csv(out / "network" / f"mst_{p}.csv")) == len(LABELS) - 1
        summary = pd.read_csv(out / "mfdfa" / p / "summary.csv")
        assert list(summary.columns) == ["label", "variant", "H", "delta_h"]
        assert len(summary) == 3 * len(LABELS)
        table = pd.read_csv(out / "mfdfa" / p / "multifractality.csv")
        assert table["bmfm_a"].notna().all()

    # rerun everything into a fresh directory: identical manifest
    for cmd in ("ingest", "rmt", "network", "mfdfa"):
        assert cli.run([cmd, "--config", str(d / "run.toml"), "--out", str(tmp_path / "again")]) == 0
    assert (tmp_path / "again" / "manifest.json").read_text() == first


def test_report_renders_figures(small_run, capsys):
    d, _ = small_run
    for cmd in ("ingest", "rmt", "network"):
        assert _run(d, cmd) == 0
    assert _run(d, "report") == 0
    out = d / "out"
    assert (out / "rmt" / "largest_eigenvalues.png").stat().st_size > 0
    assert (out / "network" / "mst_full.png").exists()
    listed = json.loads((out / "manifest.json").read_text())["artifacts"]
    assert any(a["path"].endswith(".png") for a in listed)


def test_period_flag(small_run, tmp_path):
    d, _ = small_run
    assert cli.run(["network", "--config", str(d / "run.toml"), "--out", str(tmp_path), "--period", "first"]) == 0
    assert set(pd.read_csv(tmp_path / "network" / "metrics.csv")["period"]) == {"first"}
    assert cli.run(["network", "--config", str(d / "run.toml"), "--out", str(tmp_path), "--period", "nope"]) == 1


def test_input_errors(tmp_path, capsys):
    assert cli.run(["rmt"]) == 1
    assert cli.run(["rmt", "--config", str(tmp_path / "missing.toml")]) == 1
    (tmp_path / "bad.toml").write_text("seed = 'x'\n")
    assert cli.run(["ingest", "--config", str(tmp_path / "bad.toml")]) == 1
    (tmp_path / "c.toml").write_text('[input]\npath = "absent.csv"\n')
    assert cli.run(["ingest", "--config", str(tmp_path / "c.toml")]) == 1
    assert cli.run(["ingest", "--config", str(tmp_path / "c.toml"), "--seed", "-3"]) == 1
    assert "input error" in capsys.readouterr().err


def test_numerical_failure_exit_code(tmp_path, capsys):
    dates = pd.bdate_range("2020-01-01", periods=50).strftime("%Y-%m-%d")
    pd.DataFrame({"date": dates, "A": 100.0, "B": np.linspace(1, 2, 50)}).to_csv(tmp_path / "p.csv", index=False)
    (tmp_path / "c.toml").write_text('[input]\npath = "p.csv"\n')
    assert cli.run(["ingest", "--config", str(tmp_path / "c.toml"), "--out", str(tmp_path / "o")]) == 2
    assert "numerical failure" in capsys.readouterr().err


def test_seed_override_changes_config_hash(small_run, tmp_path):
    d, _ = small_run
    assert cli.run(["ingest", "--config", str(d / "run.toml"), "--out", str(tmp_path / "a")]) == 0
    assert cli.run(["ingest", "--config", str(d / "run.toml"), "--out", str(tmp_path / "b"), "--seed", "99"]) == 0
    ma = json.loads((tmp_path / "a" / "manifest.json").read_text())
    mb = json.loads((tmp_path / "b" / "manifest.json").read_text())
    assert ma["config_sha256"] != mb["config_sha256"]
    assert ma["artifacts"] == mb["artifacts"]
