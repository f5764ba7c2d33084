import csv
import json

import numpy as np
import pytest

from lpflux import cli

CONFIG = """\
field:
  eps: "1/8"
  eps0: "1/8"
  q_min: 3
  q_max: 6
norms:
  p_list: [2, 3]
"""


@pytest.fixture
def cfg_path(tmp_path):
    p = tmp_path / "run.yaml"
    p.write_text(CONFIG)
    return p


def _run(*argv):
    return cli.main([str(a) for a in argv])


def _rows(path):
    with open(path) as fh:
        return list(csv.reader(fh))


def test_build_uses_cache(cfg_path, tmp_path, capsys):
    out, cache = tmp_path / "out", tmp_path / "cache"
    assert _run("build", "--config", cfg_path, "--out", out, "--cache", cache) == 0
    assert "cache: 0 hits, 12 misses" in capsys.readouterr().out
    assert _run("build", "--config", cfg_path, "--out", out, "--cache", cache) == 0
    assert "cache: 12 hits, 0 misses" in capsys.readouterr().out
    rows = _rows(out / "build.csv")
    assert rows[0][:3] == ["q", "plane", "eps_lam"] and len(rows) == 5


def test_full_pipeline_and_report(cfg_path, tmp_path):
    out, cache = tmp_path / "out", tmp_path / "cache"
    common = ["--config", cfg_path, "--out", out, "--cache", cache]
    assert _run("flux", *common) == 0
    flux_rows = _rows(out / "flux.csv")
    assert len(flux_rows) == 2 and flux_rows[1][0] == "6"
    assert _run("norms", *common) == 0
    assert len(_rows(out / "norms.csv")) == 1 + 4 * 2
    assert _run("verify", *common) == 1  # the N_eps gate clause fails for this construction
    verify = json.loads((out / "verify.json").read_text())
    assert {r["name"] for r in verify["reports"]} >= {"bounds", "sumset", "near_field", "sq_identity"}
    assert _run("report", *common) == 1
    rep1 = (out / "report.json").read_bytes()
    report = json.loads(rep1)
    assert {"flux", "norms", "verify"} <= set(report["results"])
    for f in report["plot_files"]:
        path = out / f
        assert path.exists()
        if f.endswith(".dat"):
            data = np.loadtxt(path, ndmin=2)
            assert data.shape[1] == 2
    assert (out / "plots" / "flux.png").exists() and (out / "plots" / "besov.png").exists()
    assert _run("report", *common) == 1
    assert (out / "report.json").read_bytes() == rep1
    timings = json.loads((out / "timings.json").read_text())
    assert {"flux", "norms", "verify", "report"} <= set(timings)


def test_target_c_band(cfg_path, tmp_path):
    out = tmp_path / "out"
    code = _run("flux", "--config", cfg_path, "--out", out, "--cache", tmp_path / "c", "--target-c", "1", "--delta", "0.3")
    data = json.loads((out / "flux.json").read_text())
    assert data["amplitude_scale"] < 0
    assert all("inside_band" in r for r in data["rows"])
    assert code == (0 if all(r["inside_band"] and r["decomposition_ok"] for r in data["rows"]) else 1)


def test_bad_inputs_exit_2(cfg_path, tmp_path):
    out = tmp_path / "o"
    assert _run("build", "--eps", "1/2", "--out", out) == 2
    assert _run("build", "--eps", "abc", "--out", out) == 2
    bad = tmp_path / "bad.yaml"
    bad.write_text("field:\n  eps: 0.125\n")
    assert _run("build", "--config", bad, "--out", out) == 2
    bad.write_text("nonsense: 1\n")
    assert _run("build", "--config", bad, "--out", out) == 2
    assert _run("build", "--config", tmp_path / "missing.yaml", "--out", out) == 2
    assert _run("report", "--config", cfg_path, "--out", tmp_path / "empty") == 2
    assert _run("flux", "--config", cfg_path, "--qmin", "5", "--qmax", "4", "--out", out) == 2


def test_budget_exit_3(cfg_path, tmp_path):
    assert _run("flux", "--config", cfg_path, "--budget", "10", "--out", tmp_path / "o", "--cache", tmp_path / "c") == 3


def test_env_overrides_and_flag_precedence(cfg_path, tmp_path, monkeypatch):
    monkeypatch.setenv("LPFLUX_OUT", str(tmp_path / "env-out"))
    monkeypatch.setenv("LPFLUX_CACHE", str(tmp_path / "env-cache"))
    assert _run("build", "--config", cfg_path) == 0
    assert (tmp_path / "env-out" / "build.csv").exists()
    assert any((tmp_path / "env-cache").iterdir())
    assert _run("build", "--config", cfg_path, "--out", tmp_path / "flag-out") == 0
    assert (tmp_path / "flag-out" / "build.csv").exists()


def test_config_hash_ignores_paths_and_threads(cfg_path, tmp_path):
    p = cli.build_parser()
    a = cli.load_config(p.parse_args(["flux", "--config", str(cfg_path), "--out", str(tmp_path / "a"), "--threads", "1"]))
    b = cli.load_config(p.parse_args(["flux", "--config", str(cfg_path), "--out", str(tmp_path / "b"), "--threads", "4"]))
    c = cli.load_config(p.parse_args(["flux", "--config", str(cfg_path), "--qmax", "7"]))
    assert a.config_hash == b.config_hash != c.config_hash
    assert a.spec.eps == b.spec.eps


def test_negative_control_flag(cfg_path, tmp_path):
    out = tmp_path / "o"
    assert _run("verify", "--config", cfg_path, "--negative-control", "no-rotation", "--out", out, "--cache", tmp_path / "c") == 1
    data = json.loads((out / "verify.json").read_text())
    assert data["config"]["field"]["negative_control"] == "no-rotation"
    assert _run("verify", "--config", cfg_path, "--negative-control", "bogus", "--out", out) == 2
