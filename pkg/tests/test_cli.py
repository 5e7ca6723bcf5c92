import csv
import json
import subprocess
import sys

import pytest

from qdnls.cli import config_hash, main


def _write(tmp_path, cfg, name="c.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return str(p)


def _rows(path):
    with open(path) as fh:
        lines = [l for l in fh if not l.startswith("#")]
    return list(csv.DictReader(lines))


@pytest.fixture
def bump_cfg(tmp_path):
    return _write(tmp_path, {"profile": {"type": "bump", "amplitude": 0.3},
                             "grids": {"k": {"n": 20}, "zeta": [0.5, 1.0, 1.5], "t": [50, 100, 200]}})


def test_zero_profile_all_subcommands(tmp_path):
    cfg = _write(tmp_path, {"profile": {"type": "zero"}, "grids": {"k": {"n": 10}}})
    out = str(tmp_path / "out")
    for cmd in ("scatter", "asymptote", "verify", "bounds"):
        assert main([cmd, "--config", cfg, "--out", out]) == 0, cmd
    rows = _rows(tmp_path / "out" / "reflection.csv")
    assert rows and all(float(r["abs_r"]) == 0.0 for r in rows)
    verify = json.loads((tmp_path / "out" / "verify.json").read_text())
    assert verify["passed"]


def test_scatter_then_asymptote(tmp_path, bump_cfg):
    out = tmp_path / "o"
    assert main(["scatter", "--config", bump_cfg, "--out", str(out)]) == 0
    rows = _rows(out / "reflection.csv")
    assert {r["branch"] for r in rows} == {"pos", "neg"}
    assert all(float(r["abs_r"]) < 1 for r in rows)
    assert main(["asymptote", "--config", bump_cfg, "--out", str(out)]) == 0
    assert len(_rows(out / "asymptotics.csv")) == 9


def test_missing_upstream(tmp_path, bump_cfg):
    assert main(["asymptote", "--config", bump_cfg, "--out", str(tmp_path / "empty")]) == 2


def test_nan_file_rejected(tmp_path):
    (tmp_path / "bad.csv").write_text("x,re_q,im_q\n0,0,0\n1,nan,0\n2,0,0\n")
    cfg = _write(tmp_path, {"profile": {"type": "file", "path": "bad.csv"}})
    assert main(["scatter", "--config", cfg, "--out", str(tmp_path / "o")]) == 2


@pytest.mark.parametrize("cfg", [{"profile": {"type": "gaussian", "amplitude": -1}},
                                 {"profile": {"type": "nope"}},
                                 {"grids": {"zeta": [1.0, 0.5]}},
                                 {"profile": {"type": "file", "path": "missing.csv"}}])
def test_invalid_configs(tmp_path, cfg):
    assert main(["scatter", "--config", _write(tmp_path, cfg), "--out", str(tmp_path / "o")]) == 2


def test_deterministic_outputs(tmp_path, bump_cfg):
    for d in ("a", "b"):
        assert main(["scatter", "--config", bump_cfg, "--out", str(tmp_path / d), "--threads", "2"]) == 0
    for f in ("reflection.csv", "scatter_meta.json"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_config_hash_recorded(tmp_path, bump_cfg):
    out = tmp_path / "o"
    main(["scatter", "--config", bump_cfg, "--out", str(out)])
    meta = json.loads((out / "scatter_meta.json").read_text())
    first = (out / "reflection.csv").read_text().splitlines()[0]
    assert first == f"# config_hash: {meta['config_hash']}"
    assert config_hash({"a": 1}) != config_hash({"a": 1}, 2.0)
    assert config_hash({"a": 1, "b": 2}) == config_hash({"b": 2, "a": 1})


def test_evolve_small(tmp_path):
    cfg = _write(tmp_path, {"profile": {"type": "gaussian", "amplitude": 0.3},
                            "evolution": {"L": 40.0, "n_modes": 1024, "dt": 0.005, "T": 0.1,
                                          "snapshot_times": [0.0, 0.1]}})
    out = tmp_path / "o"
    assert main(["evolve", "--config", cfg, "--out", str(out)]) == 0
    summary = json.loads((out / "evolve_summary.json").read_text())
    assert summary["mass_drift"] < 1e-8
    assert len(list((out / "snapshots").glob("q_t*.csv"))) == 2


def test_bounds_bump(tmp_path):
    cfg = _write(tmp_path, {"profile": {"type": "bump", "amplitude": 1.0},
                            "grids": {"k_bounds": [-2.0, -1.0, 0.0], "x_bounds": {"start": -5, "stop": 5, "num": 41}}})
    out = tmp_path / "o"
    assert main(["bounds", "--config", cfg, "--out", str(out)]) == 0
    assert json.loads((out / "bounds.json").read_text())["passed"]
    assert len(_rows(out / "bounds.csv")) == 3


def test_bad_tolerance_scale(tmp_path):
    assert main(["scatter", "--out", str(tmp_path), "--tolerance-scale", "0"]) == 2


def test_console_entry_point(tmp_path):
    cfg = _write(tmp_path, {"profile": {"type": "zero"}, "grids": {"k": {"n": 4}}})
    res = subprocess.run([sys.executable, "-m", "qdnls.cli", "scatter", "--config", cfg, "--out", str(tmp_path)],
                         capture_output=True, text=True)
    assert res.returncode == 0, res.stderr
