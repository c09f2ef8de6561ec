"""Command-line interface, configuration and output writers."""

import csv
import json
import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from fraclane.io import cli, outputs
from fraclane.io.config import ConfigError, RunConfig, build_config, load_config, parse_config_text

FAST = ["--set", "ball_N=100", "--set", "target_sup=200", "--set", "T=12", "--set", "h=0.1",
        "--set", "lambdas=1e-5"]


def _rows(text):
    return list(csv.reader(text.strip().splitlines()))


def test_constants_json(capsys):
    assert cli.main(["constants", "--n", "3", "--s", "0.5", "--p", "3"]) == 0
    d = json.loads(capsys.readouterr().out)
    assert set(d) == {"beta", "ds", "hardy", "stable", "pJL", "tau0"}
    assert d["beta"] == pytest.approx(0.5, abs=1e-12)
    assert d["ds"] == pytest.approx(-1.0, abs=1e-12)
    assert d["hardy"] == pytest.approx(2 / math.pi, abs=1e-10)
    assert d["stable"] is False and d["pJL"] is None


def test_constants_stable_case_has_pjl(capsys):
    assert cli.main(["constants", "--n", "10", "--s", "0.5", "--p", "4"]) == 0
    d = json.loads(capsys.readouterr().out)
    assert d["stable"] is True and d["pJL"] > 1


def test_subcritical_p_exit_2(capsys):
    assert cli.main(["constants", "--n", "3", "--s", "0.5", "--p", "1.5"]) == 2
    assert "(n+2s)/(n-2s)" in capsys.readouterr().err


def test_indicial_rows(capsys):
    assert cli.main(["indicial", "--modes", "2,0,1"]) == 0
    rows = _rows(capsys.readouterr().out)
    assert rows[0] == cli.INDICIAL_HEADER
    body = rows[1:]
    assert [int(r[0]) for r in body] == [0, 1, 2]
    m0, m1 = body[0], body[1]
    assert {float(m0[1]), float(m0[2])} == {0.0, -2.0}
    assert m0[3] == "complex"
    assert sorted([float(m1[1]), float(m1[2])]) == pytest.approx([-3.0, 1.0], abs=1e-10)
    assert any(abs(float(x) + 1.5) <= 1e-10 for x in m1[4:6])


def test_kernel_command(tmp_path, capsys):
    assert cli.main(["kernel", "--mode", "1", "--out", str(tmp_path)]) == 0
    info = json.loads(capsys.readouterr().out)
    assert info["mode"] == 1
    assert (tmp_path / "kernel_m1.csv").exists() and (tmp_path / "kernel_m1.json").exists()


def test_solve_ball_outputs(tmp_path):
    assert cli.main(["solve-ball", "--out", str(tmp_path), *FAST]) == 0
    rows = _rows((tmp_path / "branch.csv").read_text())
    assert rows[0] == ["arcLength", "lambda", "supNorm"]
    assert float(rows[-1][2]) >= 200
    assert _rows((tmp_path / "ball_profile.csv").read_text())[0] == ["r", "w"]
    info = json.loads((tmp_path / "ball.json").read_text())
    assert info["blow_up"]["variant"] == "scaled"


def test_missing_out_dir_created(tmp_path, capsys):
    out = tmp_path / "a" / "b"
    assert cli.main(["kernel", "--out", str(out)]) == 0
    assert (out / "kernel_m0.csv").exists()


def test_unwritable_out_exit_2(tmp_path, capsys):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert cli.main(["kernel", "--out", str(blocker / "sub")]) == 2
    assert "not writable" in capsys.readouterr().err


def test_out_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("FRACLANE_OUT", str(tmp_path / "env"))
    assert RunConfig().out == str(tmp_path / "env")
    assert cli.main(["kernel"]) == 0
    assert (tmp_path / "env" / "kernel_m0.json").exists()


def test_pipeline_manifest(tmp_path):
    out = tmp_path / "run"
    assert cli.main(["pipeline", "--out", str(out), "--plots", *FAST]) == 0
    man = json.loads((out / "manifest.json").read_text())
    assert man["status"] == "complete" and man["error"] is None
    assert man["stages"] == ["constants", "kernels", "branch", "entire", "linearized", "perturbation"]
    files = {p.name for p in out.iterdir()} - {"manifest.json"}
    assert set(man["files"]) == files
    for name, digest in man["files"].items():
        assert outputs.sha256(out / name) == digest
    for svg in ("profile.svg", "branch.svg", "hamiltonian.svg", "sweep.svg"):
        assert (out / svg).read_text().startswith("<svg")
    assert _rows((out / "sweep.csv").read_text())[0] == ["lambda", "phiStarNorm", "uSupNorm", "iterations",
                                                         "residual"]
    assert man["config"]["ball_N"] == 100 and "out" not in man["config"]


def test_pipeline_failure_records_prefix(tmp_path, monkeypatch, capsys):
    def broken(*a, **k):
        raise ArithmeticError("Newton did not converge")
    monkeypatch.setattr(cli, "stage_entire", broken)
    out = tmp_path / "bad"
    assert cli.main(["pipeline", "--out", str(out), *FAST]) == 1
    man = json.loads((out / "manifest.json").read_text())
    assert man["status"] == "failed"
    assert man["stages"] == ["constants", "kernels", "branch"]
    assert "Newton" in man["error"]


def test_unknown_key_exit_2(capsys):
    assert cli.main(["constants", "--set", "colour=red"]) == 2
    assert "unknown config key" in capsys.readouterr().err


@pytest.mark.parametrize("item", ["T=abc", "lambdas=0.1,0.2", "rho=-1", "mu=0.5", "plots=maybe", "noequals"])
def test_bad_values_exit_2(item, capsys):
    assert cli.main(["constants", "--set", item]) == 2


def test_config_file_and_override(tmp_path):
    f = tmp_path / "run.cfg"
    f.write_text("# reference\nn = 4\ns = 0.75  # order\np = 4\nlambdas = 0.1, 0.01\n\nplots = yes\n")
    cfg = load_config(f, {"p": "5"})
    assert (cfg.n, cfg.s, cfg.p) == (4, 0.75, 5.0)
    assert cfg.lambdas == (0.1, 0.01) and cfg.plots is True


def test_config_bad_line():
    with pytest.raises(ConfigError, match="line 2"):
        parse_config_text("n = 3\njunk\n")


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "none.cfg")


@given(st.integers(3, 12), st.floats(0.05, 0.95), st.floats(0.5, 30.0),
       st.lists(st.floats(1e-6, 1.0), min_size=0, max_size=5, unique=True))
def test_config_text_round_trip(n, s, extra, lams):
    p = (n + 2 * s) / (n - 2 * s) + extra
    lams = sorted(lams, reverse=True)
    text = f"n = {n}\ns = {outputs.fmt(s)}\np = {outputs.fmt(p)}\nlambdas = {' '.join(outputs.fmt(x) for x in lams)}\n"
    cfg = build_config(parse_config_text(text))
    assert (cfg.n, cfg.s, cfg.p) == (n, s, p)
    assert cfg.lambdas == tuple(lams)


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_fmt_round_trips(x):
    assert float(outputs.fmt(x)) == x


def test_json_nan_is_null():
    assert json.loads(outputs.dumps({"a": float("nan"), "b": [1, 2.5]})) == {"a": None, "b": [1, 2.5]}
