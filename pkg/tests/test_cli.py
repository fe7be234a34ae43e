import json
import subprocess
import sys

import pytest
from click.testing import CliRunner

from nearcol.cli import main
from nearcol.core import NumericFailure
from nearcol.io import read_csv


@pytest.fixture
def run():
    runner = CliRunner()

    def invoke(*args):
        return runner.invoke(main, [str(a) for a in args])

    return invoke


def _json(text):
    return json.loads(text)


def test_kepler_oracle_pericentre(run):
    r = run("kepler-oracle", "--theta0", 1, "--t", 0)
    assert r.exit_code == 0
    out = _json(r.stdout)
    assert out["schema_version"] == "1"
    assert (out["r"], out["R"], out["Theta"]) == (0.5, 0.0, 1.0)


def test_kepler_oracle_several_times(run):
    out = _json(run("kepler-oracle", "--theta0", 0.5, "--t", 1, "--t", 2).stdout)
    assert [s["t"] for s in out["states"]] == [1.0, 2.0]


def test_parameter_error_exit_code(run):
    r = run("kepler-oracle", "--theta0", 3, "--t", 1)
    assert r.exit_code == 2
    err = _json(r.stderr)
    assert err["error"] == "ParameterError" and err["module"] == "kepler"


def test_energy_flags_exclusive(run):
    r = run("curve-sun", "--mu", 1e-4, "--h", -1, "--h0", -0.5, "-n", 4)
    assert r.exit_code == 2
    assert "exclusive" in _json(r.stderr)["message"]


def test_numeric_failure_exit_code(run, monkeypatch):
    import nearcol.localjup as lj

    def broken(*a, **k):
        raise NumericFailure("forced")

    monkeypatch.setattr(lj, "jupiter_manifold_curve", broken)
    r = run("curve-jup", "--mu", 1e-4, "--h", -1, "-n", 4)
    assert r.exit_code == 3
    assert _json(r.stderr)["message"] == "forced"


def test_curve_jup_csv(run, tmp_path):
    out = tmp_path / "c.csv"
    r = run("curve-jup", "--mu", 1e-4, "--h", -1, "-n", 16, "--out", out)
    assert r.exit_code == 0
    text = out.read_text()
    assert text.startswith("# schema_version=1\ntheta,R,Theta\n")
    header, rows = read_csv(out)
    assert header == ["theta", "R", "Theta"] and rows.shape == (16, 3)


def test_csv_deterministic_across_threads(run):
    a = run("--threads", 1, "curve-jup", "--mu", 1e-4, "--h", -1, "-n", 12).stdout
    b = run("--threads", 3, "curve-jup", "--mu", 1e-4, "--h", -1, "-n", 12).stdout
    assert a == b


def test_print_config_and_precedence(run, tmp_path):
    cfg = tmp_path / "cfg.toml"
    cfg.write_text('[global]\nthreads = 2\nseed = 7\n\n[curve-jup]\nmu = 1e-4\nh = -1.0\nn = 8\n')
    out = _json(run("--config", cfg, "curve-jup", "--print-config").stdout)
    assert out["threads"] == 2 and out["seed"] == 7
    assert out["params"]["mu"] == 1e-4 and out["params"]["n"] == 8
    out = _json(run("--config", cfg, "--threads", 1, "curve-jup", "-n", 5, "--print-config").stdout)
    assert out["threads"] == 1 and out["params"]["n"] == 5


def test_json_config(run, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"kepler-oracle": {"Theta0": 1.0, "times": [0.0]}}))
    out = _json(run("--config", cfg, "kepler-oracle").stdout)
    assert out["r"] == 0.5


def test_threads_env(run, monkeypatch):
    monkeypatch.setenv("NEARCOL_THREADS", "5")
    out = _json(run("hj-solve", "--mu", 1e-4, "--print-config").stdout)
    assert out["threads"] == 5


def test_hj_solve_summary(run):
    out = _json(run("hj-solve", "--mu", 1e-4, "--K", 8, "--nodes", 200).stdout)
    assert out["residual"] < 1e-6 and out["norm"] > 0


def test_classify_single_point(run):
    r = run("classify", "--mu", 1e-3, "--h", 1.0, "--r", 1.0, "--theta", 2.0, "--Theta", 0.2)
    assert r.exit_code == 0
    assert _json(r.stdout)["tag"] == "Hyperbolic"


def test_classify_ensemble_seeded(run):
    a = run("--seed", 3, "classify", "--mu", 0, "--ensemble", 5, "--horizon", 100).stdout
    b = run("--seed", 3, "classify", "--mu", 0, "--ensemble", 5, "--horizon", 100).stdout
    assert a == b
    lines = a.splitlines()
    assert lines[1] == "h,theta,Theta,tag,r_max,r_min,terminal_speed,excursions,t_end"
    assert len(lines) == 7


def test_classify_needs_point(run):
    assert run("classify", "--mu", 1e-3).exit_code == 2


def test_acceptance_unknown_criterion(run):
    assert run("acceptance", "--only", 13).exit_code == 2


def test_acceptance_single_fast_criterion(run, tmp_path):
    out = tmp_path / "acc.json"
    r = run("acceptance", "--only", 1, "--out", out)
    assert r.exit_code == 0
    assert r.stdout.startswith("criterion  1 PASS")
    assert _json(out.read_text())["results"][0]["passed"] is True


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "nearcol", "--help"], capture_output=True, text=True)
    assert r.returncode == 0 and "ec-search" in r.stdout
