import json
import math
import subprocess
import sys

import pytest

from halfwave.cli import UsageError, dispatch, load_config
from halfwave.lifespan import LifespanRecord, records_to_csv

SMALL_SIM = ["--set", "sim.N=256", "--set", "sim.L=32", "--set", "sim.T_max=60", "--set", "sim.confirm=false"]


def listing(path):
    return sorted(p.relative_to(path).as_posix() for p in path.rglob("*"))


def test_unknown_verb_exits_2(capsys):
    assert dispatch(["frobnicate"]) == 2


def test_missing_config_names_path(tmp_path, capsys):
    missing = tmp_path / "missing.cfg"
    assert dispatch(["sweep", "--config", str(missing), "--output-dir", str(tmp_path / "o")]) == 2
    assert str(missing) in capsys.readouterr().err
    assert not (tmp_path / "o").exists()


def test_bad_override_exits_2(tmp_path, capsys):
    assert dispatch(["simulate", "--set", "sim.nope=1", "--output-dir", str(tmp_path)]) == 2
    assert dispatch(["simulate", "--set", "novalue", "--output-dir", str(tmp_path)]) == 2
    assert dispatch(["simulate", "--set", "sim.dt=abc", "--output-dir", str(tmp_path)]) == 2


def test_config_file_and_overrides(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# comment\nsim.dt = 0.1\nsweep.epsilons=0.4, 0.2  # trailing\n")
    out = load_config(str(cfg), ["sim.dt=0.2"])
    assert out["sim.dt"] == "0.2"
    assert out["sweep.epsilons"] == "0.4, 0.2"
    cfg.write_text("sim.dt\n")
    with pytest.raises(UsageError):
        load_config(str(cfg))


def test_verify_identities(tmp_path, capsys):
    assert dispatch(["verify-identities", "--n-max", "10", "--output-dir", str(tmp_path), "--quiet"]) == 0
    report = json.loads((tmp_path / "identities.json").read_text())
    assert report["pass"] and len(report["c0"]) == 10
    assert capsys.readouterr().out == ""


def test_fraclap_is_idempotent_and_confined(tmp_path):
    args = ["fraclap", "--set", "fraclap.points=0;1.5", "--quiet"]
    assert dispatch(args + ["--output-dir", str(tmp_path / "a")]) == 0
    assert dispatch(args + ["--output-dir", str(tmp_path / "b")]) == 0
    assert listing(tmp_path) == ["a", "a/fraclap.json", "b", "b/fraclap.json"]
    assert (tmp_path / "a" / "fraclap.json").read_bytes() == (tmp_path / "b" / "fraclap.json").read_bytes()
    rows = json.loads((tmp_path / "a" / "fraclap.json").read_text())["rows"]
    assert rows[0]["value"] == pytest.approx(rows[0]["closed_form"], rel=1e-6)
    assert rows[1]["value"] == pytest.approx((1 - 2.25) / 3.25**2, rel=1e-6)


def test_simulate(tmp_path):
    assert dispatch(["simulate", "--output-dir", str(tmp_path), "--quiet", "--set", "sim.epsilon=0.5"] + SMALL_SIM) == 0
    report = json.loads((tmp_path / "simulate.json").read_text())
    assert report["status"] == "blew_up"
    assert (tmp_path / "trace.csv").read_text().startswith("t,sup_norm,l2_norm\n")


def test_sweep_then_fit(tmp_path):
    args = ["sweep", "--output-dir", str(tmp_path), "--quiet", "--set", "sweep.epsilons=1,0.5,0.25,0.1"] + SMALL_SIM
    assert dispatch(args) == 0
    lines = (tmp_path / "lifespan.csv").read_text().splitlines()
    assert len(lines) == 5
    assert (tmp_path / "lifespan_critical_exp.json").exists()
    assert dispatch(["fit", "--output-dir", str(tmp_path), "--quiet"]) == 0
    fit = json.loads((tmp_path / "fit_critical_exp.json").read_text())
    assert fit["details"]["envelope_holds"]


def test_fit_reports_failure_on_degenerate_data(tmp_path):
    recs = [LifespanRecord(e, 1.0 / e, "blew_up", 0.1, 64, 8.0, 1e6, 0.0, 2.0, 1) for e in (0.5, 0.4, 0.3, 0.2)]
    (tmp_path / "r.csv").write_text(records_to_csv(recs))
    assert dispatch(["fit", "--set", f"fit.records={tmp_path / 'r.csv'}", "--output-dir", str(tmp_path), "--quiet"]) == 1
    assert dispatch(["fit", "--set", f"fit.records={tmp_path / 'nope.csv'}", "--output-dir", str(tmp_path)]) == 2


def test_odi(tmp_path):
    args = ["odi", "--output-dir", str(tmp_path), "--quiet", "--set", "odi.epsilon=0.5", "--set", "odi.r_points=16"]
    assert dispatch(args + SMALL_SIM) == 0
    report = json.loads((tmp_path / "odi.json").read_text())
    assert all(report["checks"].values())
    assert math.isfinite(report["C"])


def test_module_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "halfwave", "verify-identities", "--n-max", "3", "--output-dir", str(tmp_path)],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0
    assert "c0(3)" in proc.stdout
