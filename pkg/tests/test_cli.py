import json
from pathlib import Path

import pytest

from ell_lab import reports
from ell_lab.cli import run

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"

EXPECTED_EXIT = {"check-hypotheses.lv_n6.conf": 1, "means.subharmonic_poly.conf": 1}


def scenario_files():
    return sorted(SCENARIOS.glob("*.conf"))


def command_of(path):
    return path.name.split(".")[0]


@pytest.fixture(autouse=True)
def no_env_out(monkeypatch):
    monkeypatch.delenv("ELL_LAB_OUT", raising=False)


@pytest.mark.parametrize("path", scenario_files(), ids=lambda p: p.name)
def test_shipped_scenarios(path, tmp_path):
    code = run([command_of(path), "--config", str(path), "--out", str(tmp_path)])
    assert code == EXPECTED_EXIT.get(path.name, 0)
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["schema"] == reports.SCHEMA and report["command"] == command_of(path)
    assert report["verdict"] == ("pass" if code == 0 else "fail")
    for art in report["results"]["artifacts"]:
        header, _ = reports.read_csv(tmp_path / art["file"])
        assert header == art["columns"]


def test_compute_k_reports_two(tmp_path):
    assert run(["compute-k", "--config", str(SCENARIOS / "compute-k.lv.conf"), "--out", str(tmp_path)]) == 0
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["results"]["certificate"]["K"] == 2.0


def test_lambda1_flags(tmp_path):
    code = run(["lambda1", "--domain", "box", "--sides", "1", "1", "--h", "0.0078125", "--out", str(tmp_path)])
    assert code == 0
    val = json.loads((tmp_path / "report.json").read_text())["results"]["lambda1"]
    assert abs(val - 19.74) <= 0.005 * 19.74


def test_failing_gate_report_names_gate(tmp_path):
    run(["check-hypotheses", "--config", str(SCENARIOS / "check-hypotheses.lv_n6.conf"), "--out", str(tmp_path)])
    report = json.loads((tmp_path / "report.json").read_text())
    gates = {g["name"]: g for g in report["results"]["gates"]["gates"]}
    g = gates["p_plus_q_subcritical"]
    assert g["verdict"] is False and g["value"] == 1.0 and g["threshold"] == 1.0
    header, rows = reports.read_csv(tmp_path / "gates.csv")
    assert ["p_plus_q_subcritical", "1.0", "1.0"] == rows[[r[0] for r in rows].index("p_plus_q_subcritical")][:3]


def test_empty_config_exit_2(tmp_path, capsys):
    cfg = tmp_path / "empty.conf"
    cfg.write_text("# nothing\n")
    assert run(["compute-k", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2


def test_unknown_key_named(tmp_path, capsys):
    code = run(["compute-k", "--config", str(SCENARIOS / "compute-k.lv.conf"), "--set", "zz=1",
                "--out", str(tmp_path)])
    assert code == 2
    assert "zz" in capsys.readouterr().err


def test_missing_key_exit_2(tmp_path, capsys):
    code = run(["compute-k", "--set", "n=3", "--set", "p=0", "--out", str(tmp_path)])
    assert code == 2
    assert "q" in capsys.readouterr().err


def test_bad_value_exit_2(tmp_path):
    code = run(["barrier", "--set", "n=3", "--set", "p=0.5", "--set", "C=1", "--out", str(tmp_path)])
    assert code == 2


def test_unknown_command_exit_2():
    assert run(["frobnicate"]) == 2


def test_unwritable_output(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    code = run(["compute-k", "--config", str(SCENARIOS / "compute-k.lv.conf"), "--out", str(blocker / "sub")])
    assert code == 2


def test_env_overrides_out(tmp_path, monkeypatch):
    monkeypatch.setenv("ELL_LAB_OUT", str(tmp_path / "env"))
    run(["compute-k", "--config", str(SCENARIOS / "compute-k.lv.conf"), "--out", str(tmp_path / "flag")])
    assert (tmp_path / "env" / "report.json").exists()
    assert not (tmp_path / "flag").exists()


def test_set_overrides_config(tmp_path):
    run(["compute-k", "--config", str(SCENARIOS / "compute-k.lv.conf"), "--set", "a=5", "--out", str(tmp_path)])
    K = json.loads((tmp_path / "report.json").read_text())["results"]["certificate"]["K"]
    assert K == pytest.approx(3.0)


def test_monte_carlo_seed_changes_output(tmp_path):
    base = ["means", "--set", "n=4", "--set", "field=x_n", "--set", "radii=1 2"]
    run(base + ["--seed", "1", "--out", str(tmp_path / "a")])
    run(base + ["--seed", "1", "--out", str(tmp_path / "b")])
    run(base + ["--seed", "2", "--out", str(tmp_path / "c")])
    a, b, c = ((tmp_path / k / "means.csv").read_bytes() for k in "abc")
    assert a == b and a != c
