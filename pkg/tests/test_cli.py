import json
import os

import pytest

from crmsim.cli import main

VIOLATION_YAML = """\
name: early-stop
plant: {b: [1.0], theta_star: [-2.0]}
reference_model: {A_m: [[-1.0]], ell: 10.0}
controller: {vartheta: 2.0, epsilon: 1.0, rho: 100.0}
sim:
  horizon: 0.05
  step: 0.001
  initial: {x: [2.0]}
"""

DIVERGING_YAML = """\
name: blowup
plant: {b: [1.0], theta_star: [-2.0]}
reference_model: {A_m: [[-1.0]], ell: 0.0}
controller: {vartheta: 2.0, epsilon: 1.0, gamma: 1.0e-30}
sim:
  horizon: 40.0
  step: 0.01
  initial: {x: [0.5]}
"""

GREEN_YAML = """\
name: quiet-tracking
plant: {b: [1.0], theta_star: [-2.0]}
reference_model: {A_m: [[-1.0]], ell: 10.0}
controller: {vartheta: 3.0, epsilon: 1.0, rho: 100.0}
signals:
  reference: {type: filtered_step, step_time: 10.0, amplitude: 1.0, tau: 1.0}
sim:
  horizon: 5.0
  step: 0.001
  initial: {x: [0.5]}
"""


def test_simulate_builtin_exit0(tmp_path, monkeypatch, capsys):
    monkeypatch.chdir(tmp_path)
    rc = main(["simulate", "waterbed_tuned"])
    assert rc == 0
    assert os.path.exists("waterbed_tuned.csv")
    with open("waterbed_tuned_report.json") as fh:
        report = json.load(fh)
    assert report["scenario"] == "waterbed_tuned"
    assert report["certification"]["passed"] is True
    assert report["ledger"]["rho"] == pytest.approx(100.0)
    assert capsys.readouterr().err == ""


def test_simulate_respects_config_output_paths(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    cfgfile = tmp_path / "run.yaml"
    cfgfile.write_text(
        GREEN_YAML + "outputs: {csv: custom.csv, report: custom.json}\n")
    rc = main(["simulate", str(cfgfile)])
    assert rc == 0
    assert os.path.exists("custom.csv")
    assert os.path.exists("custom.json")


def test_simulate_violation_exit2_with_outputs(tmp_path, monkeypatch, capsys):
    monkeypatch.chdir(tmp_path)
    cfgfile = tmp_path / "viol.yaml"
    cfgfile.write_text(VIOLATION_YAML)
    rc = main(["simulate", str(cfgfile), "--csv", "v.csv",
               "--report", "v.json"])
    assert rc == 2
    err = capsys.readouterr().err
    assert "bound violation: terminal_set" in err
    # outputs are still written so the violation can be inspected
    assert os.path.exists("v.csv")
    with open("v.json") as fh:
        report = json.load(fh)
    assert report["certification"]["passed"] is False


def test_simulate_divergence_exit1_no_outputs(tmp_path, monkeypatch, capsys):
    monkeypatch.chdir(tmp_path)
    cfgfile = tmp_path / "blow.yaml"
    cfgfile.write_text(DIVERGING_YAML)
    rc = main(["simulate", str(cfgfile), "--csv", "b.csv",
               "--report", "b.json"])
    assert rc == 1
    assert "diverged" in capsys.readouterr().err
    assert not os.path.exists("b.csv")
    assert not os.path.exists("b.json")


def test_simulate_bad_config_exit1(tmp_path, monkeypatch, capsys):
    monkeypatch.chdir(tmp_path)
    bad = tmp_path / "bad.yaml"
    bad.write_text("plant: [oops\n")
    assert main(["simulate", str(bad), "--csv", "x.csv"]) == 1
    assert "error:" in capsys.readouterr().err
    assert not os.path.exists("x.csv")
    assert main(["simulate", "no_such_builtin"]) == 1


def test_simulate_backend_flag(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    rc = main(["simulate", "cmracc_nominal", "--backend", "python",
               "--csv", "c.csv", "--report", "c.json"])
    assert rc == 0
    with open("c.json") as fh:
        assert json.load(fh)["kernel"] == "python"


def test_bounds_direct_scalar_values(tmp_path, monkeypatch, capsys):
    monkeypatch.chdir(tmp_path)
    rc = main(["bounds", "sec4_closed", "--out", "led.json"])
    assert rc == 0
    with open("led.json") as fh:
        payload = json.load(fh)
    assert payload["constants"]["m"] == pytest.approx(1.5)
    led = payload["ledger"]
    assert led["rho"] == pytest.approx(100.0)
    assert led["alpha1"] == pytest.approx(21.0 / 2.25)
    assert led["beta1"] == pytest.approx(0.02)
    assert payload["ell_star"]["N=1"] == pytest.approx(25.4685, abs=1e-3)
    assert payload["warnings"] == []
    assert capsys.readouterr().err == ""


def test_bounds_observer_scalar_values(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert main(["bounds", "sec7_closed", "--out", "o.json"]) == 0
    with open("o.json") as fh:
        payload = json.load(fh)
    assert payload["ledger"]["Delta"] == pytest.approx(6.0 / 7.0)
    assert payload["ell_doubleprime"] == pytest.approx(8.5, abs=1e-4)
    assert payload["ell_star"]["N=1"] == pytest.approx(18.9764, abs=1e-3)


def test_bounds_warns_when_delta_too_large(tmp_path, monkeypatch, capsys):
    monkeypatch.chdir(tmp_path)
    rc = main(["bounds", "sec7_open", "--out", "w.json"])
    assert rc == 0  # warnings never fail the bounds command
    err = capsys.readouterr().err
    assert "Delta(ell) >= 1" in err
    with open("w.json") as fh:
        payload = json.load(fh)
    assert any("ell_doubleprime" in w for w in payload["warnings"])
    assert payload["ledger"]["alpha5"] is None


@pytest.mark.filterwarnings("ignore::UserWarning")
def test_optimize_grid_and_determinism(tmp_path, monkeypatch, capsys):
    monkeypatch.chdir(tmp_path)
    args = ["optimize", "waterbed_tuned", "--tau", "10",
            "--rho-grid", "10,100", "--ell-grid", "0,10"]
    rc = main(args + ["--out", "a.csv"])
    assert rc == 0
    out = capsys.readouterr().out
    # the slow-adaptation closed-loop corner wins on input smoothness
    assert "optimum: rho=10 ell=10" in out
    with open("a.csv") as fh:
        lines = fh.read().splitlines()
    assert lines[0] == "rho,ell,gamma,cost,status"
    assert len(lines) == 5
    assert all(line.endswith("ok") for line in lines[1:])

    rc = main(args + ["--out", "b.csv", "--jobs", "3"])
    assert rc == 0
    with open("a.csv", "rb") as fa, open("b.csv", "rb") as fb:
        assert fa.read() == fb.read()


def test_optimize_bad_grid_exit1(tmp_path, monkeypatch, capsys):
    monkeypatch.chdir(tmp_path)
    rc = main(["optimize", "waterbed_tuned", "--tau", "5",
               "--rho-grid", "10,abc", "--ell-grid", "60"])
    assert rc == 1
    assert "bad grid" in capsys.readouterr().err


def test_reproduce_waterbed_ordering(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    rc = main(["reproduce", "waterbed", "--outdir", "wb"])
    assert rc == 0
    for stem in ("waterbed_orm", "waterbed_tuned", "waterbed_detuned"):
        assert os.path.exists(os.path.join("wb", stem + ".csv"))
    with open(os.path.join("wb", "waterbed_comparison.json")) as fh:
        cmp_doc = json.load(fh)
    assert cmp_doc["udot_l2_ordering_ok"] is True
    tuned = cmp_doc["variants"]["waterbed_tuned"]["truncated_l2_udot"]
    orm = cmp_doc["variants"]["waterbed_orm"]["truncated_l2_udot"]
    det = cmp_doc["variants"]["waterbed_detuned"]["truncated_l2_udot"]
    assert tuned < orm < det


def test_reproduce_sec7_warns_about_override(tmp_path, monkeypatch, capsys):
    monkeypatch.chdir(tmp_path)
    rc = main(["reproduce", "sec7", "--outdir", "s7"])
    assert rc == 0
    err = capsys.readouterr().err
    assert "overrides the prescribed" in err
    with open(os.path.join("s7", "sec7_comparison.json")) as fh:
        cmp_doc = json.load(fh)
    reg = cmp_doc["region2_rms_udot"]
    assert reg["closed_lower"] is True
    assert reg["sec7_closed"] < reg["sec7_open"]
    # both gain trajectories stay inside the projection ball
    for name in ("sec7_open", "sec7_closed"):
        v = cmp_doc["variants"][name]
        assert v["sup_theta_norm"] <= 3.0 + 1e-9
        assert v["sup_theta_hat_norm"] <= 3.0 + 1e-9


def test_verify_all_builtins(capsys):
    rc = main(["verify"])
    out = capsys.readouterr().out
    assert rc == 0
    assert "[PASS]" in out
    assert "[FAIL]" not in out
    assert "[SKIP]" in out  # override and robust-branch notes show up


def test_usage_errors_exit_1():
    with pytest.raises(SystemExit) as err:
        main(["simulate"])
    assert err.value.code == 1
    with pytest.raises(SystemExit) as err:
        main(["reproduce", "bogus_study"])
    assert err.value.code == 1
    with pytest.raises(SystemExit) as err:
        main([])
    assert err.value.code == 1
