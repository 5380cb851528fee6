import csv
import json

import numpy as np
import pytest

from frictorq.cli import CONDITION_COLUMNS, SWEEP_COLUMNS, condition_samples, main
from frictorq.model import load_fixture, model_to_dict

FIXED_HEADER = ("t,s_0,s_1,s_2,s_3,s_d_0,s_d_1,s_d_2,s_d_3,sdot_0,sdot_1,sdot_2,sdot_3,"
                "sdot_meas_0,sdot_meas_1,sdot_meas_2,sdot_meas_3,u_0,u_1,u_2,u_3,"
                "tau_m_0,tau_m_1,tau_m_2,tau_m_3,err_s,cond_Ms,cond_Ms_bar")
FIXED_SUMMARY_KEYS = ["controller", "metrics", "mode", "model", "noise"]
FIXED_METRIC_KEYS = ["duration", "max_err_s", "rms_err_s", "samples"]
FLOATING_METRIC_KEYS = ["duration", "max_constraint_residual", "max_contact_drift", "max_err_H_lin",
                        "max_err_com", "max_err_s", "min_cone_margin", "rms_err_H_lin", "rms_err_com",
                        "rms_err_s", "samples"]


def _write(path, doc):
    path.write_text(json.dumps(doc))
    return str(path)


def _err_line(capsys):
    err = capsys.readouterr().err.strip().splitlines()
    assert len(err) == 1 and err[0].startswith("error: ")
    return err[0]


@pytest.fixture
def fixed_cfg(tmp_path):
    return _write(tmp_path / "fixed.json", {"model": "arm4", "duration": 0.3,
                                            "reference": {"amplitude_deg": 15, "frequency": 0.5},
                                            "noise": {"sigma_v": 0.05, "seed": 3}})


def test_run_writes_three_files(tmp_path, fixed_cfg):
    out = tmp_path / "out"
    assert main(["run", fixed_cfg, "-o", str(out)]) == 0
    assert sorted(p.name for p in out.iterdir()) == ["plot.gp", "run.csv", "summary.json"]
    lines = (out / "run.csv").read_text().splitlines()
    assert lines[0] == FIXED_HEADER and len(lines) == 31
    summary = json.loads((out / "summary.json").read_text())
    assert sorted(summary) == FIXED_SUMMARY_KEYS
    assert sorted(summary["metrics"]) == FIXED_METRIC_KEYS
    assert summary["noise"] == {"sigma_v": 0.05, "tau_f": 0.0, "seed": 3}
    gp = (out / "plot.gp").read_text()
    assert "run.csv" in gp and "using 1:%d" % (FIXED_HEADER.split(",").index("err_s") + 1) in gp


def test_run_floating_summary_keys(tmp_path):
    cfg = _write(tmp_path / "f.json", {"model": "biped", "mode": "floating_base", "duration": 0.05,
                                       "reference": {"amplitude_cm": 4, "frequency": 0.5}})
    assert main(["run", cfg, "-o", str(tmp_path / "o")]) == 0
    summary = json.loads((tmp_path / "o" / "summary.json").read_text())
    assert sorted(summary["metrics"]) == FLOATING_METRIC_KEYS
    gp = (tmp_path / "o" / "plot.gp").read_text()
    assert gp.count("plot '") == 3


def test_missing_model_exit_2(tmp_path, capsys):
    cfg = _write(tmp_path / "bad.json", {"model": "nope.json", "duration": 1.0})
    assert main(["run", cfg]) == 2
    assert "model not found: nope.json" in _err_line(capsys)


def test_bad_usage_exit_2(capsys, tmp_path):
    assert main(["fly"]) == 2
    _err_line(capsys)
    assert main([]) == 2
    _err_line(capsys)
    assert main(["run", str(tmp_path / "none.json")]) == 2
    _err_line(capsys)


def test_bad_config_exit_2(tmp_path, capsys):
    cfg = _write(tmp_path / "c.json", {"model": "arm4", "dt_inner": 3e-4})
    assert main(["run", cfg]) == 2
    _err_line(capsys)


def test_unstable_gains_exit_3(tmp_path, capsys):
    cfg = _write(tmp_path / "u.json", {"model": "arm4", "controller": "baseline", "duration": 2.0,
                                       "gains": {"kp": 100, "kd": 5000},
                                       "reference": {"amplitude_deg": 15, "frequency": 0.5}})
    assert main(["run", cfg, "-o", str(tmp_path / "o")]) == 3
    assert "diverged at t =" in _err_line(capsys)


def test_infeasible_exit_4(tmp_path, capsys):
    doc = model_to_dict(load_fixture("biped"))
    for c in doc["contacts"]:
        c["mu"] = 1e-4
    _write(tmp_path / "slippery.json", doc)
    cfg = _write(tmp_path / "s.json", {"model": "slippery.json", "mode": "floating_base", "duration": 0.1,
                                       "reference": {"amplitude_cm": 4, "frequency": 0.5}})
    assert main(["run", cfg, "-o", str(tmp_path / "o")]) == 4
    assert "infeasible" in _err_line(capsys)


def test_compare(tmp_path, fixed_cfg, capsys):
    assert main(["compare", fixed_cfg, "-o", str(tmp_path / "c"), "-j", "1"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert sorted(report) == ["baseline", "ef", "model", "ratio_ef_over_baseline"]
    assert report["ratio_ef_over_baseline"]["rms_err_s"] == pytest.approx(
        report["ef"]["rms_err_s"] / report["baseline"]["rms_err_s"])
    assert (tmp_path / "c" / "run_ef.csv").exists() and (tmp_path / "c" / "run_baseline.csv").exists()


def test_sweep_noise_rows(tmp_path, fixed_cfg):
    out = tmp_path / "sw"
    assert main(["sweep-noise", fixed_cfg, "--sigma", "0,0.05,0.1,0.2", "-o", str(out), "-j", "2"]) == 0
    with open(out / "sweep.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == SWEEP_COLUMNS
    assert len(rows) == 9
    assert [(r[0], r[1]) for r in rows[1:3]] == [("0.0", "baseline"), ("0.0", "ef")]
    assert all(float(r[2]) > 0 and float(r[3]) >= float(r[2]) for r in rows[1:])


def test_sweep_single_sigma(tmp_path, fixed_cfg):
    assert main(["sweep-noise", fixed_cfg, "--sigma", "0", "-o", str(tmp_path), "-j", "1"]) == 0
    rows = list(csv.reader(open(tmp_path / "sweep.csv")))
    assert [r[1] for r in rows[1:]] == ["baseline", "ef"]


def test_sweep_negative_sigma(tmp_path, fixed_cfg, capsys):
    assert main(["sweep-noise", fixed_cfg, "--sigma", "-0.1", "-o", str(tmp_path)]) == 2
    _err_line(capsys)


def test_condition_report(tmp_path, capsys):
    out = tmp_path / "cond.csv"
    assert main(["condition-report", "biped", "-n", "5", "-o", str(out)]) == 0
    rows = list(csv.reader(open(out)))
    assert rows[0] == CONDITION_COLUMNS and len(rows) == 6
    for r in rows[1:]:
        assert float(r[2]) < float(r[1])
        assert float(r[3]) == pytest.approx(float(r[1]) / float(r[2]))
    assert "median" in capsys.readouterr().out


def test_condition_report_single_row(tmp_path):
    out = tmp_path / "one.csv"
    assert main(["condition-report", "arm4", "-n", "1", "-o", str(out)]) == 0
    assert len(open(out).read().splitlines()) == 2


def test_condition_report_bad_args(capsys):
    assert main(["condition-report", "nope"]) == 2
    assert "model not found" in _err_line(capsys)
    assert main(["condition-report", "arm4", "-n", "0"]) == 2
    _err_line(capsys)


def test_direct_drive_has_no_reduction():
    doc = model_to_dict(load_fixture("pendulum2"))
    doc["actuation"]["gamma"] = np.eye(2).tolist()
    doc["actuation"]["im"] = (1e-12 * np.eye(2)).tolist()
    from frictorq.model import model_from_dict
    rows = condition_samples(model_from_dict(doc), 10, seed=0)
    assert all(r[3] == pytest.approx(1.0, abs=1e-6) for r in rows)


def test_validate_model(tmp_path, capsys):
    doc = model_to_dict(load_fixture("arm4"))
    path = _write(tmp_path / "arm.json", doc)
    assert main(["validate-model", path]) == 0
    assert capsys.readouterr().out.startswith("ok: ")
    doc["actuation"]["kv"][0][0] = -1.0
    bad = _write(tmp_path / "bad.json", doc)
    assert main(["validate-model", bad]) == 2
    _err_line(capsys)
    assert main(["validate-model", str(tmp_path / "missing.json")]) == 2
    _err_line(capsys)
