import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from advecteig import cli, verify

ROOT = Path(__file__).resolve().parents[1]
SMOOTH = ROOT / "configs" / "canonical_smooth.ini"
HOMOG = ROOT / "configs" / "homogeneous_q1.ini"
GAUSS = ROOT / "configs" / "gaussian.ini"


def write(tmp_path, text, name="run.ini"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_limit_writes_outputs(tmp_path):
    assert cli.run(["limit", "--config", str(GAUSS), "--out-dir", str(tmp_path)]) == 0
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["limit"]["lambda_hat"] == pytest.approx(4.0, abs=1e-4)
    lines = (tmp_path / "limit.csv").read_text().splitlines()
    assert lines[0] == "# x,r,u_hat"
    first = lines[1].split(",")
    assert len(first) == 3
    # 17 significant digits round-trip exactly
    header, data = cli.read_csv(tmp_path / "limit.csv")
    assert data.shape == (1023, 3) and np.all(data[:, 2] > 0)


def test_corrections_and_summary_merge(tmp_path):
    out = str(tmp_path)
    assert cli.run(["limit", "--config", str(SMOOTH), "--out-dir", out]) == 0
    assert cli.run(["corrections", "--config", str(SMOOTH), "--out-dir", out]) == 0
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert {"limit", "corrections"} <= set(summary)
    co = summary["corrections"]["coefficients"]
    assert co["c2"] == pytest.approx(0.25, abs=1e-3) and co["exponents"]["psi_1"] == "-3/2"
    header, _ = cli.read_csv(tmp_path / "corrections.csv")
    assert header == ["x", "u_hat", "psi_1", "psi_2"]


def test_sweep_and_report_round_trip(tmp_path, capsys):
    out = str(tmp_path)
    assert cli.run(["sweep", "--config", str(SMOOTH), "--out-dir", out, "--threads", "2"]) == 0
    header, data = cli.read_csv(tmp_path / "sweep.csv")
    assert header == cli.sweep_header(2) and data.shape[0] == 9
    assert cli.run(["report", "--config", str(SMOOTH), "--out-dir", out]) == 0
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["report"]["rates"] == summary["sweep"]["rates"]
    slope = summary["report"]["rates"]["lambda_err_1"]["slope"]
    assert -1.1 < slope < -0.9


def test_report_without_config(tmp_path):
    assert cli.run(["sweep", "--config", str(HOMOG), "--out-dir", str(tmp_path),
                    "--alpha-min", "1e3", "--alpha-max", "1e4", "--points-per-decade", "3"]) == 0
    assert cli.run(["report", "--sweep", str(tmp_path / "sweep.csv"), "--out-dir", str(tmp_path)]) == 0
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["report"]["rates"]["lambda_err_0"]["slope"] == pytest.approx(-0.5, abs=0.01)
    assert cli.run(["report", "--out-dir", str(tmp_path / "missing")]) == 1


def test_empty_sweep_range(tmp_path, capsys):
    code = cli.run(["sweep", "--config", str(SMOOTH), "--out-dir", str(tmp_path), "--alpha-min", "1e4",
                    "--alpha-max", "1e2"])
    assert code == 1
    assert "sweep range empty" in capsys.readouterr().err


@pytest.mark.parametrize("body,fragment", [
    ("[scenario]\nc0 = 1\n", "p is required"),
    ("[scenario]\np = 2\n", "c0 is required"),
    ("[scenario]\np = 2\nc0 = 1\nv_terms = 1:1\n", "V ≥ 0 violated"),
    ("[scenario]\np = 1\nc0 = 1\n", "p >= 2 violated"),
    ("[scenario]\np = 2\nc0 = 1\nmode = homogeneous_refined\n", "requires a homogeneous V"),
    ("[scenario]\np = 2\nc0 = 1\n[grid]\nnode_count = two\n", "invalid"),
])
def test_validation_failures(tmp_path, capsys, body, fragment):
    assert cli.run(["limit", "--config", str(write(tmp_path, body)), "--out-dir", str(tmp_path)]) == 1
    assert fragment in capsys.readouterr().err


def test_refined_p_flagged_not_forbidden(tmp_path, capsys):
    cfg = write(tmp_path, "[scenario]\np = 2.5\nc0 = 1\nmode = smooth_refined\nv_terms = 0:1; 2:1\n")
    assert cli.run(["limit", "--config", str(cfg), "--out-dir", str(tmp_path)]) == 0
    assert "p outside" in capsys.readouterr().err


def test_solver_failure_exit_code(tmp_path):
    cfg = write(tmp_path, "[scenario]\np = 2\nc0 = 1\nepsilon = 1e4\n")
    assert cli.run(["limit", "--config", str(cfg), "--out-dir", str(tmp_path)]) == 2


def test_leading_mode_has_no_corrections(tmp_path):
    assert cli.run(["corrections", "--config", str(GAUSS), "--out-dir", str(tmp_path)]) == 1


def test_homogeneous_two_dimensional_config(tmp_path):
    cfg = write(tmp_path, "[scenario]\ndim = 2\np = 2\nc0 = 1\nmode = homogeneous_refined\n"
                          "v_kind = homogeneous\nq_hat = 2\nq_matrix = 1 0 0 1\n[grid]\nnode_count = 63\n")
    assert cli.run(["corrections", "--config", str(cfg), "--out-dir", str(tmp_path)]) == 0
    header, data = cli.read_csv(tmp_path / "corrections.csv")
    assert header == ["x1", "x2", "u_hat", "psi_3", "psi_4"] and data.shape == (63 * 63, 5)


def test_verify_passes_on_canonical(tmp_path, capsys):
    assert cli.run(["verify", "--config", str(SMOOTH), "--out-dir", str(tmp_path), "--threads", "2"]) == 0
    text = capsys.readouterr().out
    for k in range(1, 13):
        assert f"[PASS] {k} " in text
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["verify"]["passed"] is True


def test_verify_failure_exit_code(tmp_path, monkeypatch):
    failing = verify._timed("always fails")(lambda ctx: (False, "forced", {}))
    monkeypatch.setattr(verify, "CRITERIA", (failing,))
    assert cli.run(["verify", "--config", str(GAUSS), "--out-dir", str(tmp_path),
                    "--alpha-min", "100", "--alpha-max", "1000"]) == 3


def test_console_script_help():
    res = subprocess.run([sys.executable, "-m", "advecteig", "--help"], capture_output=True, text=True)
    assert res.returncode == 0
    for sub in cli.SUBCOMMANDS:
        assert sub in res.stdout


def test_csv_number_format():
    assert cli.fmt(0.1) == "0.10000000000000001"
    assert float(cli.fmt(np.pi)) == np.pi
    assert cli.fmt(float("nan")) == "nan"
