import json
import os
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from fiberqed.cli import FORCE_COLUMNS, main

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_unknown_subcommand_exits_2(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["fly"])
    assert exc.value.code == 2
    assert "usage" in capsys.readouterr().err


def test_modes_on_ince_gaussian(tmp_path, capsys):
    code, out, _ = run(capsys, "modes", "--config", str(CONFIGS / "ig55.ini"), "--out", str(tmp_path))
    assert code == 0
    assert "modes_IG_o_5_5.csv" in json.loads(out)["files"]
    data = np.loadtxt(tmp_path / "modes_IG_o_5_5.csv", delimiter=",", skiprows=1)
    assert data.shape == (51 * 51, 5)
    assert (tmp_path / "modes_IG_o_5_5.csv").read_text().splitlines()[0] == "x,y,f,dfx,dfy"
    # terms HG_41, HG_23, HG_05 are even in x and odd in y
    f = data[:, 2].reshape(51, 51)
    np.testing.assert_allclose(f[:, ::-1], -f, atol=1e-15)
    np.testing.assert_allclose(f[::-1, :], f, atol=1e-15)


def test_spectrum(tmp_path, capsys):
    code, out, _ = run(capsys, "spectrum", "--config", str(CONFIGS / "threshold_scan.ini"), "--out", str(tmp_path))
    assert code == 0
    lines = (tmp_path / "spectrum.csv").read_text().splitlines()
    assert lines[0] == "omega_th,Gamma_branch,Delta_branch" and len(lines) == 42
    d = np.loadtxt(tmp_path / "spectrum.csv", delimiter=",", skiprows=1)
    assert np.count_nonzero(np.diff(np.sign(d[:, 2]))) == 1


def test_spectrum_without_loss_is_an_error(tmp_path, capsys):
    code, _, err = run(capsys, "spectrum", "--out", str(tmp_path))
    assert code == 1
    payload = json.loads(err)
    assert payload["error"] == "ConfigError" and "cK" in payload["message"]


def test_forces(tmp_path, capsys):
    code, _, _ = run(capsys, "forces", "--out", str(tmp_path))
    assert code == 0
    lines = (tmp_path / "forces.csv").read_text().splitlines()
    assert lines[0].split(",") == FORCE_COLUMNS
    assert len(lines) == 1 + 41 * 41
    assert lines[0] == ("x,y,Fx,Fy,Fz,fricxx,fricxy,fricxz,fricyx,fricyy,fricyz,friczx,friczy,friczz,"
                        "Dxx,Dxy,Dxz,Dyx,Dyy,Dyz,Dzx,Dzy,Dzz")


def test_simulate_is_byte_stable(tmp_path, capsys):
    cfg = tmp_path / "short.ini"
    cfg.write_text((CONFIGS / "caption.ini").read_text().replace("t = 1500", "t = 40"))
    for d in ("a", "b"):
        code, _, _ = run(capsys, "simulate", "--config", str(cfg), "--out", str(tmp_path / d),
                         "--seed", "17", "--noise-mode", "paper-compat")
        assert code == 0
    a = (tmp_path / "a" / "trajectory.csv").read_bytes()
    assert a == (tmp_path / "b" / "trajectory.csv").read_bytes()
    assert a.splitlines()[0] == b"t,x,y,z,vx,vy,vz"
    assert b"\r" not in a
    meta = json.loads((tmp_path / "a" / "trajectory.json").read_text())
    assert meta["seed"] == 17 and meta["noise_mode"] == "paper_compat"
    assert meta["config"]["drive"]["detuning"] == 7728.32
    assert "censored" in meta


def test_sweep(tmp_path, capsys, monkeypatch):
    cfg = tmp_path / "sweep.ini"
    cfg.write_text((CONFIGS / "caption.ini").read_text().replace("t = 1500", "t = 5")
                   + "\n[sweep]\nvalues = 4000, 8000, 16000\nrepetitions = 2\n")
    monkeypatch.setenv("FIBERQED_THREADS", "2")
    code, out, _ = run(capsys, "sweep", "--config", str(cfg), "--out", str(tmp_path), "--noise-mode", "paper-compat")
    assert code == 0
    lines = (tmp_path / "sweep_summary.csv").read_text().splitlines()
    assert lines[0] == "param_value,n,mean_trap_time,std_trap_time,censored_n"
    assert len(lines) == 4
    summary = json.loads((tmp_path / "sweep_summary.json").read_text())
    assert summary["repetitions"] == 2 and summary["noise_mode"] == "paper_compat"
    assert "spearman" in json.loads(out)


def test_bad_config_reports_json(tmp_path, capsys):
    bad = tmp_path / "bad.ini"
    bad.write_text("Gamma = 1\nlambdaA = 0.78\nwhatever = 2\n")
    code, _, err = run(capsys, "simulate", "--config", str(bad), "--out", str(tmp_path))
    assert code == 1
    payload = json.loads(err)
    assert any("whatever" in p for p in payload["problems"])


def test_console_script_entry_point(tmp_path):
    exe = Path(sys.executable).with_name("fiberqed")
    cmd = [str(exe)] if exe.exists() else [sys.executable, "-m", "fiberqed.cli"]
    res = subprocess.run(cmd + ["--help"], capture_output=True, text=True)
    assert res.returncode == 0 and "simulate" in res.stdout
