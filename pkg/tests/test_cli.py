import json

import numpy as np
import pytest
import yaml

from radlimit.cli import main
from radlimit.io import read_csv

SMALL = {
    "scenario": "eq",
    "grid": {"dim": 1, "cells": [16], "extent": [1.0], "periodic": [True]},
    "quadrature": {"n_polar": 2, "n_azimuth": 4},
    "params": {"epsilon": 0.1},
    "initial": {"profile": "uniform", "c": 1.3},
    "t_end": 0.005,
    "snapshot_every": 10,
}


def write(tmp_path, raw, name="cfg.yaml"):
    p = tmp_path / name
    p.write_text(yaml.safe_dump(raw))
    return str(p)


def test_run_kinetic_equilibrium(tmp_path, capsys):
    cfg = write(tmp_path, SMALL)
    assert main(["run-kinetic", "--config", cfg, "--out", str(tmp_path / "o")]) == 0
    sha, cols, data = read_csv(tmp_path / "o" / "energy.csv")
    assert cols[:3] == ["time", "energy_T5", "energy_psi2"] and cols[-1] == "residual"
    assert len(sha) == 64
    assert np.ptp(data[:, 1]) <= 1e-12 and np.ptp(data[:, 2]) <= 1e-12
    assert (tmp_path / "o" / "steps.csv").is_file()
    assert len(list((tmp_path / "o" / "snapshots").glob("snap_*.bin"))) >= 2


def test_rerun_bit_identical(tmp_path):
    raw = dict(SMALL, initial={"profile": "sine", "c0": 1.0, "amp": 0.2, "k": [1.0]})
    cfg = write(tmp_path, raw)
    main(["run-kinetic", "--config", cfg, "--out", str(tmp_path / "a"), "--seed", "3"])
    main(["run-kinetic", "--config", cfg, "--out", str(tmp_path / "b"), "--seed", "3"])
    for name in ("energy.csv", "steps.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_missing_config(tmp_path, capsys):
    assert main(["run-kinetic", "--config", str(tmp_path / "missing.yaml")]) != 0
    assert "not found" in capsys.readouterr().err


def test_bad_config(tmp_path, capsys):
    cfg = write(tmp_path, dict(SMALL, t_end=-1))
    assert main(["run-kinetic", "--config", cfg]) == 2
    assert "t_end" in capsys.readouterr().err


def test_solver_error_nonzero_exit(tmp_path, capsys):
    raw = dict(SMALL, params={"epsilon": 0.01}, solver={"dt": 0.004})  # Courant number ~5
    cfg = write(tmp_path, raw)
    assert main(["run-kinetic", "--config", cfg, "--out", str(tmp_path / "o")]) == 1
    assert "CFLViolation" in capsys.readouterr().err


def test_epsilon_override(tmp_path):
    cfg = write(tmp_path, SMALL)
    main(["run-kinetic", "--config", cfg, "--out", str(tmp_path / "o"), "--epsilon", "0.5"])
    saved = yaml.safe_load((tmp_path / "o" / "config.yaml").read_text())
    assert saved["params"]["epsilon"] == 0.5


def test_run_limit(tmp_path):
    cfg = write(tmp_path, SMALL)
    assert main(["run-limit", "--config", cfg, "--out", str(tmp_path / "l")]) == 0
    _, cols, data = read_csv(tmp_path / "l" / "limit.csv")
    assert cols == ["time", "total_u", "T_min", "T_max"]
    np.testing.assert_allclose(data[:, 2], 1.3, atol=1e-12)


def test_audit_from_snapshots(tmp_path, capsys):
    raw = dict(SMALL, initial={"profile": "sine", "c0": 1.0, "amp": 0.2, "k": [1.0]})
    cfg = write(tmp_path, raw)
    main(["run-kinetic", "--config", cfg, "--out", str(tmp_path / "o")])
    capsys.readouterr()
    assert main(["audit", str(tmp_path / "o")]) == 0
    assert "max_residual" in capsys.readouterr().out
    _, cols, data = read_csv(tmp_path / "o" / "audit.csv")
    assert np.all(data[:, -1] <= 1e-12 * data[0, 1:3].sum())


def test_rate_study_synthetic(tmp_path):
    sweep = {"base": SMALL, "epsilon_list": [0.4, 0.2, 0.1, 0.05],
             "synthetic": {"s": 1.5, "scale": 2.0}}
    cfg = write(tmp_path, sweep)
    assert main(["rate-study", "--config", cfg, "--out", str(tmp_path / "r")]) == 0
    rep = json.loads((tmp_path / "r" / "rate_report.json").read_text())
    assert rep["slope"] == pytest.approx(1.5, abs=1e-12)
    assert (tmp_path / "r" / "rate.csv").is_file()


def test_rate_study_threads_match_serial(tmp_path):
    base = dict(SMALL, initial={"profile": "sine", "c0": 1.0, "amp": 0.2, "k": [1.0]},
                t_end=0.004, record_every=5)
    cfg = write(tmp_path, {"base": base, "epsilon_list": [0.4, 0.2, 0.1]})
    main(["rate-study", "--config", cfg, "--out", str(tmp_path / "s")])
    main(["rate-study", "--config", cfg, "--out", str(tmp_path / "p"), "--threads", "2"])
    a = json.loads((tmp_path / "s" / "rate_report.json").read_text())
    b = json.loads((tmp_path / "p" / "rate_report.json").read_text())
    assert a == b
    assert len(a["errors"]) == 3 and "slope" in a


def test_rate_study_needs_sweep(tmp_path, capsys):
    cfg = write(tmp_path, SMALL)
    assert main(["rate-study", "--config", cfg]) == 2


def test_selftest(capsys):
    assert main(["selftest"]) == 0
    out = capsys.readouterr().out
    assert out.count("PASS") == 5
