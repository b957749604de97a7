import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from quinpi.cli import EXIT_CONFIG, EXIT_OK, EXIT_SOLVER, main
from quinpi.experiments import (
    ConfigError,
    RunConfig,
    convergence_study,
    newton_log,
    reference_solution,
    run,
    timing_study,
)


def _read(path):
    with open(path) as fh:
        return list(csv.reader(fh))


# -- library driver ---------------------------------------------------------------

def test_run_clips_final_step():
    r = run(RunConfig("burgers", "sine-smooth", 64, 3.0, None, 0.1, "Q3P1"))
    assert r.final.time == 0.1
    dt = 3.0 * 2 / 64
    assert len(r.steps) == int(np.ceil(0.1 / dt))
    assert r.steps[-1].t == 0.1


def test_run_with_cfl_uses_initial_speed():
    r = run(RunConfig("burgers", "sine-smooth", 64, None, 0.45, 0.2, "SSPRK3"))
    alpha0 = 0.5 * r.initial.values.max()  # f'(u) = u / 2 on the cell averages
    assert r.dt == pytest.approx(0.45 * (2 / 64) / alpha0, rel=1e-14)
    assert all(s.newton_total == 0 for s in r.steps)


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(scheme="RK4"),
        dict(eps_t_exponent=4),
        dict(t_final=0.0),
        dict(nu=None, cfl=None),
        dict(nu=1.0, cfl=0.5),
        dict(nu=-1.0),
        dict(problem="euler"),
    ],
)
def test_run_config_validation(kwargs):
    with pytest.raises(ConfigError):
        RunConfig(**kwargs).validate()


def test_scheme_variants_map_to_config():
    assert not RunConfig(scheme="Q3P1-nocorr").scheme_config().conservative_correction
    assert RunConfig(scheme="Q3P1-explicit-pred").scheme_config().explicit_predictor
    assert RunConfig(eps_t_exponent=3).scheme_config().eps_t_exponent == 3


def test_convergence_study_requires_dyadic_and_exact():
    with pytest.raises(ConfigError):
        convergence_study(RunConfig(), [64, 100])
    with pytest.raises(ConfigError):
        convergence_study(RunConfig("buckley", "half-step"), [32, 64])
    t = convergence_study(RunConfig("advection", "sine-smooth", nu=1.0, t_final=0.5, scheme="D3P1"), [32, 64, 128])
    assert len(t.rows()) == 3 and np.isnan(t.rows()[0][2])
    assert t.l1_rates[-1] > 2.5


def test_reference_solution_falls_back_to_fine_grid():
    r = run(RunConfig("burgers", "double-step", 32, 2.0, None, 0.2, "Q3P1"))
    ref = reference_solution(r, fine_factor=8)
    assert ref.shape == (32,)
    assert np.abs(ref - r.final.values).max() < 0.5


def test_timing_study_rows():
    rows = timing_study("advection", "sine-smooth", [50], steps=2, warmup=1)
    assert rows[0].n_cells == 50 and rows[0].ratio > 0 and np.isfinite(rows[0].ratio)


def test_newton_log_needs_implicit_scheme():
    with pytest.raises(ConfigError):
        newton_log(RunConfig(scheme="SSPRK3", nu=None, cfl=0.4))
    r = newton_log(RunConfig("advection", "sine-jump", 64, 5.0, None, 0.2, "Q3P1"))
    assert all(len(s.newton_iterations) == 6 and max(s.newton_iterations) <= 1 for s in r.steps)


# -- command line --------------------------------------------------------------------

def test_cli_run_writes_csvs(tmp_path):
    code = main(["run", "--problem", "advection", "--ic", "double-step", "--n", "64",
                 "--nu", "4", "--tfinal", "0.3", "--out", str(tmp_path)])
    assert code == EXIT_OK
    sol = _read(tmp_path / "solution.csv")
    diag = _read(tmp_path / "diag.csv")
    assert sol[0] == ["x", "u"] and len(sol) == 65
    assert diag[0] == ["t", "mass_dev", "tv", "newton_total", "step_seconds"]
    assert float(diag[-1][0]) == 0.3
    # 17 significant digits round-trip exactly
    x = float(sol[1][0])
    assert x == -1.0 + 0.5 * 2 / 64


def test_cli_is_deterministic(tmp_path):
    args = ["run", "--problem", "burgers", "--ic", "two-shock", "--n", "64", "--nu", "3", "--tfinal", "0.2"]
    assert main(args + ["--out", str(tmp_path / "a")]) == EXIT_OK
    assert main(args + ["--out", str(tmp_path / "b")]) == EXIT_OK
    assert (tmp_path / "a" / "solution.csv").read_bytes() == (tmp_path / "b" / "solution.csv").read_bytes()


def test_cli_config_file_and_override(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"problem": "advection", "ic": "sine-smooth", "n_cells": 40,
                               "t_final": 0.5, "scheme": "IE", "out": str(tmp_path / "fromfile")}))
    assert main(["run", "--config", str(cfg)]) == EXIT_OK
    assert len(_read(tmp_path / "fromfile" / "solution.csv")) == 41
    assert main(["run", "--config", str(cfg), "--n", "20", "--out", str(tmp_path / "flag")]) == EXIT_OK
    assert len(_read(tmp_path / "flag" / "solution.csv")) == 21


def test_cli_config_errors(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"colour": "red"}))
    assert main(["run", "--config", str(bad)]) == EXIT_CONFIG
    assert main(["run", "--config", str(tmp_path / "missing.json")]) == EXIT_CONFIG
    assert main(["converge", "--problem", "buckley", "--ic", "half-step", "--out", str(tmp_path)]) == EXIT_CONFIG
    assert main(["run", "--n", "3", "--out", str(tmp_path)]) == EXIT_CONFIG
    with pytest.raises(SystemExit) as exc:
        main(["run", "--scheme", "RK4"])
    assert exc.value.code == EXIT_CONFIG
    assert "configuration error" in capsys.readouterr().err


def test_cli_solver_failure(tmp_path):
    code = main(["run", "--scheme", "SSPRK3", "--nu", "3", "--n", "64", "--out", str(tmp_path)])
    assert code == EXIT_SOLVER


def test_cli_converge_timing_newton(tmp_path):
    assert main(["converge", "--problem", "advection", "--ic", "sine-smooth", "--nu", "1",
                 "--tfinal", "0.25", "--n-list", "32,64", "--out", str(tmp_path / "c")]) == EXIT_OK
    rows = _read(tmp_path / "c" / "table.csv")
    assert rows[0] == ["N", "L1", "L1_rate", "Linf", "Linf_rate"] and len(rows) == 3
    assert main(["timing", "--problem", "advection", "--ic", "sine-smooth", "--n-list", "40",
                 "--steps", "2", "--out", str(tmp_path / "t")]) == EXIT_OK
    rows = _read(tmp_path / "t" / "table.csv")
    assert rows[0] == ["N", "explicit_step_seconds", "implicit_step_seconds", "ratio"]
    assert main(["newton-log", "--n", "64", "--tfinal", "0.1", "--out", str(tmp_path / "n")]) == EXIT_OK
    rows = _read(tmp_path / "n" / "newton.csv")
    assert rows[0] == ["step", "t", "newton_total", "newton_max"]
    assert all(int(r[3]) <= 2 for r in rows[1:])


def test_module_entry_point(tmp_path):
    out = subprocess.run(
        [sys.executable, "-m", "quinpi.cli", "run", "--n", "32", "--tfinal", "0.1", "--out", str(tmp_path)],
        capture_output=True, text=True,
    )
    assert out.returncode == 0, out.stderr
    assert (tmp_path / "diag.csv").exists()
