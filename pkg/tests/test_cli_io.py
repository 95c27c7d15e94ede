import filecmp
import os

import numpy as np
import pytest

from ddflow import io
from ddflow.cli import main
from ddflow.config import ConfigError, RunConfig, parse_config_text, with_overrides
from ddflow.discretization import Discretization
from ddflow.model import default_boussinesq_model

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
ZERO = os.path.join(ROOT, "configs", "zero.toml")
DESK = os.path.join(ROOT, "configs", "desk.toml")


def test_minimal_config_uses_defaults():
    cfg = parse_config_text("[model]\nlambda = 2.5\n")
    assert cfg.model.lam == 2.5
    assert cfg.mesh == RunConfig().mesh and cfg.solver == RunConfig().solver


def test_negative_lambda_names_key():
    with pytest.raises(ConfigError, match="`model.lambda` \\(line 3\\)"):
        parse_config_text("seed = 1\n[model]\nlambda = -1.0\n")


def test_misspelled_key_suggests():
    with pytest.raises(ConfigError, match="did you mean `lambda`"):
        parse_config_text("[model]\nlamda = 1.0\n")
    with pytest.raises(ConfigError, match="did you mean `solver`"):
        parse_config_text("[solvr]\nkkt_tol = 1e-6\n")


@pytest.mark.parametrize("text, key", [
    ("[mesh]\nn = 0\n", "mesh.n"),
    ("[model]\ngamma = 1.5\n", "model.gamma"),
    ("[bounds]\nlower = 2.0\nupper = 1.0\n", "bounds.lower"),
    ("[solver]\nstep_rule = 'newton'\n", "solver.step_rule"),
    ("[solver]\nramp = [0.5, 0.2, 1.0]\n", "solver.ramp"),
    ("[mesh]\nn = 'eight'\n", "mesh.n"),
    ("[data]\nu_d = 'whirl'\n", "data.u_d"),
])
def test_invalid_values_rejected(text, key):
    with pytest.raises(ConfigError, match=f"`{key}`"):
        parse_config_text(text)


def test_malformed_toml():
    with pytest.raises(ConfigError, match="malformed"):
        parse_config_text("[model\nlambda = 1\n")


def test_overrides_revalidate():
    cfg = with_overrides(RunConfig(), n=3, lam=0.5, seed=9)
    assert (cfg.mesh.n, cfg.model.lam, cfg.seed) == (3, 0.5, 9)
    with pytest.raises(ConfigError):
        with_overrides(RunConfig(), lam=0.0)


def test_control_round_trip(tmp_path):
    U = np.random.default_rng(0).standard_normal((18, 2)) * 1e3
    path = tmp_path / "control.csv"
    io.write_control(path, U)
    assert np.array_equal(io.read_control(path), U)


def test_read_control_rejects_bad_header(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("a,b,c\n0,1,2\n")
    with pytest.raises(ValueError):
        io.read_control(path)


def test_vtk_header_and_counts(tmp_path):
    d = Discretization(2, default_boussinesq_model())
    st = d.initial_state()
    path = tmp_path / "f.vtk"
    io.write_state_vtk(path, d, st, d.zero_control())
    lines = path.read_text().splitlines()
    assert lines[0] == "# vtk DataFile Version 3.0"
    assert lines[2] == "ASCII" and lines[3] == "DATASET UNSTRUCTURED_GRID"
    npts = d.P2.dof_coordinates.shape[0]
    assert f"POINTS {npts} double" in lines
    assert f"CELLS {d.mesh.num_triangles} {7 * d.mesh.num_triangles}" in lines
    i = lines.index(f"CELL_TYPES {d.mesh.num_triangles}")
    assert all(v == "22" for v in lines[i + 1:i + 1 + d.mesh.num_triangles])


def test_solve_state_zero_config(tmp_path, capsys):
    assert main(["solve-state", "--config", ZERO, "--out", str(tmp_path), "--n", "4"]) == 0
    assert {"history.csv", "fields_state.vtk", "report.txt"} <= set(os.listdir(tmp_path))
    text = (tmp_path / "report.txt").read_text()
    assert "newton iterations = 0" in text


def test_outputs_are_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    args = ["optimize", "--config", DESK, "--n", "4", "--seed", "4"]
    assert main(args + ["--out", str(a)]) == 0
    assert main(args + ["--out", str(b)]) == 0
    names = sorted(os.listdir(a))
    assert names == sorted(os.listdir(b))
    match, mismatch, errors = filecmp.cmpfiles(a, b, names, shallow=False)
    assert not mismatch and not errors
    assert "iterations = 0" not in (a / "report.txt").read_text()


def test_bad_config_exit_status(tmp_path, capsys):
    cfg = tmp_path / "bad.toml"
    cfg.write_text("[model]\nlambda = -1\n")
    assert main(["solve-state", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
    assert "model.lambda" in capsys.readouterr().err


def test_unknown_command_rejected(tmp_path):
    with pytest.raises(SystemExit):
        main(["frobnicate", "--out", str(tmp_path)])
