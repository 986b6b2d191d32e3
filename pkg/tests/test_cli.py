"""Test the command-line interface."""

import pytest
import yaml
from click.testing import CliRunner

from staggered_dg import __version__
from staggered_dg.cli import main
from staggered_dg.harness import expected_orders


@pytest.fixture
def runner(tmp_path, monkeypatch):
    """CLI runner inside an empty working directory."""
    monkeypatch.chdir(tmp_path)
    for name in ("STAGGERED_DG_LADDER_WORKERS", "STAGGERED_DG_LOG_LEVEL"):
        monkeypatch.delenv(name, raising=False)
    return CliRunner()


def test_version(runner):
    """Test --version."""
    result = runner.invoke(main, ["--version"])

    assert result.exit_code == 0
    assert __version__ in result.output


def test_help_lists_commands(runner):
    """Test every command is reachable."""
    result = runner.invoke(main, ["--help"])

    for name in ("convergence", "solve-flow", "run-transport", "demo", "check-mesh", "step-mesh"):
        assert name in result.output


def test_negative_dt(runner):
    """Test a negative time step exits with the configuration status."""
    result = runner.invoke(main, ["convergence", "--case", "ex1", "--dt", "-0.001"])

    assert result.exit_code == 2
    assert "dt" in result.output


def test_bad_ladder(runner):
    """Test a malformed ladder names its key."""
    result = runner.invoke(main, ["convergence", "--case", "ex1", "--ladder", "2,x"])

    assert result.exit_code == 2
    assert "ladder" in result.output


def test_step_demo_without_mesh(runner):
    """Test ex4 needs --mesh."""
    result = runner.invoke(main, ["demo", "--case", "ex4"])

    assert result.exit_code == 2
    assert "mesh" in result.output


def test_malformed_mesh(runner, tmp_path):
    """Test an unparsable mesh exits with the mesh status."""
    path = tmp_path / "bad.msh"
    path.write_text("not a mesh\n")

    result = runner.invoke(main, ["check-mesh", "--mesh", str(path)])

    assert result.exit_code == 3
    assert "line 1" in result.output


def test_missing_mesh_file(runner, tmp_path):
    """Test an unreadable mesh file is a configuration error."""
    result = runner.invoke(main, ["check-mesh", "--mesh", str(tmp_path / "absent.msh")])

    assert result.exit_code == 2


def test_step_mesh_then_check(runner, tmp_path):
    """Test the generated step mesh ingests cleanly."""
    path = tmp_path / "step.msh"

    written = runner.invoke(main, ["step-mesh", str(path)])
    checked = runner.invoke(main, ["check-mesh", "--mesh", str(path)])

    assert written.exit_code == 0
    assert path.exists()
    assert checked.exit_code == 0
    assert "1152 cells" in checked.output
    assert "50 interface edges" in checked.output


def test_step_mesh_off_grid(runner, tmp_path):
    """Test step heights off the lattice are rejected."""
    result = runner.invoke(main, ["step-mesh", str(tmp_path / "step.msh"),
                                  "--cells-per-unit", "1"])

    assert result.exit_code == 2


def test_config_file(runner, tmp_path, mesh_file):
    """Test runs can be configured from YAML."""
    config = tmp_path / "run.yaml"
    config.write_text(f"command: check-mesh\nmesh: {mesh_file}\n")

    result = runner.invoke(main, ["check-mesh", "--config", str(config)])

    assert result.exit_code == 0
    assert "4 cells" in result.output


@pytest.mark.parametrize("flags,status", [([], 0), (["--assert"], 5)])
def test_assert_on_wrong_orders(runner, monkeypatch, rung_stub, flags, status):
    """Test failed order checks warn, and exit 5 under --assert."""
    orders = expected_orders(1)
    orders["uD"] = 0.5
    stub, _ = rung_stub(orders=orders)
    monkeypatch.setattr("staggered_dg.harness.convergence.run_rung", stub)

    result = runner.invoke(main, ["convergence", "--case", "ex1", "--ladder", "2,4", *flags])

    assert result.exit_code == status
    assert "eoc_uD" in result.output


@pytest.mark.slow
def test_convergence_deterministic(runner, tmp_path):
    """Test repeated runs give byte-identical tables."""
    args = ["convergence", "--case", "ex1", "--ladder", "2,4", "--dt", "0.01", "--tfinal",
            "0.02"]

    first = runner.invoke(main, [*args, "--out", str(tmp_path / "a")])
    second = runner.invoke(main, [*args, "--out", str(tmp_path / "b")])

    assert first.exit_code == 0
    assert second.exit_code == 0
    table = "ex1_k1_convergence.csv"
    assert (tmp_path / "a" / table).read_bytes() == (tmp_path / "b" / table).read_bytes()


def test_solve_flow_writes_summary(runner, tmp_path):
    """Test solve-flow on a manufactured case writes a loadable error summary."""
    result = runner.invoke(main, ["solve-flow", "--case", "ex1", "--resolution", "2",
                                  "--out", str(tmp_path)])

    assert result.exit_code == 0, result.output
    summary = yaml.safe_load((tmp_path / "ex1_flow_summary.yaml").read_text())
    assert set(summary["errors"]) >= {"L", "uB", "pB", "uD", "pD"}
    assert all(isinstance(value, float) for value in summary["errors"].values())
