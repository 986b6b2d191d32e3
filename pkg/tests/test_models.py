"""Test data models."""

import math

import numpy as np
import pytest
from pydantic import ValidationError

from staggered_dg.exceptions import ConfigError
from staggered_dg.models import (
    BoundaryData,
    Command,
    ConservationReport,
    ErrorReport,
    ErrorRow,
    FlowParams,
    StabilityReport,
    StepRecord,
    TransportParams,
    parse_config,
)
from staggered_dg.models.config import check_time_grid
from staggered_dg.models.reports import eoc


def test_parse_config_defaults():
    """Test RunConfig defaults for a convergence run."""
    config = parse_config(flags={"command": "convergence", "case": "ex1"})

    assert config.command == Command.CONVERGENCE
    assert config.k == 1
    assert config.ladder == [2, 4, 8, 16, 32]
    assert config.epsilon is None
    assert config.value("epsilon", 0.1) == 0.1
    assert config.time_grid(1e-3, 0.1) == (1e-3, 0.1)
    assert config.assert_checks is False


def test_parse_config_yaml_and_flags(tmp_path):
    """Test flags override YAML values and dashed keys are accepted."""
    path = tmp_path / "run.yaml"
    path.write_text("command: demo\ncase: ex3\ndump-stride: 10\nepsilon: 0.5\nassert: true\n")

    config = parse_config(path, {"epsilon": 0.25})

    assert config.dump_stride == 10
    assert config.epsilon == 0.25
    assert config.assert_checks is True


def test_parse_config_negative_dt_names_key():
    """Test a negative time step is a ConfigError naming dt."""
    with pytest.raises(ConfigError) as excinfo:
        parse_config(flags={"command": "convergence", "case": "ex1", "dt": -0.001})

    assert excinfo.value.key == "dt"
    assert "dt" in str(excinfo.value)


@pytest.mark.parametrize(
    "flags,key",
    [
        ({"command": "convergence"}, "<root>"),
        ({"command": "demo", "case": "ex1"}, "<root>"),
        ({"command": "check-mesh"}, "<root>"),
        ({"command": "convergence", "case": "ex9"}, "case"),
        ({"command": "convergence", "case": "ex1", "k": 4}, "k"),
        ({"command": "convergence", "case": "ex1", "ladder": [4, 2]}, "ladder"),
        ({"command": "convergence", "case": "ex1", "unknown": 1}, "unknown"),
    ],
)
def test_parse_config_rejects(flags, key):
    """Test invalid configurations are rejected with the offending key."""
    with pytest.raises(ConfigError) as excinfo:
        parse_config(flags=flags)

    assert excinfo.value.key == key


def test_parse_config_malformed_yaml(tmp_path):
    """Test malformed YAML is a ConfigError."""
    path = tmp_path / "bad.yaml"
    path.write_text("command: [demo\n")

    with pytest.raises(ConfigError) as excinfo:
        parse_config(path)

    assert excinfo.value.key == "config"


def test_time_grid_tolerance():
    """Test T/Δt must be within 1% of an integer."""
    assert check_time_grid(1e-3, 0.1) == 100
    assert check_time_grid(0.1, 1.0005) == 10
    with pytest.raises(ValueError):
        check_time_grid(0.3, 1.0)
    with pytest.raises(ValueError):
        check_time_grid(0.2, 0.1)


def test_time_grid_override_error():
    """Test an incompatible (dt, T) pair from defaults raises ConfigError."""
    config = parse_config(flags={"command": "run-transport", "case": "ex1", "dt": 0.03})

    with pytest.raises(ConfigError):
        config.time_grid(1e-3, 0.1)


def test_flow_params_validation():
    """Test coefficient checks on FlowParams."""
    params = FlowParams(alpha=0.0, k_darcy=[[2.0, 0.5], [0.5, 1.0]])
    assert params.alpha == 0.0
    assert params.k_darcy == ((2.0, 0.5), (0.5, 1.0))

    with pytest.raises(ValidationError):
        FlowParams(k_darcy=0.0)
    with pytest.raises(ValidationError):
        FlowParams(k_darcy=[[1.0, 2.0], [0.0, 1.0]])
    with pytest.raises(ValidationError):
        FlowParams(epsilon=-1.0)


def test_lifting_needs_brinkman_source():
    """Test a Brinkman lifting without its divergence g_B is rejected."""
    def lifting(x):
        return np.zeros_like(x)

    with pytest.raises(ValidationError, match="g_brinkman"):
        FlowParams(brinkman_lifting=lifting)

    params = FlowParams(brinkman_lifting=lifting, g_brinkman=lambda x: np.zeros(len(x)))
    assert params.brinkman_lifting is lifting


def test_boundary_data_pressure_pairing():
    """Test a pressure needs its region predicate."""
    with pytest.raises(ValidationError):
        BoundaryData(darcy_pressure=lambda x: np.zeros(len(x)))


def test_boundary_data_fluxes():
    """Test normal fluxes from full velocity data and from g1."""
    x = np.array([[0.0, 0.5], [0.0, 0.25]])
    normals = np.array([[-1.0, 0.0], [-1.0, 0.0]])

    full = BoundaryData(brinkman_velocity=lambda p: np.column_stack([p[:, 1], 0 * p[:, 1]]))
    np.testing.assert_allclose(full.brinkman_flux(x, normals), [-0.5, -0.25])

    scalar = BoundaryData(g1=lambda p, n: 2.0)
    np.testing.assert_allclose(scalar.brinkman_flux(x, normals), [2.0, 2.0])
    np.testing.assert_allclose(scalar.darcy_flux(x, normals), [0.0, 0.0])


def test_transport_params_steps():
    """Test the number of steps is round(T/Δt)."""
    assert TransportParams(dt=1e-3, t_final=0.1).n_steps == 100
    with pytest.raises(ValidationError):
        TransportParams(dt=0.3, t_final=1.0)
    with pytest.raises(ValidationError):
        TransportParams(porosity=0.0)


def test_eoc_and_orders():
    """Test EOC between levels with halving h."""
    assert eoc(4.0, 1.0, 0.5, 0.25) == pytest.approx(2.0)
    assert math.isnan(eoc(0.0, 1.0, 0.5, 0.25))

    report = ErrorReport(
        case="ex1",
        error_exactness=6,
        rows=[
            ErrorRow(h=0.5, errors={"uB": 1e-2}),
            ErrorRow(h=0.25, errors={"uB": 2.5e-3}),
            ErrorRow(h=0.125, errors={"uB": 6.25e-4}),
        ],
    )
    orders = report.orders("uB")
    assert orders[0] is None
    assert orders[1] == pytest.approx(2.0)
    assert report.final_order("uB") == pytest.approx(2.0)
    assert report.final_order("c") is None


def test_conservation_report_scaling():
    """Test the pass threshold scales with the velocity scale."""
    report = ConservationReport(
        div_brinkman_max=1e-12,
        interface_jump_max=5e-9,
        brinkman_flux_max=0.0,
        div_darcy_max=1e-13,
        velocity_scale=10.0,
    )

    assert report.worst() == 5e-9
    assert report.passes(1e-9)
    assert not report.model_copy(update={"velocity_scale": 1.0}).passes(1e-9)


def test_stability_report_ratio():
    """Test the stability ratio and per-step maxima."""
    records = [
        StepRecord(step=1, t=0.1, c_norm=1.0, z_norm=0.0, influx=0.0, outflux=0.0, mass=1.0,
                   ledger=-3e-12, energy_residual=1e-14),
        StepRecord(step=2, t=0.2, c_norm=1.0, z_norm=0.0, influx=0.0, outflux=0.0, mass=1.0,
                   ledger=1e-12, energy_residual=-2e-14),
    ]
    report = StabilityReport(lhs=1.0, rhs=4.0, records=records)

    assert report.ratio == 0.25
    assert report.max_ledger() == 3e-12
    assert report.max_energy_residual() == 2e-14
    assert StabilityReport(lhs=0.0, rhs=0.0).ratio == 0.0
