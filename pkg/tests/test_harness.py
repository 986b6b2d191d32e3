"""Test manufactured cases, ladders and demonstrations."""

import numpy as np
import yaml
import pytest

from staggered_dg.exceptions import ConfigError, SolverError
from staggered_dg.harness import (
    RandomConductivity,
    build_case,
    concentration_centroid,
    expected_orders,
    order_checks,
    run_convergence,
    run_demo,
)
from staggered_dg.harness.cases import INTERFACE_TOL, SELF_CHECK_TOL
from staggered_dg.harness.demos import disc_indicator
from staggered_dg.mesh import Rectangle
from staggered_dg.mesh.io import step_interface_mesh, write_primal
from staggered_dg.models import ErrorReport, ErrorRow, parse_config
from staggered_dg.output.dumps import read_field_dump
from staggered_dg.transport import build_transport_spaces


@pytest.mark.parametrize("case_id", ["ex1", "ex2"])
def test_self_check_passes(case_id):
    """Test the derived sources match differences of the exact fields."""
    case = build_case(case_id)

    for name, value in case.residuals.items():
        limit = INTERFACE_TOL if name == "interface" else SELF_CHECK_TOL
        assert value <= limit, name
    assert set(case.residuals) >= {"brinkman_momentum", "darcy_mass", "transport", "interface",
                                   "lifting_mass"}


def test_self_check_with_overrides():
    """Test sources follow parameter overrides."""
    case = build_case("ex2", epsilon=0.01, alpha=0.0, k_darcy=2.0, k_diff=0.001)

    assert case.epsilon == 0.01
    assert case.residuals["brinkman_momentum"] <= SELF_CHECK_TOL


def test_exact_fields(ex1):
    """Test the pressure vanishes on Γ from the Darcy side and c starts at zero."""
    y = np.linspace(0.0, 1.0, 11)
    gamma = np.column_stack([np.full(11, 0.5), y])
    points = np.random.default_rng(1).uniform(0.0, 1.0, (20, 2))

    np.testing.assert_allclose(ex1.pressure_d(gamma), 0.0, atol=1e-15)
    np.testing.assert_allclose(ex1.pressure_b(gamma), 0.0, atol=1e-15)
    np.testing.assert_allclose(ex1.concentration(points, 0.0), 0.0)
    assert ex1.check_interface() <= INTERFACE_TOL


def test_interface_points(ex1):
    """Test Γ is sampled with the normal out of Ω_B."""
    points, normal = ex1.interface_points(5)

    np.testing.assert_allclose(points[:, 0], 0.5)
    np.testing.assert_allclose(normal, [1.0, 0.0])


def test_unknown_case():
    """Test only ex1 and ex2 are manufactured."""
    with pytest.raises(ConfigError) as excinfo:
        build_case("ex3")

    assert excinfo.value.key == "case"


@pytest.mark.parametrize(
    "override,key",
    [({"epsilon": 0.0}, "epsilon"), ({"alpha": -1.0}, "alpha"), ({"k_diff": 0.0}, "kdiff")],
)
def test_invalid_parameters(override, key):
    """Test invalid coefficients name their key."""
    with pytest.raises(ConfigError) as excinfo:
        build_case("ex1", **override)

    assert excinfo.value.key == key


def test_expected_orders():
    """Test k+1 everywhere except k for p_D."""
    orders = expected_orders(2)

    assert orders["uB"] == 3.0
    assert orders["c"] == 3.0
    assert orders["pD"] == 2.0


def _report(k, rates, ladder=(2, 4, 8)):
    report = ErrorReport(case="ex1", k=k, error_exactness=8)
    for n in ladder:
        h = 1.0 / n
        report.rows.append(ErrorRow(h=h, errors={c: h**r for c, r in rates.items()}))
    return report


def test_order_checks():
    """Test final EOCs are judged against their targets and tolerances."""
    rates = expected_orders(1)
    rates["uD"] = 1.5
    rates["pD"] = 1.2

    checks = order_checks(_report(1, rates), skip=("z",))

    assert checks["eoc_uB"] is True
    assert checks["eoc_uD"] is False
    assert checks["eoc_pD"] is False
    assert "eoc_z" not in checks


def test_order_checks_single_level():
    """Test a one-level ladder has no order checks."""
    assert order_checks(_report(1, expected_orders(1), ladder=(4,))) == {}


def test_run_convergence_ladder(ex1, settings, monkeypatch, rung_stub):
    """Test rungs run coarse to fine and every row reaches the callback."""
    stub, calls = rung_stub()
    monkeypatch.setattr("staggered_dg.harness.convergence.run_rung", stub)
    seen = []

    report = run_convergence(ex1, [8, 2, 4], 1, 1e-3, 0.1, settings,
                             on_row=lambda r: seen.append(len(r.rows)))

    assert calls == [2, 4, 8]
    assert seen == [1, 2, 3]
    assert [row.h for row in report.rows] == [0.5, 0.25, 0.125]
    assert report.final_order("uB") == pytest.approx(2.0)
    assert all(order_checks(report).values())


def test_run_convergence_keeps_rows_on_failure(ex1, settings, monkeypatch, rung_stub):
    """Test a failing rung propagates after earlier rows were reported."""
    stub, _ = rung_stub(failing=8)
    monkeypatch.setattr("staggered_dg.harness.convergence.run_rung", stub)
    seen = []

    with pytest.raises(SolverError):
        run_convergence(ex1, [2, 4, 8], 1, 1e-3, 0.1, settings,
                        on_row=lambda r: seen.append(len(r.rows)))

    assert seen == [1, 2]


def test_random_conductivity():
    """Test the random field is seeded, cellwise constant and within bounds."""
    box = Rectangle(x0=0.0, x1=12.0, y0=0.0, y1=6.0)
    first = RandomConductivity(box, seed=3)
    again = RandomConductivity(box, seed=3)
    other = RandomConductivity(box, seed=4)

    assert first.values.shape == (6, 12)
    assert np.all((first.values >= 1e-6) & (first.values <= 1e-3))
    np.testing.assert_array_equal(first.values, again.values)
    assert not np.array_equal(first.values, other.values)
    points = np.array([[0.2, 0.2], [0.8, 0.9], [11.5, 5.5]])
    values = first(points)
    assert values[0] == values[1] == first.values[0, 0]
    assert values[2] == first.values[5, 11]


def test_random_conductivity_bounds():
    """Test non-positive bounds are rejected."""
    with pytest.raises(ConfigError):
        RandomConductivity(Rectangle(x0=0.0, x1=1.0, y0=0.0, y1=1.0), low=0.0)


def test_disc_indicator():
    """Test the indicator of the open disc."""
    indicator = disc_indicator((0.1, 0.7), 0.1)

    values = indicator(np.array([[0.1, 0.7], [0.15, 0.7], [0.2, 0.7], [0.5, 0.5]]))

    np.testing.assert_array_equal(values, [1.0, 1.0, 0.0, 0.0])


def test_concentration_centroid(coarse_mesh):
    """Test a uniform concentration has the centroid of the domain."""
    spaces = build_transport_spaces(coarse_mesh, 1)
    ones = spaces.uh.interpolate(lambda x: np.ones(len(x)))

    assert concentration_centroid(spaces, ones) == pytest.approx((0.5, 0.5))
    assert all(np.isnan(concentration_centroid(spaces, np.zeros(spaces.uh.n_dofs))))


def test_lake_demo(tmp_path, settings):
    """Test the lake demo runs to its snapshot and writes its artifacts."""
    config = parse_config(flags={
        "command": "demo", "case": "ex3", "resolution": 2, "dt": 0.5, "times": [1.0],
        "out": str(tmp_path),
    })

    result = run_demo("ex3", config, settings, out=tmp_path)

    assert result.snapshot_at(1.0).state.n == 2
    assert result.snapshot_at(0.0).state.n == 0
    assert result.run.report.max_ledger() <= 1e-8
    assert (tmp_path / "ex3_stability.csv").exists()
    assert (tmp_path / "ex3_summary.yaml").exists()
    assert (tmp_path / "ex3_c_0000002.csv").exists()
    with pytest.raises(KeyError):
        result.snapshot_at(0.5)


def test_step_demo_needs_mesh(settings):
    """Test ex4 refuses to run without an ingested mesh."""
    config = parse_config(flags={"command": "demo", "case": "ex4"})

    with pytest.raises(ConfigError) as excinfo:
        run_demo("ex4", config, settings)

    assert excinfo.value.key == "mesh"


def test_unknown_demo(settings):
    """Test demos are limited to ex3 and ex4."""
    config = parse_config(flags={"command": "demo", "case": "ex3"})

    with pytest.raises(ConfigError):
        run_demo("ex1", config, settings)


def test_step_demo_dumps_balance_the_ledger(tmp_path, settings):
    """Test ex4 on an ingested step mesh: every dump integrates to the recorded mass."""
    mesh_path = write_primal(step_interface_mesh(step_heights=(2.0, 3.0, 2.0), cells_per_unit=1),
                             tmp_path / "step.msh")
    config = parse_config(flags={
        "command": "demo", "case": "ex4", "mesh": str(mesh_path), "dt": 0.002,
        "times": [0.004], "dump_stride": 1, "out": str(tmp_path),
    })

    result = run_demo("ex4", config, settings, out=tmp_path)

    assert result.run.report.max_ledger() <= 1e-8
    assert result.conservation.passes(settings.conservation_tol)
    assert [s.state.n for s in result.snapshots] == [0, 1, 2]
    for record in result.run.report.records:
        header, corners, fields = read_field_dump(tmp_path / f"ex4_c_{record.step:07d}.dump")
        edges = corners[:, 1:] - corners[:, :1]
        areas = 0.5 * np.abs(edges[:, 0, 0] * edges[:, 1, 1] - edges[:, 0, 1] * edges[:, 1, 0])
        mass = float(np.sum(areas * fields["c"][:, :, 0].mean(axis=1)))
        assert float(header["time"]) == pytest.approx(record.t)
        assert mass == pytest.approx(record.mass, rel=1e-10, abs=1e-10)
    summary = yaml.safe_load((tmp_path / "ex4_summary.yaml").read_text())
    assert summary["case"] == "ex4"
    assert len(summary["centroids"]) == 3


def _flow_ladder(case, ladder, settings):
    report = run_convergence(case, ladder, k=1, dt=1e-3, t_final=2e-3, settings=settings)
    for row in report.rows:
        assert row.conservation.passes(settings.conservation_tol), row.h
    return report


@pytest.mark.slow
@pytest.mark.parametrize("case_id", ["ex1", "ex2"])
def test_flow_ladder_orders(case_id, settings):
    """Test second-order flow errors on h = 1/4, 1/8, 1/16 with exact conservation."""
    report = _flow_ladder(build_case(case_id), [4, 8, 16], settings)

    for column in ("L", "uB", "pB", "uD"):
        assert report.final_order(column) >= 1.8, column
    assert report.final_order("pD") >= 0.8


@pytest.mark.slow
def test_flow_ladder_small_viscosity(settings):
    """Test the velocity keeps its order at ε = 1e-8."""
    report = _flow_ladder(build_case("ex1", epsilon=1e-8, k_diff=1e-3), [4, 8], settings)

    assert report.epsilon == 1e-8
    for column in ("uB", "uD"):
        assert report.final_order(column) >= 1.8, column
