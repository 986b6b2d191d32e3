"""Test report and dump writers."""

import csv
import math

import numpy as np
import pytest
import yaml

from staggered_dg.exceptions import ConfigError
from staggered_dg.fem import SpaceKind, build_space
from staggered_dg.models import ConservationReport, ErrorReport, ErrorRow, StabilityReport
from staggered_dg.models.reports import StepRecord
from staggered_dg.output import (
    ERROR_HEADER,
    STABILITY_HEADER,
    lattice_points,
    read_field_dump,
    space_field,
    stability_summary,
    write_error_report,
    write_field_dump,
    write_nodal_csv,
    write_stability_report,
    write_summary,
)
from staggered_dg.output.reports import number


@pytest.mark.parametrize(
    "value,text",
    [(1.5, "1.500000e+00"), (-2e-12, "-2.000000e-12"), (None, "NA"), (math.nan, "NA")],
)
def test_number(value, text):
    """Test fixed scientific formatting."""
    assert number(value) == text


def test_error_header():
    """Test error and order columns alternate per field."""
    assert ERROR_HEADER[:5] == ["h", "err_L", "ord_L", "err_uB", "ord_uB"]
    assert ERROR_HEADER[-3:] == ["div_uB_max", "iface_jump_max", "div_uD_residual"]


def test_write_error_report(tmp_path):
    """Test the first row has no orders and missing conservation prints NA."""
    report = ErrorReport(case="ex1", k=1, error_exactness=8)
    conservation = ConservationReport(div_brinkman_max=1e-14, interface_jump_max=2e-14,
                                      brinkman_flux_max=0.0, div_darcy_max=3e-14)
    report.rows.append(ErrorRow(h=0.5, errors={"uB": 0.4}, conservation=conservation))
    report.rows.append(ErrorRow(h=0.25, errors={"uB": 0.1}))

    path = write_error_report(report, tmp_path / "nested" / "ex1.csv")
    rows = list(csv.reader(path.open()))

    assert rows[0] == ERROR_HEADER
    assert rows[1][0] == "5.000000e-01"
    assert rows[1][ERROR_HEADER.index("ord_uB")] == "NA"
    assert rows[1][ERROR_HEADER.index("div_uB_max")] == "1.000000e-14"
    assert rows[2][ERROR_HEADER.index("ord_uB")] == "2.000000e+00"
    assert rows[2][ERROR_HEADER.index("err_L")] == "NA"
    assert rows[2][-1] == "NA"


def _stability():
    records = [
        StepRecord(step=n, t=0.1 * n, c_norm=1.0, z_norm=0.5, influx=0.0, outflux=0.1,
                   mass=1.0, ledger=1e-15 * n, energy_residual=-2e-14)
        for n in (1, 2)
    ]
    return StabilityReport(lhs=2.0, rhs=4.0, records=records)


def test_write_stability_report(tmp_path):
    """Test one row per step."""
    path = write_stability_report(_stability(), tmp_path / "stability.csv")
    rows = list(csv.reader(path.open()))

    assert rows[0] == STABILITY_HEADER
    assert [row[0] for row in rows[1:]] == ["1", "2"]
    assert rows[2][STABILITY_HEADER.index("ledger")] == "2.000000e-15"


def test_summary_yaml(tmp_path):
    """Test summaries are sorted YAML with plain floats."""
    summary = stability_summary(_stability())
    summary["case"] = "ex1"

    path = write_summary(summary, tmp_path / "summary.yaml")
    loaded = yaml.safe_load(path.read_text())

    assert loaded["ratio"] == 0.5
    assert loaded["steps"] == 2
    assert loaded["max_energy_residual"] == pytest.approx(2e-14)
    assert path.read_text().splitlines()[0].startswith("case:")


def test_lattice_points():
    """Test the degree-k lattice of the reference triangle."""
    assert len(lattice_points(1)) == 3
    assert len(lattice_points(3)) == 10
    np.testing.assert_allclose(lattice_points(2)[:3], [[0.0, 0.0], [0.5, 0.0], [1.0, 0.0]])


def test_field_dump(coarse_mesh, tmp_path):
    """Test dumps store nodal values that reproduce the field."""
    space = build_space(SpaceKind.QB, coarse_mesh, 2)
    coefficients = space.interpolate(lambda x: x[:, 0] + 2.0 * x[:, 1] ** 2)

    evaluators = {"pB": space_field(space, coefficients)}
    path = write_field_dump(tmp_path / "p.dump", coarse_mesh, evaluators, 2, t=0.25)
    header, corners, fields = read_field_dump(path)

    assert header["degree"] == "2"
    assert float(header["time"]) == 0.25
    assert corners.shape == (coarse_mesh.n_tris, 3, 2)
    values = fields["pB"]
    assert values.shape == (coarse_mesh.n_tris, 6, 1)
    points = coarse_mesh.to_physical(space.tris, lattice_points(2))
    np.testing.assert_allclose(values[space.tris, :, 0],
                               points[..., 0] + 2.0 * points[..., 1] ** 2, atol=1e-10)
    darcy = np.setdiff1d(np.arange(coarse_mesh.n_tris), space.tris)
    assert np.all(np.isnan(values[darcy]))


def test_read_field_dump_rejects_other_files(tmp_path):
    """Test a file without the dump header is rejected."""
    path = tmp_path / "other.txt"
    path.write_text("hello\n")

    with pytest.raises(ConfigError):
        read_field_dump(path)


def test_nodal_csv(coarse_mesh, tmp_path):
    """Test nodal CSV columns name every field component."""
    def velocity(xi):
        return np.ones((coarse_mesh.n_tris, len(xi), 2))

    def pressure(xi):
        return np.zeros((coarse_mesh.n_tris, len(xi), 1))

    path = write_nodal_csv(tmp_path / "nodal.csv", coarse_mesh, {"u": velocity, "p": pressure}, 1)
    rows = list(csv.reader(path.open()))

    assert rows[0] == ["tri", "x", "y", "u_0", "u_1", "p"]
    assert len(rows) == 1 + 3 * coarse_mesh.n_tris


def test_summary_yaml_numpy_values(tmp_path):
    """Test numpy scalars and arrays are written as plain YAML numbers and lists."""
    summary = {"case": "ex1", "errors": {"L": np.float64(0.25), "steps": np.int64(3)},
               "orders": np.array([1.0, 2.0]), "rows": [(np.float32(0.5), 1)]}

    path = write_summary(summary, tmp_path / "numpy.yaml")
    loaded = yaml.safe_load(path.read_text())

    assert loaded["errors"] == {"L": 0.25, "steps": 3}
    assert loaded["orders"] == [1.0, 2.0]
    assert loaded["rows"] == [[0.5, 1]]
