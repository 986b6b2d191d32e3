"""Shared fixtures."""

import pytest

from staggered_dg.exceptions import SolverError
from staggered_dg.harness.cases import build_case
from staggered_dg.harness.convergence import expected_orders
from staggered_dg.mesh.io import write_primal
from staggered_dg.mesh.primal import Rectangle, ladder_primal
from staggered_dg.mesh.staggered import subdivide
from staggered_dg.models.config import SolverSettings
from staggered_dg.models.reports import ConservationReport, ErrorRow

BRINKMAN = Rectangle(x0=0.0, x1=0.5, y0=0.0, y1=1.0)
DARCY = Rectangle(x0=0.5, x1=1.0, y0=0.0, y1=1.0)


@pytest.fixture
def settings():
    """Default numerical settings, independent of the environment."""
    return SolverSettings(_env_file=None)


@pytest.fixture
def coarse_mesh():
    """Staggered mesh of two side-by-side unit-height rectangles with h = 1/2."""
    return subdivide(ladder_primal(BRINKMAN, DARCY, 2))


@pytest.fixture
def mesh_4():
    """Staggered mesh of the manufactured-case domain with h = 1/4."""
    return subdivide(ladder_primal(BRINKMAN, DARCY, 4))


@pytest.fixture(scope="session")
def ex1():
    """Polynomial manufactured case."""
    return build_case("ex1")


@pytest.fixture(scope="session")
def ex2():
    """Trigonometric manufactured case."""
    return build_case("ex2")


@pytest.fixture
def mesh_file(tmp_path):
    """The h = 1/2 primal mesh written to a file."""
    return write_primal(ladder_primal(BRINKMAN, DARCY, 2), tmp_path / "coarse.msh")


def _stub_rung(orders=None, failing=None):
    """Replacement for run_rung giving errors h^order per column; records its calls."""
    calls = []

    def run_rung(case, inverse_h, k, dt, t_final, settings):
        calls.append(inverse_h)
        if inverse_h == failing:
            raise SolverError("singular system")
        h = 1.0 / inverse_h
        rates = orders or expected_orders(k)
        conservation = ConservationReport(div_brinkman_max=0.0, interface_jump_max=0.0,
                                          brinkman_flux_max=0.0, div_darcy_max=0.0)
        return ErrorRow(h=h, errors={c: h**r for c, r in rates.items()},
                        conservation=conservation)

    return run_rung, calls


@pytest.fixture
def rung_stub():
    """Factory of run_rung stand-ins, so ladder tests skip the solves."""
    return _stub_rung
