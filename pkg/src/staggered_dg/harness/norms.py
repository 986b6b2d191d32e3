"""L² error norms of discrete fields against exact ones."""

from collections.abc import Callable

import numpy as np

from staggered_dg.fem.assembly import evaluate_field, volume_quadrature
from staggered_dg.fem.spaces import FeSpace
from staggered_dg.flow.solver import FlowSolution
from staggered_dg.harness.cases import ManufacturedCase
from staggered_dg.transport.forms import TransportSpaces
from staggered_dg.transport.stepper import TransportState


def l2_error(
    space: FeSpace,
    coefficients: np.ndarray,
    exact: Callable[[np.ndarray], np.ndarray],
    exactness: int,
) -> float:
    """‖u − u_h‖ over the subtriangles of ``space``."""
    quad = volume_quadrature(space, exactness)
    approx = space.evaluate(coefficients, quad.xi)
    values = evaluate_field(exact, quad.points).reshape(approx.shape)
    return float(np.sqrt(np.sum(quad.weights[..., None] * (values - approx) ** 2)))


def flow_errors(case: ManufacturedCase, solution: FlowSolution, exactness: int) -> dict[str, float]:
    """Errors of L (scaled by ε^{-1/2}), u_B, p_B, u_D and p_D."""
    spaces = solution.spaces
    return {
        "L": float(
            l2_error(spaces.wb, solution.l, case.l_exact, exactness) / np.sqrt(case.epsilon)
        ),
        "uB": l2_error(spaces.hb, solution.ub, case.velocity_b, exactness),
        "pB": l2_error(spaces.qb, solution.pb, case.pressure_b, exactness),
        "uD": l2_error(spaces.hd, solution.ud, case.velocity_d, exactness),
        "pD": l2_error(spaces.qd, solution.pd, case.pressure_d, exactness),
    }


def transport_errors(
    case: ManufacturedCase, state: TransportState, spaces: TransportSpaces, exactness: int
) -> dict[str, float]:
    """Errors of c_h and z_h at the time of ``state``."""
    t = state.t
    return {
        "c": l2_error(spaces.uh, state.c, lambda x: case.concentration(x, t), exactness),
        "z": l2_error(spaces.wh, state.z, lambda x: case.flux(x, t), exactness),
    }
