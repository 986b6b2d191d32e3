"""Manufactured cases, error norms, convergence ladders and demonstrations."""

from staggered_dg.harness.cases import MANUFACTURED_CASES, ManufacturedCase, build_case
from staggered_dg.harness.convergence import (
    expected_orders,
    order_checks,
    run_convergence,
    run_rung,
)
from staggered_dg.harness.demos import (
    DEMO_CASES,
    DemoResult,
    RandomConductivity,
    concentration_centroid,
    run_demo,
)
from staggered_dg.harness.norms import flow_errors, l2_error, transport_errors

__all__ = [
    "DEMO_CASES",
    "MANUFACTURED_CASES",
    "DemoResult",
    "ManufacturedCase",
    "RandomConductivity",
    "build_case",
    "concentration_centroid",
    "expected_orders",
    "flow_errors",
    "l2_error",
    "order_checks",
    "run_convergence",
    "run_demo",
    "run_rung",
    "transport_errors",
]
