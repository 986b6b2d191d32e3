"""Report CSVs and field dumps."""

from staggered_dg.output.dumps import (
    flow_fields,
    lattice_points,
    read_field_dump,
    space_field,
    transport_fields,
    write_field_dump,
    write_nodal_csv,
)
from staggered_dg.output.reports import (
    ERROR_HEADER,
    STABILITY_HEADER,
    error_report_rows,
    stability_summary,
    write_error_report,
    write_stability_report,
    write_summary,
)

__all__ = [
    "ERROR_HEADER",
    "STABILITY_HEADER",
    "error_report_rows",
    "flow_fields",
    "lattice_points",
    "read_field_dump",
    "space_field",
    "stability_summary",
    "transport_fields",
    "write_error_report",
    "write_field_dump",
    "write_nodal_csv",
    "write_stability_report",
    "write_summary",
]
