"""Per-subtriangle field dumps.

A dump stores, for every subtriangle, its vertex coordinates and the values of each
field at the nodes of the degree-k lattice of the reference triangle. Those nodal
values determine the local polynomial of degree k exactly. Fields undefined on a
subtriangle (Brinkman unknowns in Ω_D and vice versa) are written as ``nan``.

    staggered-dump v1
    degree <k>
    time <t>
    fields <name>:<components> ...
    subtriangles <n>
    <id> <x0> <y0> <x1> <y1> <x2> <y2> <field values, field-major then component-major>
"""

import logging
from collections.abc import Callable
from pathlib import Path

import numpy as np

from staggered_dg.exceptions import ConfigError
from staggered_dg.fem.spaces import FeSpace
from staggered_dg.flow.solver import FlowSolution
from staggered_dg.mesh.staggered import StaggeredMesh
from staggered_dg.transport.forms import TransportSpaces
from staggered_dg.transport.stepper import TransportState

logger = logging.getLogger(__name__)

DUMP_HEADER = "staggered-dump v1"

# Maps reference points (nq, 2) to values on every subtriangle, shape (ntri, nq, ncomp).
Evaluator = Callable[[np.ndarray], np.ndarray]


def lattice_points(k: int) -> np.ndarray:
    """Reference nodes (i/k, j/k) with i + j <= k, ordered by j then i."""
    k = max(k, 1)
    return np.array([(i / k, j / k) for j in range(k + 1) for i in range(k + 1 - j)])


def space_field(space: FeSpace, coefficients: np.ndarray) -> Evaluator:
    """Evaluator of a discrete field, NaN outside the subtriangles of its space."""

    def evaluate(xi: np.ndarray) -> np.ndarray:
        result = np.full((space.mesh.n_tris, len(xi), space.n_components), np.nan)
        result[space.tris] = space.evaluate(coefficients, xi)
        return result

    return evaluate


def transport_fields(spaces: TransportSpaces, state: TransportState) -> dict[str, Evaluator]:
    return {"c": space_field(spaces.uh, state.c), "z": space_field(spaces.wh, state.z)}


def flow_fields(solution: FlowSolution) -> dict[str, Evaluator]:
    """Velocity over Ω plus L_h, p_B,h and p_D,h on their subdomains."""
    spaces = solution.spaces
    return {
        "u": solution.velocity,
        "L": space_field(spaces.wb, solution.l),
        "pB": space_field(spaces.qb, solution.pb),
        "pD": space_field(spaces.qd, solution.pd),
    }


def _nodal_values(fields: dict[str, Evaluator], nodes: np.ndarray) -> dict[str, np.ndarray]:
    return {name: evaluate(nodes) for name, evaluate in fields.items()}


def write_field_dump(
    path: Path | str,
    mesh: StaggeredMesh,
    fields: dict[str, Evaluator],
    k: int,
    t: float | None = None,
) -> Path:
    """Write the per-subtriangle ASCII dump of ``fields``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    nodes = lattice_points(k)
    values = _nodal_values(fields, nodes)
    lines = [DUMP_HEADER, f"degree {k}"]
    if t is not None:
        lines.append(f"time {t:.12e}")
    lines.append("fields " + " ".join(f"{name}:{v.shape[2]}" for name, v in values.items()))
    lines.append(f"subtriangles {mesh.n_tris}")
    for tri in range(mesh.n_tris):
        corners = mesh.points[mesh.tris[tri]].ravel()
        entries = [str(tri)] + [f"{c:.12e}" for c in corners]
        for v in values.values():
            entries += [f"{x:.12e}" for x in v[tri].T.ravel()]
        lines.append(" ".join(entries))
    path.write_text("\n".join(lines) + "\n")
    logger.debug(f"Wrote field dump {path}")
    return path


def read_field_dump(path: Path | str) -> tuple[dict[str, str], np.ndarray, dict[str, np.ndarray]]:
    """Header entries, vertex coordinates (ntri, 3, 2) and nodal values per field."""
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0].strip() != DUMP_HEADER:
        raise ConfigError(f"{path} is not a field dump", key="dump")
    header: dict[str, str] = {}
    row = 1
    while not lines[row].startswith("subtriangles"):
        key, _, rest = lines[row].partition(" ")
        header[key] = rest
        row += 1
    n_tris = int(lines[row].split()[1])
    k = int(header["degree"])
    n_nodes = len(lattice_points(k))
    layout = [(name, int(count)) for name, count in
              (item.split(":") for item in header["fields"].split())]
    body = lines[row + 1 : row + 1 + n_tris]
    data = np.array([[float(x) for x in line.split()] for line in body])
    corners = data[:, 1:7].reshape(n_tris, 3, 2)
    fields: dict[str, np.ndarray] = {}
    offset = 7
    for name, count in layout:
        width = count * n_nodes
        fields[name] = data[:, offset : offset + width].reshape(n_tris, count, n_nodes)
        fields[name] = np.transpose(fields[name], (0, 2, 1))
        offset += width
    return header, corners, fields


def write_nodal_csv(
    path: Path | str, mesh: StaggeredMesh, fields: dict[str, Evaluator], k: int
) -> Path:
    """Lattice-node samples as ``tri,x,y,<field components>`` rows for plotting tools."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    nodes = lattice_points(k)
    values = _nodal_values(fields, nodes)
    physical = mesh.to_physical(np.arange(mesh.n_tris), nodes)
    columns = ["tri", "x", "y"]
    for name, v in values.items():
        count = v.shape[2]
        columns += [name] if count == 1 else [f"{name}_{i}" for i in range(count)]
    lines = [",".join(columns)]
    for tri in range(mesh.n_tris):
        for q in range(len(nodes)):
            entries = [str(tri), f"{physical[tri, q, 0]:.12e}", f"{physical[tri, q, 1]:.12e}"]
            for v in values.values():
                entries += [f"{x:.12e}" for x in v[tri, q]]
            lines.append(",".join(entries))
    path.write_text("\n".join(lines) + "\n")
    return path
