"""Reader and writers for the ``staggered-mesh v1`` ASCII format."""

import logging
from collections.abc import Iterator, Sequence
from pathlib import Path

import numpy as np

from staggered_dg.exceptions import ConfigError, MeshValidationError
from staggered_dg.mesh.primal import (
    BoundaryTag,
    CellKind,
    EdgeKey,
    PrimalMesh,
    Subdomain,
    complete_tags,
    edge_key,
    validate_primal,
)

logger = logging.getLogger(__name__)

HEADER = "staggered-mesh v1"


class _Lines:
    """Iterator over significant lines with 1-based line numbers."""

    def __init__(self, text: str) -> None:
        self._items: Iterator[tuple[int, str]] = (
            (number, line.strip())
            for number, line in enumerate(text.splitlines(), start=1)
            if line.strip() and not line.strip().startswith("#")
        )
        self.number = 0

    def next(self, what: str) -> list[str]:
        try:
            self.number, line = next(self._items)
        except StopIteration:
            raise MeshValidationError(f"unexpected end of file, expected {what}",
                                      line=self.number + 1) from None
        return line.split()

    def section(self, name: str) -> int:
        tokens = self.next(f"'{name} <count>'")
        if len(tokens) != 2 or tokens[0] != name:
            raise MeshValidationError(f"expected '{name} <count>'", line=self.number)
        return self.integer(tokens[1])

    def integer(self, token: str) -> int:
        try:
            value = int(token)
        except ValueError:
            raise MeshValidationError(f"expected an integer, got '{token}'",
                                      line=self.number) from None
        if value < 0:
            raise MeshValidationError(f"negative value {value}", line=self.number)
        return value

    def real(self, token: str) -> float:
        try:
            return float(token)
        except ValueError:
            raise MeshValidationError(f"expected a number, got '{token}'",
                                      line=self.number) from None


def ingest_primal(path: Path | str) -> PrimalMesh:
    """Read and validate a primal mesh file."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ConfigError(f"cannot read mesh file: {e}", key="mesh") from e

    lines = _Lines(text)
    if " ".join(lines.next("header")) != HEADER:
        raise MeshValidationError(f"expected header '{HEADER}'", line=lines.number)

    n_vertices = lines.section("vertices")
    vertices = np.empty((n_vertices, 2))
    for i in range(n_vertices):
        tokens = lines.next("vertex 'x y'")
        if len(tokens) != 2:
            raise MeshValidationError("vertex line needs 'x y'", line=lines.number)
        vertices[i] = [lines.real(tokens[0]), lines.real(tokens[1])]

    n_cells = lines.section("cells")
    cells: list[tuple[int, ...]] = []
    subdomains = np.empty(n_cells, dtype=np.int64)
    for c in range(n_cells):
        tokens = lines.next("cell line")
        corners = lines.integer(tokens[0])
        if corners not in (3, 4) or len(tokens) != corners + 2:
            raise MeshValidationError("cell line needs 'ncorners i0 .. subdomain'",
                                      line=lines.number)
        indices = tuple(lines.integer(tok) for tok in tokens[1 : corners + 1])
        if max(indices) >= n_vertices:
            raise MeshValidationError("vertex index out of range", line=lines.number)
        try:
            subdomains[c] = int(Subdomain.from_label(tokens[-1]))
        except ValueError as e:
            raise MeshValidationError(str(e), line=lines.number) from None
        cells.append(indices)

    n_tags = lines.section("boundary")
    tags: dict[EdgeKey, BoundaryTag] = {}
    for _ in range(n_tags):
        tokens = lines.next("boundary line")
        if len(tokens) != 3:
            raise MeshValidationError("boundary line needs 'i j tag'", line=lines.number)
        key = edge_key(lines.integer(tokens[0]), lines.integer(tokens[1]))
        try:
            tag = BoundaryTag(tokens[2])
        except ValueError:
            raise MeshValidationError(f"unknown tag '{tokens[2]}'", line=lines.number) from None
        if key in tags:
            raise MeshValidationError(f"edge {key} tagged twice", line=lines.number)
        tags[key] = tag

    mesh = PrimalMesh(vertices, tuple(cells), subdomains, tags)
    validate_primal(mesh)
    mesh = complete_tags(mesh)
    logger.info(f"Ingested {path}: {mesh.n_vertices} vertices, {mesh.n_cells} cells")
    return mesh


def write_primal(mesh: PrimalMesh, path: Path | str) -> Path:
    """Write a primal mesh in the ASCII format."""
    path = Path(path)
    lines = [HEADER, f"vertices {mesh.n_vertices}"]
    lines += [f"{x:.17g} {y:.17g}" for x, y in mesh.vertices]
    lines.append(f"cells {mesh.n_cells}")
    for corners, sub in zip(mesh.cells, mesh.subdomains, strict=True):
        lines.append(f"{len(corners)} {' '.join(map(str, corners))} {Subdomain(int(sub)).label}")
    lines.append(f"boundary {len(mesh.boundary_tags)}")
    for (a, b), tag in sorted(mesh.boundary_tags.items()):
        lines.append(f"{a} {b} {tag.value}")
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n")
    return path


def step_interface_mesh(
    length: float = 12.0,
    height: float = 6.0,
    step_heights: Sequence[float] = (2.25, 2.0, 2.25),
    cells_per_unit: int = 4,
    cell_kind: CellKind = CellKind.QUAD,
) -> PrimalMesh:
    """Darcy layer below a Brinkman layer, separated by a piecewise-constant interface.

    The interface height over the i-th of ``len(step_heights)`` equal x-segments is
    ``step_heights[i]``; all heights and segment ends must lie on grid lines.
    """
    nx = int(round(length * cells_per_unit))
    ny = int(round(height * cells_per_unit))
    if nx < 1 or ny < 1:
        raise ConfigError("grid too coarse for the domain", key="cells_per_unit")
    spacing = 1.0 / cells_per_unit
    segment = length / len(step_heights)
    for value in (*step_heights, segment):
        if abs(value / spacing - round(value / spacing)) > 1e-9:
            raise ConfigError(f"{value} is off the grid of spacing {spacing}", key="step_heights")
    if any(not 0.0 < s < height for s in step_heights):
        raise ConfigError("step heights must lie strictly inside the domain", key="step_heights")

    xs = np.linspace(0.0, length, nx + 1)
    ys = np.linspace(0.0, height, ny + 1)
    vertices = np.array([(x, y) for y in ys for x in xs])

    def vid(i: int, j: int) -> int:
        return j * (nx + 1) + i

    cells: list[tuple[int, ...]] = []
    subdomains: list[int] = []
    for j in range(ny):
        for i in range(nx):
            cx, cy = 0.5 * (xs[i] + xs[i + 1]), 0.5 * (ys[j] + ys[j + 1])
            level = step_heights[min(int(cx // segment), len(step_heights) - 1)]
            sub = int(Subdomain.DARCY if cy < level else Subdomain.BRINKMAN)
            p00, p10, p11, p01 = vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)
            if cell_kind is CellKind.QUAD:
                cells.append((p00, p10, p11, p01))
                subdomains.append(sub)
            else:
                cells += [(p00, p10, p11), (p00, p11, p01)]
                subdomains += [sub, sub]

    sub_array = np.array(subdomains, dtype=np.int64)
    draft = PrimalMesh(vertices, tuple(cells), sub_array, {})
    tags: dict[EdgeKey, BoundaryTag] = {}
    for key, owners in draft.edge_cells().items():
        if len(owners) == 1:
            brinkman = sub_array[owners[0]] == Subdomain.BRINKMAN
            tags[key] = BoundaryTag.GAMMA_B if brinkman else BoundaryTag.GAMMA_D
        elif sub_array[owners[0]] != sub_array[owners[1]]:
            tags[key] = BoundaryTag.INTERFACE
    mesh = PrimalMesh(vertices, draft.cells, sub_array, tags)
    validate_primal(mesh)
    return mesh


def write_step_mesh(
    path: Path | str, cells_per_unit: int = 4, cell_kind: CellKind = CellKind.QUAD
) -> Path:
    """Write the default step-interface mesh (see ``step_interface_mesh``)."""
    return write_primal(step_interface_mesh(cells_per_unit=cells_per_unit, cell_kind=cell_kind),
                        path)
