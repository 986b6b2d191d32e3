"""Primal partitions of the Brinkman and Darcy subdomains."""

import logging
from dataclasses import dataclass, field
from enum import Enum, IntEnum

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator

from staggered_dg.exceptions import ConfigError, MeshValidationError

logger = logging.getLogger(__name__)

MIN_ANGLE_WARNING_DEG = 10.0


class Subdomain(IntEnum):
    """Subdomain of a cell."""

    BRINKMAN = 0
    DARCY = 1

    @property
    def label(self) -> str:
        """Single-letter label used by the mesh file format."""
        return "B" if self is Subdomain.BRINKMAN else "D"

    @classmethod
    def from_label(cls, label: str) -> "Subdomain":
        """Parse ``B`` or ``D``."""
        if label == "B":
            return cls.BRINKMAN
        if label == "D":
            return cls.DARCY
        raise ValueError(f"unknown subdomain '{label}'")


class BoundaryTag(str, Enum):
    """Tags of boundary and interface edges."""

    GAMMA_B = "GB"
    GAMMA_D = "GD"
    INTERFACE = "IF"


class CellKind(str, Enum):
    """Shape of rectangular-grid cells."""

    TRIANGLE = "triangle"
    QUAD = "quad"


class Rectangle(BaseModel):
    """Axis-aligned rectangle (x0, x1) × (y0, y1)."""

    model_config = ConfigDict(frozen=True)

    x0: float
    x1: float
    y0: float
    y1: float

    @model_validator(mode="after")
    def _positive_extent(self) -> "Rectangle":
        if self.x1 <= self.x0 or self.y1 <= self.y0:
            raise ValueError("rectangle must have positive width and height")
        return self

    @property
    def width(self) -> float:
        return self.x1 - self.x0

    @property
    def height(self) -> float:
        return self.y1 - self.y0


EdgeKey = tuple[int, int]


def edge_key(a: int, b: int) -> EdgeKey:
    """Canonical (sorted) vertex pair of an edge."""
    return (a, b) if a < b else (b, a)


@dataclass(frozen=True)
class PrimalMesh:
    """Initial partition: vertices, cells, subdomain per cell, boundary/interface tags."""

    vertices: np.ndarray
    cells: tuple[tuple[int, ...], ...]
    subdomains: np.ndarray
    boundary_tags: dict[EdgeKey, BoundaryTag] = field(default_factory=dict)

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    def cell_points(self, cell: int) -> np.ndarray:
        """Corner coordinates of a cell, counter-clockwise."""
        return self.vertices[list(self.cells[cell])]

    def cell_area(self, cell: int) -> float:
        """Signed area of a cell (shoelace)."""
        return polygon_area(self.cell_points(cell))

    def cell_edges(self, cell: int) -> list[EdgeKey]:
        """Canonical keys of the edges of a cell."""
        corners = self.cells[cell]
        return [edge_key(corners[i], corners[(i + 1) % len(corners)]) for i in range(len(corners))]

    def edge_cells(self) -> dict[EdgeKey, list[int]]:
        """Map every edge to the cells using it."""
        result: dict[EdgeKey, list[int]] = {}
        for cell in range(self.n_cells):
            for key in self.cell_edges(cell):
                result.setdefault(key, []).append(cell)
        return result

    def count_edges(self) -> int:
        return len(self.edge_cells())

    def interface_edges(self) -> list[EdgeKey]:
        """Edges tagged as interface, sorted."""
        return sorted(k for k, tag in self.boundary_tags.items() if tag is BoundaryTag.INTERFACE)

    def total_area(self) -> float:
        return float(sum(self.cell_area(c) for c in range(self.n_cells)))


def polygon_area(points: np.ndarray) -> float:
    """Signed shoelace area of a polygon."""
    x, y = points[:, 0], points[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def min_angle_deg(points: np.ndarray) -> float:
    """Smallest interior angle of a polygon in degrees."""
    angles = []
    n = len(points)
    for i in range(n):
        u = points[(i - 1) % n] - points[i]
        v = points[(i + 1) % n] - points[i]
        cosine = np.dot(u, v) / (np.linalg.norm(u) * np.linalg.norm(v))
        angles.append(np.degrees(np.arccos(np.clip(cosine, -1.0, 1.0))))
    return float(min(angles))


def validate_primal(mesh: PrimalMesh) -> None:
    """Check the primal mesh invariants; raises MeshValidationError naming the cell."""
    if mesh.subdomains.shape != (mesh.n_cells,):
        raise MeshValidationError("one subdomain tag per cell required")
    scale = float(np.ptp(mesh.vertices, axis=0).max()) if mesh.n_vertices else 1.0
    area_tol = 1e-14 * max(scale, 1.0) ** 2
    smallest_angle = 180.0
    for cell, corners in enumerate(mesh.cells):
        if len(corners) not in (3, 4):
            raise MeshValidationError(f"{len(corners)} corners, expected 3 or 4", cell=cell)
        if len(set(corners)) != len(corners):
            raise MeshValidationError("repeated corner", cell=cell)
        if min(corners) < 0 or max(corners) >= mesh.n_vertices:
            raise MeshValidationError("corner index out of range", cell=cell)
        points = mesh.cell_points(cell)
        area = polygon_area(points)
        if abs(area) <= area_tol:
            raise MeshValidationError("degenerate cell (zero area)", cell=cell)
        if area < 0.0:
            raise MeshValidationError("clockwise orientation", cell=cell)
        if len(corners) == 4:
            for i in range(4):
                a, b, c = points[i], points[(i + 1) % 4], points[(i + 2) % 4]
                cross = (b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0])
                if cross <= 0.0:
                    raise MeshValidationError("quadrilateral is not strictly convex", cell=cell)
        smallest_angle = min(smallest_angle, min_angle_deg(points))

    directed: dict[tuple[int, int], int] = {}
    for cell, corners in enumerate(mesh.cells):
        for i in range(len(corners)):
            a, b = corners[i], corners[(i + 1) % len(corners)]
            if (a, b) in directed:
                raise MeshValidationError(
                    f"edge ({a}, {b}) traversed twice in the same direction (overlap)", cell=cell
                )
            directed[(a, b)] = cell

    edge_cells = mesh.edge_cells()
    for key, cells in edge_cells.items():
        if len(cells) > 2:
            raise MeshValidationError(f"edge {key} shared by {len(cells)} cells", cell=cells[2])
        tag = mesh.boundary_tags.get(key)
        if len(cells) == 2:
            first, second = (Subdomain(int(mesh.subdomains[c])) for c in cells)
            if first != second:
                if tag not in (None, BoundaryTag.INTERFACE):
                    raise MeshValidationError(
                        f"interface edge {key} tagged {tag.value}", cell=cells[0]
                    )
            elif tag is not None:
                raise MeshValidationError(f"interior edge {key} tagged {tag.value}", cell=cells[0])
        else:
            owner = Subdomain(int(mesh.subdomains[cells[0]]))
            expected = BoundaryTag.GAMMA_B if owner is Subdomain.BRINKMAN else BoundaryTag.GAMMA_D
            if tag is None:
                raise MeshValidationError(f"boundary edge {key} has no tag", cell=cells[0])
            if tag is not expected:
                raise MeshValidationError(
                    f"boundary edge {key} tagged {tag.value}, expected {expected.value}",
                    cell=cells[0],
                )
    for key in mesh.boundary_tags:
        if key not in edge_cells:
            raise MeshValidationError(f"tag on unknown edge {key}")

    if smallest_angle < MIN_ANGLE_WARNING_DEG:
        logger.warning(f"Mesh has a minimum angle of {smallest_angle:.2f} degrees (< 10)")


def complete_tags(mesh: PrimalMesh) -> PrimalMesh:
    """Return the mesh with interface edges tagged from topology."""
    tags = dict(mesh.boundary_tags)
    for key, cells in mesh.edge_cells().items():
        if len(cells) == 2 and mesh.subdomains[cells[0]] != mesh.subdomains[cells[1]]:
            tags[key] = BoundaryTag.INTERFACE
    return PrimalMesh(mesh.vertices, mesh.cells, mesh.subdomains, tags)


def _grid(
    rect: Rectangle, nx: int, ny: int, kind: CellKind, index: dict[tuple[float, float], int],
    coords: list[tuple[float, float]],
) -> list[tuple[int, ...]]:
    xs = np.linspace(rect.x0, rect.x1, nx + 1)
    ys = np.linspace(rect.y0, rect.y1, ny + 1)

    def vertex(i: int, j: int) -> int:
        key = (round(float(xs[i]), 12), round(float(ys[j]), 12))
        if key not in index:
            index[key] = len(coords)
            coords.append((float(xs[i]), float(ys[j])))
        return index[key]

    cells: list[tuple[int, ...]] = []
    for j in range(ny):
        for i in range(nx):
            p00, p10 = vertex(i, j), vertex(i + 1, j)
            p11, p01 = vertex(i + 1, j + 1), vertex(i, j + 1)
            if kind is CellKind.QUAD:
                cells.append((p00, p10, p11, p01))
            else:
                cells.append((p00, p10, p11))
                cells.append((p00, p11, p01))
    return cells


def _shares_full_edge(a: Rectangle, b: Rectangle) -> bool:
    tol = 1e-12 * max(a.width, a.height, b.width, b.height)
    same_y = abs(a.y0 - b.y0) <= tol and abs(a.y1 - b.y1) <= tol
    same_x = abs(a.x0 - b.x0) <= tol and abs(a.x1 - b.x1) <= tol
    touch_x = abs(a.x1 - b.x0) <= tol or abs(b.x1 - a.x0) <= tol
    touch_y = abs(a.y1 - b.y0) <= tol or abs(b.y1 - a.y0) <= tol
    return (same_y and touch_x) or (same_x and touch_y)


def build_rectangular_primal(
    domain_b: Rectangle,
    domain_d: Rectangle | None,
    nx: int,
    ny: int,
    cell_kind: CellKind = CellKind.QUAD,
) -> PrimalMesh:
    """Uniform nx × ny grid on each subdomain rectangle; Brinkman cells come first."""
    if nx < 1 or ny < 1:
        raise ConfigError(f"cell counts must be >= 1, got nx={nx}, ny={ny}", key="nx/ny")
    if domain_d is not None and not _shares_full_edge(domain_b, domain_d):
        raise ConfigError("subdomain rectangles must share exactly one full edge", key="domain")

    index: dict[tuple[float, float], int] = {}
    coords: list[tuple[float, float]] = []
    cells = _grid(domain_b, nx, ny, cell_kind, index, coords)
    n_brinkman = len(cells)
    if domain_d is not None:
        cells += _grid(domain_d, nx, ny, cell_kind, index, coords)
    subdomains = np.full(len(cells), int(Subdomain.DARCY), dtype=np.int64)
    subdomains[:n_brinkman] = int(Subdomain.BRINKMAN)

    draft = PrimalMesh(np.array(coords, dtype=float), tuple(cells), subdomains, {})
    tags: dict[EdgeKey, BoundaryTag] = {}
    for key, owners in draft.edge_cells().items():
        if len(owners) == 1:
            brinkman = subdomains[owners[0]] == Subdomain.BRINKMAN
            tags[key] = BoundaryTag.GAMMA_B if brinkman else BoundaryTag.GAMMA_D
        elif subdomains[owners[0]] != subdomains[owners[1]]:
            tags[key] = BoundaryTag.INTERFACE
    mesh = PrimalMesh(draft.vertices, draft.cells, subdomains, tags)
    validate_primal(mesh)
    logger.info(
        f"Built rectangular primal mesh: {mesh.n_cells} {cell_kind.value} cells, "
        f"{len(mesh.interface_edges())} interface edges"
    )
    return mesh


def ladder_primal(
    domain_b: Rectangle, domain_d: Rectangle | None, inverse_h: int,
    cell_kind: CellKind = CellKind.QUAD,
) -> PrimalMesh:
    """Grid with cells of size 1/inverse_h on both subdomains (same counts on each)."""
    nx = max(1, int(round(domain_b.width * inverse_h)))
    ny = max(1, int(round(domain_b.height * inverse_h)))
    return build_rectangular_primal(domain_b, domain_d, nx, ny, cell_kind)
