"""Test finite element spaces: DOF counts, continuity and unisolvence."""

import numpy as np
import pytest

from staggered_dg.exceptions import ConfigError, UnisolvenceError
from staggered_dg.fem import SpaceKind, build_space, dim_p, triangle_rule
from staggered_dg.mesh import EdgeKind, Subdomain

S = np.linspace(0.05, 0.95, 5)
PRIMAL = (EdgeKind.PRIMAL_INTERIOR, EdgeKind.PRIMAL_BOUNDARY, EdgeKind.INTERFACE)


def _edges_of_tris(mesh, tris, local=None):
    edges = mesh.tri_edges[tris] if local is None else mesh.tri_edges[tris, local]
    return np.unique(edges)


def _expected_dofs(mesh, kind, k):
    tris_b = mesh.tris_in(Subdomain.BRINKMAN)
    tris_d = mesh.tris_in(Subdomain.DARCY)
    dual = mesh.edges_of(EdgeKind.DUAL)
    primal = np.concatenate([mesh.edges_of(kind) for kind in PRIMAL])
    dual_b = _edges_of_tris(mesh, tris_b, 1)
    dual_b = np.union1d(dual_b, _edges_of_tris(mesh, tris_b, 2))
    m, inner = k + 1, dim_p(k - 1)
    return {
        SpaceKind.QB: m * len(_edges_of_tris(mesh, tris_b, 0)) + inner * len(tris_b),
        SpaceKind.UH: m * len(primal) + inner * mesh.n_tris,
        SpaceKind.HB: m * len(dual_b) + 2 * inner * len(tris_b),
        SpaceKind.WH: m * len(dual) + 2 * inner * mesh.n_tris,
        SpaceKind.HD: m * len(_edges_of_tris(mesh, tris_d))
        + (inner - 1 + dim_p(k - 2)) * len(tris_d),
        SpaceKind.QD: inner * len(tris_d),
        SpaceKind.WB: 2 * m * len(mesh.edges_of(EdgeKind.PRIMAL_INTERIOR, Subdomain.BRINKMAN))
        + m * len(dual_b) + 4 * inner * len(tris_b),
    }[kind]


def _random(space, seed=0):
    return np.random.default_rng(seed).standard_normal(space.n_dofs)


def _normal_gap(space, x, edges):
    mesh = space.mesh
    normal = mesh.edge_normal[edges][:, None, :]
    left = np.sum(space.evaluate_trace(x, edges, 0, S) * normal, axis=-1)
    right = np.sum(space.evaluate_trace(x, edges, 1, S) * normal, axis=-1)
    return float(np.abs(left - right).max())


@pytest.mark.parametrize("k", [1, 2, 3])
@pytest.mark.parametrize("kind", list(SpaceKind))
def test_dof_counts(coarse_mesh, kind, k):
    """Test global DOF counts of every space."""
    space = build_space(kind, coarse_mesh, k)

    assert space.n_dofs == _expected_dofs(coarse_mesh, kind, k)
    assert space.n_local == space.reference.dim * space.n_components


@pytest.mark.parametrize("k", [1, 2, 3])
def test_scalar_continuity_across_primal_edges(coarse_mesh, k):
    """Test U_h is continuous across interior primal edges."""
    space = build_space(SpaceKind.UH, coarse_mesh, k)
    x = _random(space)
    edges = np.concatenate([coarse_mesh.edges_of(EdgeKind.PRIMAL_INTERIOR),
                            coarse_mesh.edges_of(EdgeKind.INTERFACE)])

    left = space.evaluate_trace(x, edges, 0, S)
    right = space.evaluate_trace(x, edges, 1, S)

    np.testing.assert_allclose(left, right, atol=1e-9)


@pytest.mark.parametrize("k", [1, 2])
def test_brinkman_pressure_continuity(mesh_4, k):
    """Test Q_h^B is continuous across Brinkman primal edges."""
    space = build_space(SpaceKind.QB, mesh_4, k)
    x = _random(space)
    edges = mesh_4.edges_of(EdgeKind.PRIMAL_INTERIOR, Subdomain.BRINKMAN)

    np.testing.assert_allclose(space.evaluate_trace(x, edges, 0, S),
                               space.evaluate_trace(x, edges, 1, S), atol=1e-9)


@pytest.mark.parametrize("k", [1, 2, 3])
def test_normal_continuity_across_dual_edges(coarse_mesh, k):
    """Test H_h^B and W_h have continuous normal components on dual edges."""
    for kind, subdomain in ((SpaceKind.HB, Subdomain.BRINKMAN), (SpaceKind.WH, None)):
        space = build_space(kind, coarse_mesh, k)
        edges = coarse_mesh.edges_of(EdgeKind.DUAL, subdomain)

        assert _normal_gap(space, _random(space), edges) < 1e-9


@pytest.mark.parametrize("k", [1, 2, 3])
def test_bdm_normal_continuity(mesh_4, k):
    """Test H_h^D has continuous normal components on every interior Darcy edge."""
    space = build_space(SpaceKind.HD, mesh_4, k)
    edges = np.concatenate([mesh_4.edges_of(EdgeKind.DUAL, Subdomain.DARCY),
                            mesh_4.edges_of(EdgeKind.PRIMAL_INTERIOR, Subdomain.DARCY)])

    assert _normal_gap(space, _random(space), edges) < 1e-9


@pytest.mark.parametrize("k", [1, 2])
def test_gradient_space_traction(coarse_mesh, k):
    """Test W_h^B has G n continuous inside Ω_B and zero on Γ_B and Γ."""
    space = build_space(SpaceKind.WB, coarse_mesh, k)
    x = _random(space)

    def traction(edges, side):
        values = space.evaluate_trace(x, edges, side, S).reshape(len(edges), len(S), 2, 2)
        return np.einsum("mqij,mj->mqi", values, coarse_mesh.edge_normal[edges])

    interior = coarse_mesh.edges_of(EdgeKind.PRIMAL_INTERIOR, Subdomain.BRINKMAN)
    np.testing.assert_allclose(traction(interior, 0), traction(interior, 1), atol=1e-9)
    closed = np.concatenate([coarse_mesh.edges_of(EdgeKind.PRIMAL_BOUNDARY, Subdomain.BRINKMAN),
                             coarse_mesh.edges_of(EdgeKind.INTERFACE)])
    np.testing.assert_allclose(traction(closed, 0), 0.0, atol=1e-9)


def test_gradient_space_free_boundary(coarse_mesh):
    """Test full-velocity mode frees the Γ_B traction moments."""
    fixed = build_space(SpaceKind.WB, coarse_mesh, 1)
    free = build_space(SpaceKind.WB, coarse_mesh, 1, free_brinkman_boundary=True)
    boundary = coarse_mesh.edges_of(EdgeKind.PRIMAL_BOUNDARY, Subdomain.BRINKMAN)

    assert free.n_dofs - fixed.n_dofs == 4 * len(boundary)


def _scalar_field(x):
    return 1.0 + x[:, 0] - 2.0 * x[:, 1] + x[:, 0] * x[:, 1] + x[:, 1] ** 2


def _vector_field(x):
    return np.column_stack([x[:, 0] ** 2 - x[:, 1], x[:, 0] * x[:, 1] + 1.0])


@pytest.mark.parametrize(
    "kind,field",
    [
        (SpaceKind.QB, _scalar_field),
        (SpaceKind.UH, _scalar_field),
        (SpaceKind.HB, _vector_field),
        (SpaceKind.WH, _vector_field),
        (SpaceKind.HD, _vector_field),
    ],
)
def test_interpolation_reproduces_quadratics(mesh_4, kind, field):
    """Test interpolation is exact for global quadratics at k = 2."""
    space = build_space(kind, mesh_4, 2)
    xi = triangle_rule(4).points

    values = space.evaluate(space.interpolate(field), xi)
    exact = field(mesh_4.to_physical(space.tris, xi).reshape(-1, 2))

    np.testing.assert_allclose(values.reshape(exact.shape[0], -1), exact.reshape(len(exact), -1),
                               atol=1e-10)


def test_unisolvence_failure(coarse_mesh):
    """Test an unreachable condition bound raises UnisolvenceError."""
    with pytest.raises(UnisolvenceError) as excinfo:
        build_space(SpaceKind.QB, coarse_mesh, 1, cond_max=0.5)

    assert excinfo.value.space == "QB"
    assert excinfo.value.subtriangle == 0


@pytest.mark.parametrize("k", [0, 4])
def test_unsupported_degree(coarse_mesh, k):
    """Test degrees outside 1..3 are rejected."""
    with pytest.raises(ConfigError):
        build_space(SpaceKind.UH, coarse_mesh, k)


def test_outside_space_rejected(coarse_mesh):
    """Test asking a Brinkman space about Darcy subtriangles fails."""
    space = build_space(SpaceKind.QB, coarse_mesh, 1)

    with pytest.raises(ConfigError):
        space.local(coarse_mesh.tris_in(Subdomain.DARCY))
