"""Test projections and interpolants."""

import logging

import numpy as np
import pytest

from staggered_dg.exceptions import ConfigError
from staggered_dg.fem import (
    SpaceKind,
    build_space,
    interpolate_bdm,
    interpolate_ih,
    interpolate_jh,
    project_cellwise,
    project_edge,
    project_l2,
    transfer,
    triangle_rule,
)
from staggered_dg.fem.projection import (
    edge_projection_values,
    evaluate_cellwise,
    substitute_projection,
)
from staggered_dg.fem.quadrature import edge_rule, unit_interval
from staggered_dg.mesh import EdgeKind
from staggered_dg.mesh.primal import Subdomain
from staggered_dg.mesh.staggered import LOCAL_EDGES, REFERENCE_VERTICES


def _linear(x):
    return 2.0 - x[:, 0] + 3.0 * x[:, 1]


def _quadratic(x):
    return x[:, 0] * x[:, 1] - x[:, 1] ** 2 + 0.5


def test_project_l2_darcy_pressure(mesh_4):
    """Test the cellwise projection onto Q_h^D reproduces P^{k-1}."""
    space = build_space(SpaceKind.QD, mesh_4, 2)
    xi = triangle_rule(4).points

    values = space.evaluate(project_l2(_linear, space), xi)[..., 0]
    exact = _linear(mesh_4.to_physical(space.tris, xi).reshape(-1, 2)).reshape(values.shape)

    np.testing.assert_allclose(values, exact, atol=1e-10)


def test_project_l2_concentration(mesh_4):
    """Test the global mass-matrix projection onto U_h reproduces P^k."""
    space = build_space(SpaceKind.UH, mesh_4, 2)
    xi = triangle_rule(4).points

    values = space.evaluate(project_l2(_quadratic, space), xi)[..., 0]
    exact = _quadratic(mesh_4.to_physical(space.tris, xi).reshape(-1, 2)).reshape(values.shape)

    np.testing.assert_allclose(values, exact, atol=1e-9)


def test_project_edge_constant(coarse_mesh):
    """Test a constant projects to its leading Legendre moment only."""
    edges = coarse_mesh.edges_of(EdgeKind.PRIMAL_BOUNDARY)

    moments = project_edge(lambda x, n: np.full(len(x), 3.0), coarse_mesh, edges, 1)

    assert moments.shape == (len(edges), 2)
    np.testing.assert_allclose(moments[:, 0], 3.0)
    np.testing.assert_allclose(moments[:, 1], 0.0, atol=1e-12)
    np.testing.assert_allclose(edge_projection_values(moments, np.array([0.2, 0.7])), 3.0)


def test_project_edge_uses_normals(coarse_mesh):
    """Test edge data sees the stored normal of each edge."""
    edges = coarse_mesh.edges_of(EdgeKind.INTERFACE)

    moments = project_edge(lambda x, n: n[:, 0], coarse_mesh, edges, 2)

    np.testing.assert_allclose(moments[:, 0], 1.0)


@pytest.mark.parametrize("degree", [0, 1, 2])
def test_project_cellwise(coarse_mesh, degree):
    """Test cellwise projection is exact on polynomials of its degree."""
    tris = coarse_mesh.tris_in()
    xi = triangle_rule(4).points

    def field(x):
        return (1.0 + x[:, 0] - x[:, 1]) ** degree

    coefficients = project_cellwise(field, coarse_mesh, tris, degree)
    values = evaluate_cellwise(coefficients, degree, xi)
    exact = field(coarse_mesh.to_physical(tris, xi).reshape(-1, 2)).reshape(values.shape)

    np.testing.assert_allclose(values, exact, atol=1e-10)


def test_interpolants_check_space(coarse_mesh):
    """Test each interpolant accepts only its own spaces."""
    velocity = build_space(SpaceKind.HB, coarse_mesh, 1)
    pressure = build_space(SpaceKind.QB, coarse_mesh, 1)

    with pytest.raises(ConfigError, match="I_h"):
        interpolate_ih(_linear, velocity)
    with pytest.raises(ConfigError, match="J_h"):
        interpolate_jh(_linear, pressure)
    with pytest.raises(ConfigError):
        interpolate_bdm(_linear, velocity)


def test_interpolants_agree_with_space(coarse_mesh):
    """Test interpolants are the DOF functionals of their spaces."""
    space = build_space(SpaceKind.HD, coarse_mesh, 1)

    def field(x):
        return np.column_stack([x[:, 1], -x[:, 0]])

    np.testing.assert_allclose(interpolate_bdm(field, space), space.interpolate(field))


def test_substitute_projection_warns(coarse_mesh, caplog):
    """Test a non-representable source is projected with a warning."""
    space = build_space(SpaceKind.QD, coarse_mesh, 1)

    with caplog.at_level(logging.WARNING):
        substitute_projection(lambda x: np.exp(x[:, 0]), space, "f")
    assert "is not in QD" in caplog.text

    caplog.clear()
    with caplog.at_level(logging.WARNING):
        coefficients = substitute_projection(lambda x: np.full(len(x), 2.0), space, "f")
    assert caplog.text == ""
    np.testing.assert_allclose(space.evaluate(coefficients, np.array([[0.2, 0.3]])), 2.0)


ORACLE_EXACTNESS = 24


def _wavy(x):
    return np.sin(3.0 * x[:, 0]) * np.cos(2.0 * x[:, 1]) + x[:, 0] ** 2


def _swirl(x):
    return np.column_stack([np.sin(2.0 * x[:, 0] + x[:, 1]), np.cos(x[:, 0] - 3.0 * x[:, 1])])


def _swirl_divergence(x):
    return 2.0 * np.cos(2.0 * x[:, 0] + x[:, 1]) + 3.0 * np.sin(x[:, 0] - 3.0 * x[:, 1])


def _monomials(points, degree):
    """Monomials of total degree ≤ degree in the columns of points, shape (nq, dim)."""
    if points.ndim == 1:
        return np.column_stack([points**j for j in range(degree + 1)])
    return np.column_stack([points[:, 0] ** a * points[:, 1] ** (d - a)
                            for d in range(degree + 1) for a in range(d + 1)])


def _gram_projection(values, weights, basis):
    """Values at the quadrature points of the per-cell L² projection, by dense Gram solves.

    ``values`` is (ncell, nq, ncomp); reference weights suffice since each cell's
    Jacobian is constant.
    """
    gram = np.einsum("q,qi,qj->ij", weights, basis, basis)
    load = np.einsum("q,nqc,qi->nci", weights, values, basis)
    return np.einsum("qi,nci->nqc", basis, np.linalg.solve(gram, load[..., None])[..., 0])


def _edge_points(local):
    s, w = unit_interval(edge_rule(ORACLE_EXACTNESS))
    start, end = REFERENCE_VERTICES[LOCAL_EDGES[local]]
    return s, w, start + s[:, None] * (end - start)


def _assert_edge_moments(space, x, field, locals_, k):
    """P^k projections of the (normal) traces of the interpolant and of the field agree."""
    mesh = space.mesh
    for local in locals_:
        s, w, points = _edge_points(local)
        interpolant = space.evaluate(x, points)
        exact = field(mesh.to_physical(space.tris, points).reshape(-1, 2))
        exact = exact.reshape(interpolant.shape)
        if space.n_components == 2:
            normals = mesh.edge_normal[mesh.tri_edges[space.tris, local]]
            interpolant = np.einsum("nqc,nc->nq", interpolant, normals)[..., None]
            exact = np.einsum("nqc,nc->nq", exact, normals)[..., None]
        basis = _monomials(s, k)
        np.testing.assert_allclose(_gram_projection(interpolant, w, basis),
                                   _gram_projection(exact, w, basis), atol=1e-11)


def _assert_cell_moments(space, x, field, degree):
    """P^degree cell projections of the interpolant and of the field agree."""
    rule = triangle_rule(ORACLE_EXACTNESS)
    interpolant = space.evaluate(x, rule.points)
    exact = field(space.mesh.to_physical(space.tris, rule.points).reshape(-1, 2))
    basis = _monomials(rule.points, degree)
    np.testing.assert_allclose(_gram_projection(interpolant, rule.weights, basis),
                               _gram_projection(exact.reshape(interpolant.shape),
                                                rule.weights, basis), atol=1e-11)


@pytest.mark.parametrize("k", [1, 2, 3])
def test_ih_matches_gram_projections(mesh_4, k):
    """Test I_h keeps the P^k edge and P^{k-1} cell projections of a smooth field."""
    space = build_space(SpaceKind.QB, mesh_4, k)

    x = interpolate_ih(_wavy, space, ORACLE_EXACTNESS)

    _assert_edge_moments(space, x, lambda p: _wavy(p)[:, None], [0], k)
    _assert_cell_moments(space, x, lambda p: _wavy(p)[:, None], k - 1)


@pytest.mark.parametrize("k", [1, 2, 3])
def test_jh_matches_gram_projections(mesh_4, k):
    """Test J_h keeps the normal P^k dual-edge and P^{k-1} cell projections."""
    space = build_space(SpaceKind.HB, mesh_4, k)

    x = interpolate_jh(_swirl, space, ORACLE_EXACTNESS)

    _assert_edge_moments(space, x, _swirl, [1, 2], k)
    _assert_cell_moments(space, x, _swirl, k - 1)


@pytest.mark.parametrize("k", [1, 2, 3])
def test_bdm_matches_gram_projections(mesh_4, k):
    """Test Π^BDM keeps normal P^k edge projections and commutes with the divergence."""
    space = build_space(SpaceKind.HD, mesh_4, k)
    rule = triangle_rule(ORACLE_EXACTNESS)

    x = interpolate_bdm(_swirl, space, ORACLE_EXACTNESS)
    divergence = np.einsum("nql,nl->nq", space.divergences(rule.points), space.local_values(x))
    exact = _swirl_divergence(space.mesh.to_physical(space.tris, rule.points).reshape(-1, 2))
    basis = _monomials(rule.points, k - 1)

    _assert_edge_moments(space, x, _swirl, [0, 1, 2], k)
    if k >= 2:
        _assert_cell_moments(space, x, _swirl, k - 2)
    np.testing.assert_allclose(
        divergence[..., None],
        _gram_projection(exact.reshape(divergence.shape)[..., None], rule.weights, basis),
        atol=1e-10,
    )


@pytest.mark.parametrize("k", [1, 2])
def test_transfer_bdm_into_brinkman_velocity(mesh_4, k):
    """Test a BDM field on Ω_B moves into H_h^B unchanged."""
    bdm = build_space(SpaceKind.HD, mesh_4, k, subdomain=Subdomain.BRINKMAN)
    hb = build_space(SpaceKind.HB, mesh_4, k)
    xi = triangle_rule(6).points

    source = bdm.interpolate(_swirl, ORACLE_EXACTNESS)
    target = transfer(source, bdm, hb)

    np.testing.assert_allclose(hb.evaluate(target, xi), bdm.evaluate(source, xi), atol=1e-12)


def test_transfer_needs_same_cells(mesh_4):
    """Test a transfer between different subdomains is rejected."""
    bdm = build_space(SpaceKind.HD, mesh_4, 1)
    hb = build_space(SpaceKind.HB, mesh_4, 1)

    with pytest.raises(ConfigError) as excinfo:
        transfer(np.zeros(bdm.n_dofs), bdm, hb)

    assert excinfo.value.key == "space"
