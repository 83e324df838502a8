"""Shishkin mesh construction, topology and classification."""

import numpy as np
import pytest

from shishkin_hdg.mesh import (MeshAssumptionWarning, MeshConfig, Region,
                               build_mesh, classify_cell, dump_mesh,
                               edge_geometry, from_nodes)


def test_config_validation():
    with pytest.raises(ValueError):
        MeshConfig(6, 1e-3, 2.0, 1.0, 2.0)   # not divisible by 4
    with pytest.raises(ValueError):
        MeshConfig(2, 1e-3, 2.0, 1.0, 2.0)
    with pytest.raises(ValueError):
        MeshConfig(8, -1e-3, 2.0, 1.0, 2.0)


def test_transition_points():
    N, eps, sigma = 16, 1e-4, 2.0
    mesh = build_mesh(MeshConfig(N, eps, sigma, 1.0, 2.0))
    assert np.isclose(mesh.tau_x, sigma * eps * np.log(N))
    assert np.isclose(mesh.tau_y, sigma * eps / 2.0 * np.log(N))
    # transition node sits at index N/2
    assert np.isclose(mesh.x_nodes[N // 2], 1.0 - mesh.tau_x)
    assert np.isclose(mesh.y_nodes[N // 2], 1.0 - mesh.tau_y)


def test_transition_caps_at_half():
    mesh = build_mesh(MeshConfig(4, 0.9, 2.0, 1.0, 2.0))
    assert mesh.tau_x == 0.5 and mesh.tau_y == 0.5


def test_epsilon_regime_warning():
    with pytest.warns(MeshAssumptionWarning):
        build_mesh(MeshConfig(4, 0.9, 2.0, 1.0, 2.0))


def test_piecewise_uniform_spacing():
    N = 8
    mesh = build_mesh(MeshConfig(N, 1e-3, 2.0, 1.0, 2.0))
    hc = mesh.hx[: N // 2]
    hf = mesh.hx[N // 2:]
    assert np.allclose(hc, 2.0 * (1.0 - mesh.tau_x) / N)
    assert np.allclose(hf, 2.0 * mesh.tau_x / N)
    assert np.isclose(mesh.hx.sum(), 1.0, atol=1e-14)
    assert mesh.x_nodes[0] == 0.0 and mesh.x_nodes[-1] == 1.0


def test_edge_counts_and_topology():
    N = 4
    mesh = build_mesh(MeshConfig(N, 1e-3, 2.0, 1.0, 2.0))
    assert mesh.n_cells == N * N
    assert mesh.n_edges == 2 * N * (N + 1)
    assert mesh.n_interior_edges == 2 * N * (N - 1)
    # every interior edge has two adjacent cells, boundary edges one
    two = (mesh.edge_cells >= 0).sum(axis=1)
    assert np.all(two[~mesh.edge_boundary] == 2)
    assert np.all(two[mesh.edge_boundary] == 1)
    # cell_edges is consistent with edge_cells adjacency
    for c in range(mesh.n_cells):
        for e in mesh.cell_edges[c]:
            assert c in mesh.edge_cells[e]


def test_shared_edges_between_neighbors():
    mesh = build_mesh(MeshConfig(4, 1e-3, 2.0, 1.0, 2.0))
    ny = mesh.ny
    # E edge of cell (0,0) is the W edge of cell (1,0)
    assert mesh.cell_edges[0, 1] == mesh.cell_edges[ny, 0]
    # N edge of cell (0,0) is the S edge of cell (0,1)
    assert mesh.cell_edges[0, 3] == mesh.cell_edges[1, 2]


def test_edge_geometry():
    mesh = build_mesh(MeshConfig(4, 1e-3, 2.0, 1.0, 2.0))
    geo = edge_geometry(mesh, 0)  # vertical edge on x=0, first segment
    assert geo.axis == 0 and geo.boundary
    (p0, p1) = geo.endpoints
    assert p0 == (0.0, mesh.y_nodes[0]) and p1 == (0.0, mesh.y_nodes[1])
    assert np.isclose(geo.length, mesh.hy[0])
    with pytest.raises(IndexError):
        edge_geometry(mesh, mesh.n_edges)
    # total edge length = perimeter contributions of all cells / shared edges
    total = sum(edge_geometry(mesh, e).length for e in range(mesh.n_edges))
    expect = (mesh.nx + 1) * 1.0 + (mesh.ny + 1) * 1.0
    assert np.isclose(total, expect, atol=1e-12)


def test_region_classification():
    mesh = build_mesh(MeshConfig(4, 1e-3, 2.0, 1.0, 2.0))
    assert classify_cell(mesh, 1, 1) is Region.SMOOTH
    assert classify_cell(mesh, 4, 1) is Region.X_LAYER
    assert classify_cell(mesh, 1, 4) is Region.Y_LAYER
    assert classify_cell(mesh, 4, 4) is Region.CORNER_LAYER
    with pytest.raises(IndexError):
        classify_cell(mesh, 0, 1)
    codes = mesh.cell_region()
    assert (codes == 0).sum() == 4  # 2x2 smooth block for N=4
    assert (codes == 3).sum() == 4


def test_from_nodes_roundtrip():
    x = [0.0, 0.3, 0.6, 0.8, 1.0]
    mesh = from_nodes(x, x)
    assert mesh.nx == 4 and mesh.ny == 4
    with pytest.raises(ValueError):
        from_nodes([0.0, 0.5, 0.5, 1.0], x)


def test_dump_mesh_contents():
    mesh = build_mesh(MeshConfig(4, 1e-3, 2.0, 1.0, 2.0))
    text = dump_mesh(mesh)
    assert "tau_x" in text and "x_nodes" in text
    assert text.count("\ncell ") == mesh.n_cells
    assert text.count("\nedge ") == mesh.n_edges
