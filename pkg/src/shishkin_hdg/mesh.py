"""Tensor-product Shishkin meshes on (0,1)^2: transition points, node
coordinates, cell/edge topology and layer-region classification."""

from __future__ import annotations

import io
import warnings
from dataclasses import dataclass, field
from enum import Enum

import numpy as np


class MeshAssumptionWarning(UserWarning):
    """epsilon > 1/N: the mesh is still valid but outside the regime the
    error bounds are stated for."""


class Region(Enum):
    SMOOTH = "smooth"
    X_LAYER = "x_layer"
    Y_LAYER = "y_layer"
    CORNER_LAYER = "corner_layer"


@dataclass(frozen=True)
class MeshConfig:
    """Inputs of the Shishkin mesh: N cells per direction (divisible by 4),
    perturbation parameter, mesh parameter sigma and convective lower bounds."""

    N: int
    epsilon: float
    sigma: float
    beta1: float
    beta2: float

    def __post_init__(self):
        if self.N < 4 or self.N % 4 != 0:
            raise ValueError(f"N must be >= 4 and divisible by 4, got {self.N}")
        for name in ("epsilon", "sigma", "beta1", "beta2"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


@dataclass
class ShishkinMesh:
    """Piecewise-uniform tensor mesh with cell and oriented-edge topology.

    Edges are globally oriented by ascending coordinate: vertical edges are
    parameterized by ascending y, horizontal edges by ascending x, so both
    adjacent cells index the same trace polynomial without sign flips.

    Edge ids enumerate all vertical edges first (line i = 0..nx, segment
    j = 0..ny-1, id = i*ny + j), then horizontal ones (line j = 0..ny,
    segment i = 0..nx-1, id = n_vertical + j*nx + i). Cells are flattened
    as c = ix*ny + iy with 0-based (ix, iy).
    """

    x_nodes: np.ndarray
    y_nodes: np.ndarray
    tau_x: float
    tau_y: float
    split_x: int  # cells with 0-based ix < split_x are left of the x transition
    split_y: int
    epsilon_warning: bool = False

    # derived topology, filled in __post_init__
    hx: np.ndarray = field(init=False)
    hy: np.ndarray = field(init=False)
    cell_edges: np.ndarray = field(init=False)       # (ncells, 4): W, E, S, N
    edge_axis: np.ndarray = field(init=False)        # 0 vertical, 1 horizontal
    edge_line: np.ndarray = field(init=False)
    edge_seg: np.ndarray = field(init=False)
    edge_cells: np.ndarray = field(init=False)       # (nedges, 2), -1 if none
    edge_boundary: np.ndarray = field(init=False)
    interior_index: np.ndarray = field(init=False)   # -1 for boundary edges

    def __post_init__(self):
        self.x_nodes = np.asarray(self.x_nodes, dtype=float)
        self.y_nodes = np.asarray(self.y_nodes, dtype=float)
        if np.any(np.diff(self.x_nodes) <= 0) or np.any(np.diff(self.y_nodes) <= 0):
            raise ValueError("node coordinates must be strictly increasing")
        self.hx = np.diff(self.x_nodes)
        self.hy = np.diff(self.y_nodes)
        nx, ny = self.nx, self.ny

        n_vert = (nx + 1) * ny
        n_horiz = nx * (ny + 1)
        nedges = n_vert + n_horiz
        axis = np.empty(nedges, dtype=np.int8)
        line = np.empty(nedges, dtype=np.int64)
        seg = np.empty(nedges, dtype=np.int64)
        cells = np.full((nedges, 2), -1, dtype=np.int64)

        i, j = np.meshgrid(np.arange(nx + 1), np.arange(ny), indexing="ij")
        vid = (i * ny + j).reshape(-1)
        axis[vid], line[vid], seg[vid] = 0, i.reshape(-1), j.reshape(-1)
        left = np.where(i > 0, (i - 1) * ny + j, -1).reshape(-1)
        right = np.where(i < nx, i * ny + j, -1).reshape(-1)
        cells[vid, 0], cells[vid, 1] = left, right

        j2, i2 = np.meshgrid(np.arange(ny + 1), np.arange(nx), indexing="ij")
        hid = (n_vert + j2 * nx + i2).reshape(-1)
        axis[hid], line[hid], seg[hid] = 1, j2.reshape(-1), i2.reshape(-1)
        below = np.where(j2 > 0, i2 * ny + (j2 - 1), -1).reshape(-1)
        above = np.where(j2 < ny, i2 * ny + j2, -1).reshape(-1)
        cells[hid, 0], cells[hid, 1] = below, above

        self.edge_axis, self.edge_line, self.edge_seg = axis, line, seg
        self.edge_cells = cells
        self.edge_boundary = (cells == -1).any(axis=1)
        self.interior_index = np.full(nedges, -1, dtype=np.int64)
        self.interior_index[~self.edge_boundary] = np.arange(
            (~self.edge_boundary).sum())

        ix, iy = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
        ix, iy = ix.reshape(-1), iy.reshape(-1)
        self.cell_edges = np.column_stack([
            ix * ny + iy,            # W: vertical line ix
            (ix + 1) * ny + iy,      # E
            n_vert + iy * nx + ix,   # S: horizontal line iy
            n_vert + (iy + 1) * nx + ix,  # N
        ])

    @property
    def nx(self) -> int:
        return len(self.x_nodes) - 1

    @property
    def ny(self) -> int:
        return len(self.y_nodes) - 1

    @property
    def N(self) -> int:
        if self.nx != self.ny:
            raise ValueError("mesh is not square")
        return self.nx

    @property
    def n_cells(self) -> int:
        return self.nx * self.ny

    @property
    def n_edges(self) -> int:
        return len(self.edge_axis)

    @property
    def n_interior_edges(self) -> int:
        return int((~self.edge_boundary).sum())

    def cell_region(self) -> np.ndarray:
        """Region of every cell as an integer array (Region order)."""
        ix = np.arange(self.nx)[:, None]
        iy = np.arange(self.ny)[None, :]
        in_x = ix >= self.split_x
        in_y = iy >= self.split_y
        code = in_x.astype(int) + 2 * in_y.astype(int)
        return np.broadcast_to(code, (self.nx, self.ny)).reshape(-1)


_REGION_BY_CODE = [Region.SMOOTH, Region.X_LAYER, Region.Y_LAYER,
                   Region.CORNER_LAYER]


def from_nodes(x_nodes, y_nodes) -> ShishkinMesh:
    """Tensor mesh from arbitrary node arrays (diagnostic/oracle meshes)."""
    x = np.asarray(x_nodes, dtype=float)
    y = np.asarray(y_nodes, dtype=float)
    return ShishkinMesh(x, y, tau_x=float(1 - x[len(x) // 2]),
                        tau_y=float(1 - y[len(y) // 2]),
                        split_x=(len(x) - 1) // 2, split_y=(len(y) - 1) // 2)


def build_mesh(cfg: MeshConfig) -> ShishkinMesh:
    """Build the Shishkin mesh: transition points tau = min(1/2, sigma*eps/beta * ln N),
    N/2 uniform cells on each side of the transition in each direction."""
    N = cfg.N
    logN = np.log(N)
    tau_x = min(0.5, cfg.sigma * cfg.epsilon / cfg.beta1 * logN)
    tau_y = min(0.5, cfg.sigma * cfg.epsilon / cfg.beta2 * logN)

    def nodes(tau):
        i = np.arange(N + 1, dtype=float)
        coarse = 2.0 * (1.0 - tau) / N * i[: N // 2 + 1]
        fine = (1.0 - tau) + 2.0 * tau / N * (i[N // 2 + 1:] - N // 2)
        out = np.concatenate([coarse, fine])
        out[0], out[-1] = 0.0, 1.0
        return out

    warn = cfg.epsilon > 1.0 / N
    if warn:
        warnings.warn(
            f"epsilon = {cfg.epsilon:g} exceeds 1/N = {1.0 / N:g}",
            MeshAssumptionWarning, stacklevel=2)
    return ShishkinMesh(nodes(tau_x), nodes(tau_y), tau_x, tau_y,
                        split_x=N // 2, split_y=N // 2, epsilon_warning=warn)


def classify_cell(mesh: ShishkinMesh, i: int, j: int) -> Region:
    """Region of cell (i, j), 1-based as in K_ij = I_i x J_j."""
    if not (1 <= i <= mesh.nx and 1 <= j <= mesh.ny):
        raise IndexError(f"cell index ({i}, {j}) out of range")
    code = int(i - 1 >= mesh.split_x) + 2 * int(j - 1 >= mesh.split_y)
    return _REGION_BY_CODE[code]


@dataclass(frozen=True)
class EdgeGeometry:
    endpoints: tuple
    axis: int  # 0: vertical edge (normal +-x), 1: horizontal (normal +-y)
    length: float
    cells: tuple
    boundary: bool


def edge_geometry(mesh: ShishkinMesh, edge_id: int) -> EdgeGeometry:
    """Endpoints (in ascending-parameter order), length and adjacency of an edge.

    A vertical edge has outward normal (1,0) for the cell on its left and
    (-1,0) for the cell on its right; horizontal edges likewise in y.
    """
    if not 0 <= edge_id < mesh.n_edges:
        raise IndexError(f"edge id {edge_id} out of range")
    axis = int(mesh.edge_axis[edge_id])
    line, seg = int(mesh.edge_line[edge_id]), int(mesh.edge_seg[edge_id])
    if axis == 0:
        x = mesh.x_nodes[line]
        p0, p1 = (x, mesh.y_nodes[seg]), (x, mesh.y_nodes[seg + 1])
        length = mesh.hy[seg]
    else:
        y = mesh.y_nodes[line]
        p0, p1 = (mesh.x_nodes[seg], y), (mesh.x_nodes[seg + 1], y)
        length = mesh.hx[seg]
    return EdgeGeometry((p0, p1), axis, float(length),
                        tuple(int(c) for c in mesh.edge_cells[edge_id]),
                        bool(mesh.edge_boundary[edge_id]))


def dump_mesh(mesh: ShishkinMesh) -> str:
    """Plain-text diagnostic dump: nodes (17 significant digits), cell
    extents and the edge table."""
    buf = io.StringIO()
    buf.write(f"# Shishkin mesh {mesh.nx} x {mesh.ny}\n")
    buf.write(f"tau_x {mesh.tau_x:.17g}\ntau_y {mesh.tau_y:.17g}\n")
    buf.write("x_nodes " + " ".join(f"{v:.17g}" for v in mesh.x_nodes) + "\n")
    buf.write("y_nodes " + " ".join(f"{v:.17g}" for v in mesh.y_nodes) + "\n")
    buf.write("# cells: id ix iy x0 x1 y0 y1 region\n")
    regions = mesh.cell_region()
    for ix in range(mesh.nx):
        for iy in range(mesh.ny):
            c = ix * mesh.ny + iy
            buf.write(
                f"cell {c} {ix} {iy} "
                f"{mesh.x_nodes[ix]:.17g} {mesh.x_nodes[ix + 1]:.17g} "
                f"{mesh.y_nodes[iy]:.17g} {mesh.y_nodes[iy + 1]:.17g} "
                f"{_REGION_BY_CODE[regions[c]].value}\n")
    buf.write("# edges: id axis line seg cell- cell+ boundary\n")
    for e in range(mesh.n_edges):
        buf.write(
            f"edge {e} {int(mesh.edge_axis[e])} {int(mesh.edge_line[e])} "
            f"{int(mesh.edge_seg[e])} {int(mesh.edge_cells[e, 0])} "
            f"{int(mesh.edge_cells[e, 1])} {int(mesh.edge_boundary[e])}\n")
    return buf.getvalue()
