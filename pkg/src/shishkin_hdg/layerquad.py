"""Layer-aware composite quadrature.

On a Shishkin mesh the boundary-layer exponentials still reach magnitude
N^-sigma at the transition point, but inside the last coarse cell of each
direction they vary on the sub-cell scale epsilon/beta. A plain Gauss rule
cannot see that spike, which matters for the load vector (f carries an
epsilon^-1 tail there) and for the eps^-1-weighted flux error integrals.
These helpers refine the affected cells with geometric panels toward the
layer side; all other cells keep the plain tensor rule.
"""

from __future__ import annotations

import numpy as np

from .mesh import ShishkinMesh
from .problems import ProblemSpec
from .refelem import Basis1D, gauss_rule

# a tail below exp(-REACH) ~ 3e-20 is invisible at double precision
REACH = 45.0
# directions are refined only when the cell is this many decay lengths wide
MIN_RATIO = 8.0


def composite_layer_rule(width: float, scale: float, n: int):
    """Composite n-point Gauss rule on [0, width], geometrically refined
    toward the right end with the smallest panel about one decay length.

    Returns (points, weights) with sum(weights) = width.
    """
    if width <= 0 or scale <= 0:
        raise ValueError("width and scale must be positive")
    edges = [0.0]
    d = min(scale, width)
    while d < width:
        edges.append(d)
        d *= 2.0
    edges = width - np.array(edges)[::-1]
    edges[0] = 0.0
    rule = gauss_rule(n)
    pts, wts = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        half = (b - a) / 2.0
        pts.append((a + b) / 2.0 + half * rule.nodes)
        wts.append(half * rule.weights)
    return np.concatenate(pts), np.concatenate(wts)


def layer_flags(mesh: ShishkinMesh, spec: ProblemSpec):
    """Which mesh columns and rows need layer-refined integration.

    A column is flagged when its cells are much wider than the x decay
    length and the tail at its right edge is not yet below double-precision
    underflow; rows likewise in y.
    """
    sx = spec.epsilon / spec.beta_lb[0]
    sy = spec.epsilon / spec.beta_lb[1]
    fx = (mesh.hx > MIN_RATIO * sx) & \
        ((1.0 - mesh.x_nodes[1:]) < REACH * sx)
    fy = (mesh.hy > MIN_RATIO * sy) & \
        ((1.0 - mesh.y_nodes[1:]) < REACH * sy)
    return fx, fy


def refined_cells(mesh: ShishkinMesh, spec: ProblemSpec):
    """Flattened indices of cells needing refined integration, with their
    (ix, iy) and per-direction flags."""
    fx, fy = layer_flags(mesh, spec)
    out = []
    for ix in range(mesh.nx):
        for iy in range(mesh.ny):
            if fx[ix] or fy[iy]:
                out.append((ix * mesh.ny + iy, ix, iy, bool(fx[ix]),
                            bool(fy[iy])))
    return out


class CellRule:
    """Tensor quadrature on one cell, possibly layer-refined per direction.

    Provides flattened physical points (X, Y), physical weights W (summing
    to the cell area) and the reference coordinates (tx, ty) of the 1D point
    sets for basis evaluation.
    """

    def __init__(self, x0, x1, y0, y1, n, refine_x, refine_y, sx, sy):
        if refine_x:
            px, wx = composite_layer_rule(x1 - x0, sx, n)
            px += x0
        else:
            rule = gauss_rule(n)
            px = (x0 + x1) / 2.0 + (x1 - x0) / 2.0 * rule.nodes
            wx = (x1 - x0) / 2.0 * rule.weights
        if refine_y:
            py, wy = composite_layer_rule(y1 - y0, sy, n)
            py += y0
        else:
            rule = gauss_rule(n)
            py = (y0 + y1) / 2.0 + (y1 - y0) / 2.0 * rule.nodes
            wy = (y1 - y0) / 2.0 * rule.weights
        self.px, self.wx = px, wx
        self.py, self.wy = py, wy
        self.tx = 2.0 * (px - x0) / (x1 - x0) - 1.0
        self.ty = 2.0 * (py - y0) / (y1 - y0) - 1.0
        self.X = np.repeat(px, len(py))
        self.Y = np.tile(py, len(px))
        self.W = np.outer(wx, wy).reshape(-1)

    def basis(self, k: int):
        """Tensor basis values at the rule's points, (k+1)^2 x npoints, in
        the pulled-back (reference-orthonormal) convention."""
        vx = Basis1D(k).eval(self.tx)[0]
        vy = Basis1D(k).eval(self.ty)[0]
        kp = k + 1
        return np.einsum("mp,nq->mnpq", vx, vy).reshape(
            kp * kp, len(self.tx) * len(self.ty))


def cell_rule(mesh: ShishkinMesh, spec: ProblemSpec, ix: int, iy: int,
              n: int, refine_x: bool, refine_y: bool) -> CellRule:
    sx = spec.epsilon / spec.beta_lb[0]
    sy = spec.epsilon / spec.beta_lb[1]
    return CellRule(mesh.x_nodes[ix], mesh.x_nodes[ix + 1],
                    mesh.y_nodes[iy], mesh.y_nodes[iy + 1],
                    n, refine_x, refine_y, sx, sy)
