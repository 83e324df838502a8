"""Reference-element machinery: Gauss-Legendre quadrature, orthonormal
Legendre bases, tensor-product tables on the reference square, affine maps."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

log = logging.getLogger(__name__)

MAX_GAUSS_POINTS = 30


@dataclass(frozen=True)
class QuadRule1D:
    """Gauss-Legendre rule on [-1, 1]; n points integrate degree <= 2n-1."""

    nodes: np.ndarray
    weights: np.ndarray

    @property
    def n(self) -> int:
        return len(self.nodes)


def gauss_rule(n: int) -> QuadRule1D:
    if not 1 <= n <= MAX_GAUSS_POINTS:
        raise ValueError(f"Gauss rule with {n} points outside supported range "
                         f"[1, {MAX_GAUSS_POINTS}]")
    nodes, weights = np.polynomial.legendre.leggauss(n)
    return QuadRule1D(nodes, weights)


class Basis1D:
    """Orthonormal Legendre basis on [-1, 1], degrees 0..k.

    Function m is sqrt((2m+1)/2) * L_m, so the Gram matrix under any exact
    quadrature is the identity.
    """

    def __init__(self, degree: int):
        if degree < 0:
            raise ValueError("basis degree must be >= 0")
        self.degree = degree

    def eval(self, points) -> tuple[np.ndarray, np.ndarray]:
        """Value and derivative tables of shape (k+1, len(points)).

        Points outside [-1, 1] are allowed (extrapolation) but logged.
        """
        x = np.atleast_1d(np.asarray(points, dtype=float))
        if x.size and (x.min() < -1.0 - 1e-12 or x.max() > 1.0 + 1e-12):
            log.debug("Basis1D evaluated outside [-1, 1] (extrapolation)")
        k = self.degree
        vals = np.empty((k + 1, x.size))
        ders = np.empty((k + 1, x.size))
        p_prev = np.ones_like(x)
        dp_prev = np.zeros_like(x)
        vals[0], ders[0] = p_prev, dp_prev
        if k >= 1:
            p_cur, dp_cur = x.copy(), np.ones_like(x)
            vals[1], ders[1] = p_cur, dp_cur
            for n in range(1, k):
                # (n+1) P_{n+1} = (2n+1) x P_n - n P_{n-1}
                p_next = ((2 * n + 1) * x * p_cur - n * p_prev) / (n + 1)
                dp_next = dp_prev + (2 * n + 1) * p_cur
                vals[n + 1], ders[n + 1] = p_next, dp_next
                p_prev, p_cur = p_cur, p_next
                dp_prev, dp_cur = dp_cur, dp_next
        scale = np.sqrt((2 * np.arange(k + 1) + 1) / 2.0)
        return vals * scale[:, None], ders * scale[:, None]


@dataclass(frozen=True)
class CellMap:
    """Affine map from the reference square [-1,1]^2 to a mesh cell."""

    x0: float
    x1: float
    y0: float
    y1: float

    def __post_init__(self):
        if self.x1 <= self.x0 or self.y1 <= self.y0:
            raise ValueError("degenerate cell extents")

    @property
    def hx(self) -> float:
        return self.x1 - self.x0

    @property
    def hy(self) -> float:
        return self.y1 - self.y0

    @property
    def jacobian(self) -> float:
        return self.hx * self.hy / 4.0

    def to_physical(self, xh, yh):
        x = self.x0 + self.hx * (np.asarray(xh) + 1.0) / 2.0
        y = self.y0 + self.hy * (np.asarray(yh) + 1.0) / 2.0
        return x, y

    @property
    def dx_scale(self) -> float:
        """d/dx = dx_scale * d/dxhat."""
        return 2.0 / self.hx

    @property
    def dy_scale(self) -> float:
        return 2.0 / self.hy


def map_to_cell(extents, ref_point):
    """Map a reference point to a cell given as (x0, x1, y0, y1).

    Returns ((x, y), jacobian).
    """
    cm = CellMap(*extents)
    x, y = cm.to_physical(ref_point[0], ref_point[1])
    return (float(x), float(y)), cm.jacobian


class RefTables:
    """Precomputed basis/quadrature tables for degree k with n points per
    direction.

    Tensor basis index a = m*(k+1) + n pairs phi_a(x,y) = p_m(x) p_n(y).
    Quadrature point index g = gx*n + gy.
    """

    def __init__(self, k: int, n: int):
        self.k, self.n = k, n
        kp = k + 1
        rule = gauss_rule(n)
        self.t, self.w = rule.nodes, rule.weights
        basis = Basis1D(k)
        V, D = basis.eval(self.t)
        self.V, self.D = V, D
        self.Ep = basis.eval([1.0])[0][:, 0]
        self.Em = basis.eval([-1.0])[0][:, 0]

        self.B0 = np.einsum("mx,ny->mnxy", V, V).reshape(kp * kp, n * n)
        self.BX = np.einsum("mx,ny->mnxy", D, V).reshape(kp * kp, n * n)
        self.BY = np.einsum("mx,ny->mnxy", V, D).reshape(kp * kp, n * n)
        self.W2 = np.outer(self.w, self.w).reshape(-1)

        # volume derivative couplings (reference): KX[b,a] = sum W dphi_b/dx phi_a
        self.KX = np.einsum("g,bg,ag->ba", self.W2, self.BX, self.B0)
        self.KY = np.einsum("g,bg,ag->ba", self.W2, self.BY, self.B0)
        # 1D mass (identity for exact rules; kept as a quadrature sum)
        self.M1 = (V * self.w) @ V.T
        # edge traces of the tensor basis paired with themselves / the edge basis
        self.EVp = np.kron(np.outer(self.Ep, self.Ep), self.M1)
        self.EVm = np.kron(np.outer(self.Em, self.Em), self.M1)
        self.EHp = np.kron(self.M1, np.outer(self.Ep, self.Ep))
        self.EHm = np.kron(self.M1, np.outer(self.Em, self.Em))
        eye = np.eye(kp)
        self.LVp = np.kron(self.Ep[:, None], eye)  # (nb, kp): cell trace x edge basis
        self.LVm = np.kron(self.Em[:, None], eye)
        self.LHp = np.kron(eye, self.Ep[:, None])
        self.LHm = np.kron(eye, self.Em[:, None])


@lru_cache(maxsize=64)
def ref_tables(k: int, n: int) -> RefTables:
    return RefTables(k, n)


class CellQuad:
    """Tensor-product quadrature geometry over all cells of a mesh.

    Cells are flattened as c = ix*ny + iy, points as g = gx*n + gy.
    """

    def __init__(self, mesh, n: int):
        rule = gauss_rule(n)
        self.n = n
        self.t, self.w = rule.nodes, rule.weights
        hx, hy = mesh.hx, mesh.hy
        xm = (mesh.x_nodes[:-1] + mesh.x_nodes[1:]) / 2.0
        ym = (mesh.y_nodes[:-1] + mesh.y_nodes[1:]) / 2.0
        self.xq = xm[:, None] + hx[:, None] / 2.0 * rule.nodes  # (nx, n)
        self.yq = ym[:, None] + hy[:, None] / 2.0 * rule.nodes  # (ny, n)
        nx, ny = mesh.nx, mesh.ny
        self.X = np.broadcast_to(self.xq[:, None, :, None],
                                 (nx, ny, n, n)).reshape(nx * ny, n * n)
        self.Y = np.broadcast_to(self.yq[None, :, None, :],
                                 (nx, ny, n, n)).reshape(nx * ny, n * n)
        self.W2 = np.outer(rule.weights, rule.weights).reshape(-1)
        Hx = np.repeat(hx, ny)
        Hy = np.tile(hy, nx)
        self.Hx, self.Hy = Hx, Hy
        self.J = Hx * Hy / 4.0
