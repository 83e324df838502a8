"""Energy-norm and L2 error measurement, residual functionals of the
discrete bilinear form, and convergence-rate formulas.

All field evaluation goes through TripleValues: pointwise values of a triple
(r, w, mu) on the tensor quadrature grid of every cell and on the Gauss
points of every cell side (order W, E, S, N). The same machinery serves the
true error, the supercloseness error and the Galerkin-orthogonality residual.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import layerquad
from .mesh import Region, ShishkinMesh
from .problems import ProblemSpec
from .refelem import CellQuad, gauss_rule, ref_tables


class StabilizationError(ValueError):
    """The edge weight tau - beta.n/2 is negative at a sampled point, so the
    energy norm (and the method's stability) is not defined."""


def edge_normal_beta(mesh: ShishkinMesh, spec: ProblemSpec, n: int):
    """beta.n at n Gauss points of every cell side (W, E, S, N), signed with
    the cell's outward normal. Returns an (ncells, 4, n) array."""
    cq = CellQuad(mesh, n)
    nx, ny = mesh.nx, mesh.ny
    ix = np.repeat(np.arange(nx), ny)
    iy = np.tile(np.arange(ny), nx)
    yg = cq.yq[iy]
    xg = cq.xq[ix]
    bn = np.empty((mesh.n_cells, 4, n))
    bn[:, 0] = -spec.beta1(mesh.x_nodes[ix][:, None], yg)
    bn[:, 1] = spec.beta1(mesh.x_nodes[ix + 1][:, None], yg)
    bn[:, 2] = -spec.beta2(xg, mesh.y_nodes[iy][:, None])
    bn[:, 3] = spec.beta2(xg, mesh.y_nodes[iy + 1][:, None])
    return bn


def _side_coords(mesh: ShishkinMesh, n: int):
    """Physical coordinates of the n Gauss points on each cell side.

    Returns (xs, ys) of shape (ncells, 4, n), side order W, E, S, N.
    """
    cq = CellQuad(mesh, n)
    nx, ny = mesh.nx, mesh.ny
    nc = mesh.n_cells
    ix = np.repeat(np.arange(nx), ny)
    iy = np.tile(np.arange(ny), nx)
    xs = np.empty((nc, 4, n))
    ys = np.empty((nc, 4, n))
    xs[:, 0] = mesh.x_nodes[ix][:, None]
    xs[:, 1] = mesh.x_nodes[ix + 1][:, None]
    ys[:, 0] = ys[:, 1] = cq.yq[iy]
    xs[:, 2] = xs[:, 3] = cq.xq[ix]
    ys[:, 2] = mesh.y_nodes[iy][:, None]
    ys[:, 3] = mesh.y_nodes[iy + 1][:, None]
    return xs, ys


def _side_trace_tables(k: int, n: int):
    """Traces of the (k+1)^2 tensor basis functions on the four reference
    sides: list of (nbasis, n) arrays in side order W, E, S, N."""
    R = ref_tables(k, n)
    kp = k + 1
    nb = kp * kp
    tw = np.einsum("m,ng->mng", R.Em, R.V).reshape(nb, n)
    te = np.einsum("m,ng->mng", R.Ep, R.V).reshape(nb, n)
    ts = np.einsum("mg,n->mng", R.V, R.Em).reshape(nb, n)
    tn = np.einsum("mg,n->mng", R.V, R.Ep).reshape(nb, n)
    return [tw, te, ts, tn]


@dataclass
class TripleValues:
    """Pointwise values of a triple (r, w, mu) on the quadrature grid.

    r1, r2, w: (ncells, n*n) cell values. r1_tr, r2_tr, w_tr, mu:
    (ncells, 4, n) side values; mu is single-valued per edge but stored per
    adjacent cell side for locality.
    """

    n: int
    r1: np.ndarray
    r2: np.ndarray
    w: np.ndarray
    r1_tr: np.ndarray
    r2_tr: np.ndarray
    w_tr: np.ndarray
    mu: np.ndarray


def triple_values_discrete(mesh: ShishkinMesh, flds, n: int) -> TripleValues:
    """Evaluate a discrete triple given by SolutionFields-style coefficient
    arrays (physically orthonormal bases)."""
    k = flds.k
    kp = k + 1
    R = ref_tables(k, n)
    cq = CellQuad(mesh, n)
    sqj = np.sqrt(cq.J)

    def cell_vals(coef):
        return np.einsum("ca,ag->cg", coef, R.B0) / sqj[:, None]

    tabs = _side_trace_tables(k, n)

    def side_vals(coef):
        out = np.empty((mesh.n_cells, 4, n))
        for s in range(4):
            out[:, s] = np.einsum("ca,ag->cg", coef, tabs[s]) / sqj[:, None]
        return out

    # per-edge trace values, gathered onto cell sides
    L = np.empty(mesh.n_edges)
    vert = mesh.edge_axis == 0
    L[vert] = mesh.hy[mesh.edge_seg[vert]]
    L[~vert] = mesh.hx[mesh.edge_seg[~vert]]
    mu_edge = np.einsum("ea,ag->eg", flds.trace, R.V) / \
        np.sqrt(L / 2.0)[:, None]
    mu = mu_edge[mesh.cell_edges]  # (nc, 4, n)

    return TripleValues(n, cell_vals(flds.q1), cell_vals(flds.q2),
                        cell_vals(flds.u), side_vals(flds.q1),
                        side_vals(flds.q2), side_vals(flds.u), mu)


def triple_values_exact(mesh: ShishkinMesh, spec: ProblemSpec,
                        n: int) -> TripleValues:
    """Evaluate the exact triple (q, u, u|_edges) of a manufactured problem."""
    if spec.exact is None:
        raise ValueError("problem has no exact solution attached")
    ex = spec.exact
    cq = CellQuad(mesh, n)
    xs, ys = _side_coords(mesh, n)
    return TripleValues(n, ex.q1(cq.X, cq.Y), ex.q2(cq.X, cq.Y),
                        ex.u(cq.X, cq.Y), ex.q1(xs, ys), ex.q2(xs, ys),
                        ex.u(xs, ys), ex.u(xs, ys))


def triple_sub(a: TripleValues, b: TripleValues) -> TripleValues:
    if a.n != b.n:
        raise ValueError("quadrature mismatch between triples")
    return TripleValues(a.n, a.r1 - b.r1, a.r2 - b.r2, a.w - b.w,
                        a.r1_tr - b.r1_tr, a.r2_tr - b.r2_tr,
                        a.w_tr - b.w_tr, a.mu - b.mu)


@dataclass
class EnergyNormResult:
    total: float
    q_part_sq: float         # eps^-1 ||r||^2
    reaction_part_sq: float  # ||(c - div beta / 2)^{1/2} w||^2
    jump_part_sq: float      # ||(tau - beta.n/2)^{1/2} (w - mu)||^2 on cell sides
    region_cell_sq: dict     # cell contributions (q + reaction) per Region name


def _side_scales(mesh: ShishkinMesh):
    """Half side-lengths per cell and side, (ncells, 4)."""
    hx = np.repeat(mesh.hx, mesh.ny)
    hy = np.tile(mesh.hy, mesh.nx)
    return np.stack([hy, hy, hx, hx], axis=1) / 2.0


def energy_norm(mesh: ShishkinMesh, spec: ProblemSpec, tau: float,
                vals: TripleValues) -> EnergyNormResult:
    """Energy norm of a triple:

    |||(r, w, mu)|||^2 = eps^-1 ||r||^2 + ||(c - div beta / 2)^{1/2} w||^2
                         + sum_cells sum_sides (tau - beta.n/2) (w - mu)^2.

    Every cell side contributes, so interior edges are visited from both
    sides (with that cell's outward normal) and boundary sides once.
    """
    n = vals.n
    cq = CellQuad(mesh, n)
    w1 = gauss_rule(n).weights
    cw = spec.c(cq.X, cq.Y) - 0.5 * spec.div_beta(cq.X, cq.Y)

    cell_q = (cq.J / spec.epsilon) * \
        np.einsum("g,cg->c", cq.W2, vals.r1**2 + vals.r2**2)
    cell_r = cq.J * np.einsum("cg,cg->c", cq.W2 * cw, vals.w**2)

    bn = edge_normal_beta(mesh, spec, n)
    weight = tau - 0.5 * bn
    if np.min(weight) < 0:
        raise StabilizationError(
            f"tau = {tau:g} gives a negative edge weight tau - beta.n/2 "
            f"(min {np.min(weight):.3e}); energy norm undefined")
    jump = (vals.w_tr - vals.mu) ** 2
    side = _side_scales(mesh)[:, :, None] * weight * jump * w1
    jump_sq = float(side.sum())

    codes = mesh.cell_region()
    region = {}
    for code, reg in enumerate([Region.SMOOTH, Region.X_LAYER,
                                Region.Y_LAYER, Region.CORNER_LAYER]):
        sel = codes == code
        region[reg.value] = float(cell_q[sel].sum() + cell_r[sel].sum())
    q_sq = float(cell_q.sum())
    r_sq = float(cell_r.sum())
    return EnergyNormResult(float(np.sqrt(q_sq + r_sq + jump_sq)),
                            q_sq, r_sq, jump_sq, region)


def l2_norms(mesh: ShishkinMesh, vals: TripleValues) -> tuple[float, float]:
    """(||w||, ||r||) of a triple over the cells."""
    cq = CellQuad(mesh, vals.n)
    wsq = cq.J @ np.einsum("g,cg->c", cq.W2, vals.w**2)
    qsq = cq.J @ np.einsum("g,cg->c", cq.W2, vals.r1**2 + vals.r2**2)
    return float(np.sqrt(wsq)), float(np.sqrt(qsq))


def bilinear_residual(mesh: ShishkinMesh, spec: ProblemSpec, cfg,
                      vals: TripleValues, n: int,
                      parts=("r", "w", "mu")) -> float:
    """max |B(vals; test)| over all normalized discrete test functions.

    Tests are the physically orthonormal basis functions of the three spaces;
    "r" and "w" rows run over every cell, "mu" rows over interior edges.
    """
    k, tau = cfg.k, cfg.tau
    kp = k + 1
    R = ref_tables(k, n)
    cq = CellQuad(mesh, n)
    w1 = gauss_rule(n).weights
    sqj = np.sqrt(cq.J)
    halfx = cq.Hx / 2.0
    halfy = cq.Hy / 2.0
    sscale = _side_scales(mesh)
    tabs = _side_trace_tables(k, n)
    bn = edge_normal_beta(mesh, spec, n)

    # numerical flux r.n + beta.n mu + tau (w - mu) on every cell side
    rn = np.empty_like(vals.mu)
    rn[:, 0] = -vals.r1_tr[:, 0]
    rn[:, 1] = vals.r1_tr[:, 1]
    rn[:, 2] = -vals.r2_tr[:, 2]
    rn[:, 3] = vals.r2_tr[:, 3]
    flux = rn + bn * vals.mu + tau * (vals.w_tr - vals.mu)

    worst = 0.0
    if "r" in parts:
        res1 = (sqj / spec.epsilon)[:, None] * \
            np.einsum("cg,bg->cb", vals.r1 * cq.W2, R.B0)
        res1 -= (halfy / sqj)[:, None] * \
            np.einsum("cg,bg->cb", vals.w * cq.W2, R.BX)
        res1 -= (halfy / sqj)[:, None] * \
            np.einsum("cg,bg->cb", vals.mu[:, 0] * w1, tabs[0])
        res1 += (halfy / sqj)[:, None] * \
            np.einsum("cg,bg->cb", vals.mu[:, 1] * w1, tabs[1])
        res2 = (sqj / spec.epsilon)[:, None] * \
            np.einsum("cg,bg->cb", vals.r2 * cq.W2, R.B0)
        res2 -= (halfx / sqj)[:, None] * \
            np.einsum("cg,bg->cb", vals.w * cq.W2, R.BY)
        res2 -= (halfx / sqj)[:, None] * \
            np.einsum("cg,bg->cb", vals.mu[:, 2] * w1, tabs[2])
        res2 += (halfx / sqj)[:, None] * \
            np.einsum("cg,bg->cb", vals.mu[:, 3] * w1, tabs[3])
        worst = max(worst, float(np.abs(res1).max()),
                    float(np.abs(res2).max()))

    if "w" in parts:
        b1 = spec.beta1(cq.X, cq.Y)
        b2 = spec.beta2(cq.X, cq.Y)
        cr = spec.c(cq.X, cq.Y) - spec.div_beta(cq.X, cq.Y)
        resw = -(halfy / sqj)[:, None] * np.einsum(
            "cg,bg->cb", (vals.r1 + b1 * vals.w) * cq.W2, R.BX)
        resw -= (halfx / sqj)[:, None] * np.einsum(
            "cg,bg->cb", (vals.r2 + b2 * vals.w) * cq.W2, R.BY)
        resw += sqj[:, None] * np.einsum("cg,bg->cb", cr * vals.w * cq.W2,
                                         R.B0)
        for s in range(4):
            resw += (sscale[:, s] / sqj)[:, None] * \
                np.einsum("cg,bg->cb", flux[:, s] * w1, tabs[s])
        worst = max(worst, float(np.abs(resw).max()))

    if "mu" in parts:
        resm = np.zeros((mesh.n_edges, kp))
        contrib = np.sqrt(sscale)[:, :, None] * \
            np.einsum("csg,eg->cse", flux * w1, R.V)
        for s in range(4):
            np.add.at(resm, mesh.cell_edges[:, s], contrib[:, s])
        interior = resm[~mesh.edge_boundary]
        if interior.size:
            worst = max(worst, float(np.abs(interior).max()))
    return worst


def load_vector_scale(mesh: ShishkinMesh, spec: ProblemSpec, n: int,
                      k: Optional[int] = None) -> float:
    """max |(f, w)| over normalized cell test functions (residual scaling)."""
    kk = k if k is not None else 2
    R = ref_tables(kk, n)
    cq = CellQuad(mesh, n)
    fv = spec.f(cq.X, cq.Y)
    F = np.sqrt(cq.J)[:, None] * np.einsum("cg,bg->cb", fv * cq.W2, R.B0)
    return float(np.abs(F).max())


def refined_error_corrections(mesh: ShishkinMesh, spec: ProblemSpec, fields,
                              n: int):
    """Cell-integral corrections from layer-refined quadrature, as
    (composite - plain) differences so they add onto plain-rule totals.

    Returns (d_flux_sq, d_react_sq, d_l2u_sq, d_region) where d_flux_sq is
    the unweighted ||q - q_h||^2 correction and d_region maps region names
    to the correction of the cell part of the squared energy norm.
    """
    ex = spec.exact
    k = fields.k
    codes = mesh.cell_region()
    names = [Region.SMOOTH.value, Region.X_LAYER.value,
             Region.Y_LAYER.value, Region.CORNER_LAYER.value]
    d_flux = d_react = d_l2u = 0.0
    d_region = dict.fromkeys(names, 0.0)
    for c, cix, ciy, rx, ry in layerquad.refined_cells(mesh, spec):
        J = mesh.hx[cix] * mesh.hy[ciy] / 4.0
        dq = dr = du = 0.0
        for refined, sign in ((True, 1.0), (False, -1.0)):
            rule = layerquad.cell_rule(mesh, spec, cix, ciy, n,
                                       rx and refined, ry and refined)
            B = rule.basis(k) / np.sqrt(J)
            q1t = ex.q1(rule.X, rule.Y) - fields.q1[c] @ B
            q2t = ex.q2(rule.X, rule.Y) - fields.q2[c] @ B
            ut = ex.u(rule.X, rule.Y) - fields.u[c] @ B
            cw = spec.c(rule.X, rule.Y) - 0.5 * spec.div_beta(rule.X, rule.Y)
            dq += sign * float(rule.W @ (q1t**2 + q2t**2))
            dr += sign * float(rule.W @ (cw * ut**2))
            du += sign * float(rule.W @ ut**2)
        d_flux += dq
        d_react += dr
        d_l2u += du
        d_region[names[codes[c]]] += dq / spec.epsilon + dr
    return d_flux, d_react, d_l2u, d_region


@dataclass
class ErrorReport:
    """Error measurements of one solve."""

    N: int
    k: int
    epsilon: float
    energy_error: float
    l2_error_u: float
    l2_error_q: float
    q_part_sq: float
    reaction_part_sq: float
    jump_part_sq: float
    region_cell_sq: dict
    supercloseness_error: Optional[float] = None


def error_report(mesh: ShishkinMesh, spec: ProblemSpec, cfg, fields,
                 projected=None) -> ErrorReport:
    """Energy-norm and L2 errors of a solution; if a projected-exact triple
    is supplied, also the supercloseness distance |||Pi(exact) - discrete|||."""
    n = cfg.n_error
    diff = triple_sub(triple_values_exact(mesh, spec, n),
                      triple_values_discrete(mesh, fields, n))
    en = energy_norm(mesh, spec, cfg.tau, diff)
    l2u, l2q = l2_norms(mesh, diff)
    d_flux, d_react, d_l2u, d_region = refined_error_corrections(
        mesh, spec, fields, n)
    q_sq = en.q_part_sq + d_flux / spec.epsilon
    react_sq = en.reaction_part_sq + d_react
    region = {key: val + d_region[key]
              for key, val in en.region_cell_sq.items()}
    total = float(np.sqrt(q_sq + react_sq + en.jump_part_sq))
    l2u = float(np.sqrt(l2u**2 + d_l2u))
    l2q = float(np.sqrt(l2q**2 + d_flux))
    sc = None
    if projected is not None:
        sc = supercloseness_norm(mesh, spec, cfg, fields, projected)
    return ErrorReport(mesh.N, cfg.k, spec.epsilon, total, l2u, l2q,
                       q_sq, react_sq, en.jump_part_sq, region, sc)


def supercloseness_norm(mesh: ShishkinMesh, spec: ProblemSpec, cfg, fields,
                        projected) -> float:
    """|||(Pi q - q_h, Pi u - u_h, P u - u_hat)|||: energy distance between
    the discrete solution and the L2 projection of the exact one."""
    from .assembly import SolutionFields
    diff = SolutionFields(fields.k, projected.q1 - fields.q1,
                          projected.q2 - fields.q2, projected.u - fields.u,
                          projected.trace - fields.trace)
    vals = triple_values_discrete(mesh, diff, cfg.n_error)
    return energy_norm(mesh, spec, cfg.tau, vals).total


def convergence_rate(e_coarse: float, e_fine: float, n_coarse: int) -> float:
    """Exponent p fitted to the two-level model e ~ (N^-1 ln N)^p, anchored
    at the fine pair (2N, 4N) of mesh sizes."""
    if e_coarse <= 0 or e_fine <= 0:
        raise ValueError("rates need positive errors")
    n2 = 2 * n_coarse
    return float(np.log(e_coarse / e_fine)
                 / np.log(2.0 * np.log(n2) / np.log(2 * n2)))


def dyadic_rate(e_coarse: float, e_fine: float) -> float:
    """Plain log2 ratio of two errors under mesh doubling."""
    if e_coarse <= 0 or e_fine <= 0:
        raise ValueError("rates need positive errors")
    return float(np.log2(e_coarse / e_fine))
