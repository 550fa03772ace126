"""Diagonal equilibration of the problem data.

Two diagonal scalings are composed (in either order): Ruiz iteration, which
drives every row and column inf-norm of D1^-1 A D2^-1 toward 1, and the
norm-balancing scaling of Pock & Chambolle with exponent alpha.  Column
scales are then uniformized over each non-orthant cone block (a geometric
mean), because only a single positive scalar per soc/rsoc/psd block maps the
cone onto itself.  Objective values are invariant under the scaling; points
map back through the stored diagonals.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .core import ConicProblem, NONNEG

CLAMP_LO = 1e-8
CLAMP_HI = 1e8


@dataclass
class ScalingInfo:
    D1: np.ndarray          # row scales (length m)
    D2: np.ndarray          # column scales (length n)
    ruiz_iters: int = 0
    applied: tuple = ()
    b_scale: float = 1.0
    c_scale: float = 1.0


def _abs_max(A) -> float:
    data = sp.csc_matrix(A).data
    return float(np.abs(data).max()) if data.size else 0.0


def _check_no_empty(A):
    row_nnz = A.getnnz(axis=1)
    col_nnz = A.getnnz(axis=0)
    if np.any(row_nnz == 0):
        raise ValueError(
            f"row {int(np.argmin(row_nnz))} of A is identically zero")
    if np.any(col_nnz == 0):
        raise ValueError(
            f"column {int(np.argmin(col_nnz))} of A is identically zero")


def _scaled_maxes(Aabs_csr, Aabs_csc, d1, d2):
    r = Aabs_csr.multiply(1.0 / d2[None, :]).max(axis=1)
    r = np.asarray(r.todense()).ravel() / d1
    c = Aabs_csc.multiply((1.0 / d1)[:, None]).max(axis=0)
    c = np.asarray(c.todense()).ravel() / d2
    return r, c


def ruiz_scale(A, iters=10):
    """Iterated inf-norm equilibration.  Returns (d1, d2) with the property
    that rows and columns of diag(1/d1) A diag(1/d2) have inf-norm near 1."""
    A = sp.csc_matrix(A)
    _check_no_empty(A)
    Aabs_csr = abs(A).tocsr()
    Aabs_csc = abs(A)
    m, n = A.shape
    d1 = np.ones(m)
    d2 = np.ones(n)
    for _ in range(iters):
        r, c = _scaled_maxes(Aabs_csr, Aabs_csc, d1, d2)
        d1 *= np.sqrt(r)
        d2 *= np.sqrt(c)
    return d1, d2


def pock_chambolle_scale(A, alpha=1.0):
    """Norm-balancing diagonal scaling with exponent alpha in [0, 2]:
    d1_i = (sum_j |a_ij|^(2-alpha))^(1/2), d2_j = (sum_i |a_ij|^alpha)^(1/2)."""
    if not 0.0 <= alpha <= 2.0:
        raise ValueError("alpha must lie in [0, 2]")
    A = sp.csc_matrix(A)
    _check_no_empty(A)
    Aabs = abs(A)
    rows = np.asarray(Aabs.power(2.0 - alpha).sum(axis=1)).ravel()
    cols = np.asarray(Aabs.power(alpha).sum(axis=0)).ravel()
    return np.sqrt(rows), np.sqrt(cols)


def uniformize_cone_blocks(d2, cones):
    """Replace column scales over each non-orthant block by their geometric
    mean, so the block scaling is a single positive scalar."""
    d2 = d2.copy()
    offset = 0
    for cone in cones:
        size = cone.veclen
        if cone.kind != NONNEG:
            block = d2[offset:offset + size]
            d2[offset:offset + size] = np.exp(np.mean(np.log(block)))
        offset += size
    return d2


def apply_scaling(problem: ConicProblem, info: ScalingInfo) -> ConicProblem:
    """Build the scaled problem  min (c~)'x~ : A~ x~ = b~, x~ in K."""
    offset = 0
    for cone in problem.cones:
        size = cone.veclen
        if cone.kind != NONNEG:
            block = info.D2[offset:offset + size]
            if block.max() - block.min() > 1e-12 * block.max():
                raise ValueError(
                    f"non-uniform column scaling on a {cone.kind} block "
                    f"starting at column {offset}")
        offset += size
    d1, d2 = info.D1, info.D2
    A = sp.diags(1.0 / d1) @ problem.A @ sp.diags(1.0 / d2)
    b = problem.b / d1 / info.b_scale
    c = problem.c / d2 / info.c_scale
    return ConicProblem(A.tocsc(), b, c, list(problem.cones),
                        name=problem.name)


def scale_problem(problem: ConicProblem, method="both", order="ruiz_first",
                  ruiz_iters=10, pc_alpha=1.0, normalize_rhs=True):
    """Compose the requested scalings and return (scaled_problem, info)."""
    if method not in ("ruiz", "pc", "both"):
        raise ValueError(f"unknown scaling method {method!r}")
    if order not in ("ruiz_first", "pc_first"):
        raise ValueError(f"unknown scaling order {order!r}")
    m, n = problem.m, problem.n
    d1 = np.ones(m)
    d2 = np.ones(n)
    applied = []
    steps = {"ruiz": ("ruiz",), "pc": ("pc",),
             "both": ("ruiz", "pc") if order == "ruiz_first" else ("pc", "ruiz")}
    A = problem.A
    for step in steps[method]:
        scaled = sp.diags(1.0 / d1) @ A @ sp.diags(1.0 / d2)
        if step == "ruiz":
            e1, e2 = ruiz_scale(scaled, iters=ruiz_iters)
        else:
            e1, e2 = pock_chambolle_scale(scaled, alpha=pc_alpha)
        d1 *= e1
        d2 *= e2
        applied.append(step)
    d2 = uniformize_cone_blocks(d2, problem.cones)
    # Restore an O(1) working scale.  Composed equilibrations leave every
    # entry of the scaled matrix well below 1 (each pass divides by norms
    # that the previous pass already drove to ~1), which shrinks the whole
    # constraint operator relative to the identity in the splitting and
    # slows its convergence badly.  A uniform factor split across both
    # diagonals brings the largest entry back to 1; it is invisible to the
    # per-row/per-column equilibration quality and to the unscale map.
    top = _abs_max(sp.diags(1.0 / d1) @ A @ sp.diags(1.0 / d2))
    if top > 0:
        root = np.sqrt(top)
        d1 *= root
        d2 *= root
    d1 = np.clip(d1, CLAMP_LO, CLAMP_HI)
    d2 = np.clip(d2, CLAMP_LO, CLAMP_HI)
    info = ScalingInfo(d1, d2, ruiz_iters=ruiz_iters, applied=tuple(applied))
    if normalize_rhs:
        sb = np.linalg.norm(problem.b / d1)
        sc = np.linalg.norm(problem.c / d2)
        info.b_scale = sb if sb > 0 else 1.0
        info.c_scale = sc if sc > 0 else 1.0
    return apply_scaling(problem, info), info


def unscale_solution(info: ScalingInfo, x, y, s):
    """Map a scaled-problem point back to original coordinates."""
    x = info.b_scale * x / info.D2
    y = info.c_scale * y / info.D1
    s = info.c_scale * s * info.D2
    return x, y, s
