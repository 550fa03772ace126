"""Problem data model: cones, conic LPs in standard form, residuals, statuses.

A problem is   min c'x  s.t.  Ax = b,  x in K,   with K a product of
nonnegative-orthant, second-order, rotated second-order, and (vectorized)
positive-semidefinite blocks.  All four cones are self-dual, so the dual
cone never needs separate storage.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

# Cone kinds.  "psd" blocks are stored in packed symmetric (svec) form:
# lower triangle in column order, off-diagonal entries scaled by sqrt(2).
NONNEG = "nonneg"
SOC = "soc"
RSOC = "rsoc"
PSD = "psd"

_KINDS = (NONNEG, SOC, RSOC, PSD)


@dataclass(frozen=True)
class Cone:
    """One cone block.

    ``size`` is the block length for nonneg/soc/rsoc and the matrix order
    for psd (whose vectorized length is order*(order+1)/2).
    """

    kind: str
    size: int

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown cone kind {self.kind!r}")
        if self.size < 1:
            raise ValueError("cone size must be >= 1")
        if self.kind == SOC and self.size < 2:
            raise ValueError("soc block needs size >= 2")
        if self.kind == RSOC and self.size < 3:
            raise ValueError("rsoc block needs size >= 3")

    @property
    def veclen(self) -> int:
        """Number of scalar variables this block occupies."""
        if self.kind == PSD:
            return self.size * (self.size + 1) // 2
        return self.size

    @property
    def barrier_degree(self) -> int:
        """Degree of the canonical log barrier for this block."""
        if self.kind == NONNEG:
            return self.size
        if self.kind == PSD:
            return self.size
        return 1  # soc / rsoc: -log of one quadratic


class Status(enum.Enum):
    OPTIMAL = "optimal"
    PRIMAL_INFEASIBLE = "primal_infeasible"
    DUAL_INFEASIBLE = "dual_infeasible"
    ITERATION_LIMIT = "iteration_limit"
    TIME_LIMIT = "time_limit"
    NUMERICAL_FAILURE = "numerical_failure"


class TwoNorm:
    """Residual scaling used for pure-LP problems (2-norms)."""
    name = "two"


class InfNorm:
    """Residual scaling used for general conic problems (inf-norms)."""
    name = "inf"


def _as_norm_mode(mode):
    if mode in ("two", TwoNorm):
        return "two"
    if mode in ("inf", InfNorm):
        return "inf"
    raise ValueError(f"unknown norm mode {mode!r}")


@dataclass
class ConicProblem:
    """Standard-form conic LP.  A is CSC (m x n), columns grouped by cone."""

    A: sp.csc_matrix
    b: np.ndarray
    c: np.ndarray
    cones: list
    name: str = ""

    def __post_init__(self):
        A = sp.csc_matrix(self.A, copy=True)
        A.sum_duplicates()
        A.eliminate_zeros()
        A.sort_indices()
        self.A = A
        self.b = np.asarray(self.b, dtype=float).ravel()
        self.c = np.asarray(self.c, dtype=float).ravel()
        m, n = A.shape
        if m < 1 or n < 1:
            raise ValueError("problem must have at least one row and column")
        if self.b.shape != (m,):
            raise ValueError(f"b has length {self.b.size}, expected {m}")
        if self.c.shape != (n,):
            raise ValueError(f"c has length {self.c.size}, expected {n}")
        if not (np.all(np.isfinite(A.data)) and np.all(np.isfinite(self.b))
                and np.all(np.isfinite(self.c))):
            raise ValueError("problem data must be finite")
        total = sum(cone.veclen for cone in self.cones)
        if total != n:
            raise ValueError(
                f"cone blocks cover {total} variables, expected {n}")

    @property
    def m(self) -> int:
        return self.A.shape[0]

    @property
    def n(self) -> int:
        return self.A.shape[1]

    @property
    def nnz(self) -> int:
        return self.A.nnz

    def is_orthant_only(self) -> bool:
        return all(cone.kind == NONNEG for cone in self.cones)

    def barrier_degree_total(self) -> int:
        return sum(cone.barrier_degree for cone in self.cones)


@dataclass
class Residuals:
    """Normalized primal/dual residuals and duality gap at a candidate point."""

    pres: float
    dres: float
    dgap: float
    norm_mode: str = "two"

    def max(self, skip_dual: bool = False) -> float:
        if skip_dual:
            return max(self.pres, self.dgap)
        return max(self.pres, self.dres, self.dgap)


@dataclass
class SolveResult:
    status: Status
    x: np.ndarray
    y: np.ndarray
    s: np.ndarray
    objective_primal: float
    objective_dual: float
    residuals: Residuals
    outer_iters: int = 0
    admm_iters: int = 0
    wall_time: float = 0.0


def compute_residuals(problem: ConicProblem, x, y, s, tau, norm_mode="two"):
    """Residuals of (x, y, s)/tau against the problem data.

    tau must be positive: the caller divides the homogeneous iterate through
    by it to land in the original problem's coordinates.
    """
    if tau <= 0:
        raise ValueError(f"tau must be positive, got {tau}")
    mode = _as_norm_mode(norm_mode)
    x = np.asarray(x, dtype=float) / tau
    y = np.asarray(y, dtype=float) / tau
    s = np.asarray(s, dtype=float) / tau
    A, b, c = problem.A, problem.b, problem.c
    ax = A @ x
    aty = A.T @ y
    pobj = float(c @ x)
    dobj = float(b @ y)
    if mode == "two":
        pres = np.linalg.norm(ax - b) / (1.0 + np.linalg.norm(b))
        dres = np.linalg.norm(aty + s - c) / (1.0 + np.linalg.norm(c))
        dgap = abs(pobj - dobj) / (1.0 + abs(pobj) + abs(dobj))
    else:
        nb = max(np.linalg.norm(ax, np.inf), np.linalg.norm(b, np.inf))
        pres = np.linalg.norm(ax - b, np.inf) / (1.0 + nb)
        dres = (np.linalg.norm(aty + s - c, np.inf)
                / (1.0 + np.linalg.norm(c, np.inf)))
        dgap = abs(pobj - dobj) / (1.0 + max(abs(pobj), abs(dobj)))
    return Residuals(float(pres), float(dres), float(dgap), mode)


def classify_terminal_state(problem, u, v, tol, norm_mode="two",
                            skip_dual_check=False):
    """Map a final homogeneous iterate to a terminal Status.

    ``u = (y, x, tau, theta)`` and ``v = (r, s, kappa, xi)`` as block tuples.
    kappa dominating tau signals infeasibility; the sign of c'x (resp. b'y)
    on the raw iterate picks the certificate.  Optimal additionally requires
    the normalized residuals at x/tau to clear ``tol``.
    """
    y, x, tau, theta = u
    r, s, kappa, xi = v
    tau = float(tau)
    kappa = float(kappa)
    if tau < 1e-8 * max(1.0, kappa):
        ctx = float(problem.c @ x)
        bty = float(problem.b @ y)
        if ctx < 0:
            return Status.DUAL_INFEASIBLE
        if bty > 0:
            return Status.PRIMAL_INFEASIBLE
        return Status.NUMERICAL_FAILURE
    if tau <= tol * kappa:
        # ambiguous scaling: never declare optimality here
        return Status.NUMERICAL_FAILURE
    res = compute_residuals(problem, x, y, s, tau, norm_mode)
    if res.max(skip_dual=skip_dual_check) <= tol:
        return Status.OPTIMAL
    return Status.NUMERICAL_FAILURE
