"""Homogeneous self-dual embedding of a standard-form conic LP.

The embedding augments (y, x) with a scale variable tau and a residual
variable theta, producing the skew-symmetric constraint Q u = v where

    u = (y, x, tau, theta),      v = (r, s, kappa, xi),

and Q carries the problem data plus the constraint residuals (rp, rd, rg)
of the strictly interior unit start.  The start point itself is feasible
for the embedded constraint (apply_Q at the start reproduces v exactly),
every strictly complementary solution with tau > 0 recovers an optimal
primal-dual pair, and kappa > 0 certifies primal or dual infeasibility.
"""
from __future__ import annotations

import numpy as np

from . import cones as _cones
from .core import ConicProblem, Residuals, SolveResult, Status, NONNEG
from .core import classify_terminal_state, compute_residuals
from .linalg import factor_reduced_system


class HsdSystem:
    """Embedded problem plus the factored per-iteration linear system."""

    def __init__(self, problem: ConicProblem, beta=1.0, mode="direct"):
        if beta <= 0:
            raise ValueError("beta must be positive")
        self.problem = problem
        self.beta = float(beta)
        m, n = problem.m, problem.n
        self.m, self.n = m, n
        self.dim = m + n + 2

        blocks = []
        offset = 0
        for cone in problem.cones:
            blocks.append((cone, offset, offset + cone.veclen))
            offset += cone.veclen
        self.cone_blocks = blocks
        self.orthant_only = problem.is_orthant_only()
        self.barrier_total = problem.barrier_degree_total()

        self.x0 = np.concatenate(
            [_cones.interior_point(cone) for cone in problem.cones])
        self.s0 = self.x0.copy()
        self.y0 = np.zeros(m)
        A, b, c = problem.A, problem.b, problem.c
        self.rp = b - A @ self.x0
        self.rd = self.s0 - c + A.T @ self.y0
        self.rg = 1.0 + float(c @ self.x0) - float(b @ self.y0)
        self.nu = float(self.x0 @ self.s0) + 1.0
        self.factor = factor_reduced_system(
            A, b, c, self.rp, self.rd, self.rg, mode=mode)

    # matvecs shared with the factor (dense-cached when A is small)
    def Amv(self, x):
        return self.factor.Amv(x)

    def ATmv(self, y):
        return self.factor.ATmv(y)


def build_embedding(problem: ConicProblem, beta=1.0, mode="direct"):
    return HsdSystem(problem, beta=beta, mode=mode)


def apply_Q(sys: HsdSystem, u, out=None):
    """Matrix-free product with the skew-symmetric embedding matrix."""
    m, n = sys.m, sys.n
    p = sys.problem
    y, x = u[:m], u[m:m + n]
    tau, theta = u[m + n], u[m + n + 1]
    if out is None:
        out = np.empty_like(u)
    # grouping (A x - tau b) + theta rp keeps the start point's image at
    # exactly zero in floating point
    out[:m] = (sys.Amv(x) - tau * p.b) + theta * sys.rp
    out[m:m + n] = (-sys.ATmv(y) + tau * p.c) + theta * sys.rd
    out[m + n] = (float(p.b @ y) - float(p.c @ x)) + theta * sys.rg
    out[m + n + 1] = (-float(sys.rp @ y) - float(sys.rd @ x)) - sys.rg * tau
    return out


def assemble_q_dense(sys: HsdSystem):
    """Dense Q for small-problem tests."""
    m, n = sys.m, sys.n
    A = sys.problem.A.toarray()
    b, c = sys.problem.b, sys.problem.c
    Q = np.zeros((sys.dim, sys.dim))
    Q[:m, m:m + n] = A
    Q[:m, m + n] = -b
    Q[:m, m + n + 1] = sys.rp
    Q[m:m + n, :m] = -A.T
    Q[m:m + n, m + n] = c
    Q[m:m + n, m + n + 1] = sys.rd
    Q[m + n, :m] = b
    Q[m + n, m:m + n] = -c
    Q[m + n, m + n + 1] = sys.rg
    Q[m + n + 1, :m] = -sys.rp
    Q[m + n + 1, m:m + n] = -sys.rd
    Q[m + n + 1, m + n] = -sys.rg
    return Q


class IterateState:
    """Current (u, v) pair plus running sums for averaging and restarts."""

    __slots__ = ("u", "v", "u_avg", "v_avg", "qu_avg", "navg",
                 "inner_count", "total_count")

    def __init__(self, u, v, qu):
        self.u = u
        self.v = v
        # running *sums* over the current restart cycle (divide by navg)
        self.u_avg = u.copy()
        self.v_avg = v.copy()
        self.qu_avg = qu.copy()
        self.navg = 1
        self.inner_count = 0
        self.total_count = 0

    def reset_cycle(self):
        self.u_avg[:] = self.u
        self.v_avg[:] = self.v
        self.navg = 1

    def split_u(self, m, n):
        return (self.u[:m], self.u[m:m + n], self.u[m + n], self.u[m + n + 1])

    def split_v(self, m, n):
        return (self.v[:m], self.v[m:m + n], self.v[m + n], self.v[m + n + 1])


def initial_state(sys: HsdSystem) -> IterateState:
    """Unit start: strictly interior, exactly feasible for Q u = v."""
    m, n = sys.m, sys.n
    u = np.empty(sys.dim)
    u[:m] = sys.y0
    u[m:m + n] = sys.x0
    u[m + n] = 1.0
    u[m + n + 1] = 1.0
    v = np.empty(sys.dim)
    v[:m] = 0.0
    v[m:m + n] = sys.s0
    v[m + n] = 1.0
    v[m + n + 1] = -sys.nu
    qu = apply_Q(sys, u)
    return IterateState(u, v, qu)


def recover_solution(sys: HsdSystem, state: IterateState, tol,
                     norm_mode="two", skip_dual_check=False) -> SolveResult:
    """Map the final iterate to a SolveResult in the embedded problem's frame.

    Divides through by tau when it dominates; otherwise returns the raw
    iterate as an infeasibility certificate carrier.
    """
    m, n = sys.m, sys.n
    p = sys.problem
    y, x, tau, theta = state.split_u(m, n)
    r, s, kappa, xi = state.split_v(m, n)
    status = classify_terminal_state(
        p, (y, x, tau, theta), (r, s, kappa, xi), tol,
        norm_mode=norm_mode, skip_dual_check=skip_dual_check)
    return build_result(sys, state, status, norm_mode)


def build_result(sys: HsdSystem, state: IterateState, status: Status,
                 norm_mode="two") -> SolveResult:
    """Assemble a SolveResult for a status the caller already decided."""
    m, n = sys.m, sys.n
    p = sys.problem
    y, x, tau, _ = state.split_u(m, n)
    _, s, _, _ = state.split_v(m, n)
    tau = float(tau)
    nan = float("nan")
    if status in (Status.PRIMAL_INFEASIBLE, Status.DUAL_INFEASIBLE) or tau <= 0:
        # raw homogeneous iterate: (y, s) is the primal-infeasibility
        # certificate carrier, x the dual one
        xr, yr, sr = x.copy(), y.copy(), s.copy()
        res = Residuals(nan, nan, nan, norm_mode
                        if isinstance(norm_mode, str) else "two")
        return SolveResult(status, xr, yr, sr, float(p.c @ xr),
                           float(p.b @ yr), res)
    xs, ys, ss = x / tau, y / tau, s / tau
    res = compute_residuals(p, x, y, s, tau, norm_mode)
    return SolveResult(status, xs, ys, ss, float(p.c @ xs), float(p.b @ ys),
                       res)
