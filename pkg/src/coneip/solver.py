"""ADMM-based interior-point driver on the homogeneous self-dual embedding.

Outer loop: a decreasing barrier weight mu.  Inner loop: ADMM steps on
  min  barrier(u) + indicator(v)   s.t.  Q u = v,
whose u-subproblem is one linear solve with I + Q (factored once) followed
by closed-form barrier proxes, and whose v-subproblem collapses to an
explicit update.  The inner loop ends when ||Q u - v|| is small relative to
mu; optional accelerations: iterate averaging with periodic restarts, an
adaptive (LOQO-flavored) or hybrid mu schedule, and a double-relaxed
("half-update") step with parameters alpha1/alpha2.
"""
from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field, replace
from math import sqrt

import numpy as np
import scipy.linalg as sla
from scipy.sparse.linalg import norm as spnorm

from . import cones as _cones
from .core import (ConicProblem, Residuals, SolveResult, Status,
                   compute_residuals)
from .hsd import (HsdSystem, IterateState, apply_Q, assemble_q_dense,
                  build_embedding, initial_state)
from .linalg import NumericalFailureError
from .precond import scale_problem, unscale_solution

MU_MIN = 1e-18  # prox weight floor; keeps iterates strictly interior


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

@dataclass
class SolverConfig:
    tol: float = 1e-6
    beta: float = 1.0
    mu_strategy: str = "hybrid"          # aggressive | loqo | hybrid
    aggressive_zeta: float = 0.8
    aggressive_eta: float = 1.5
    loqo_alpha: float = 0.1
    hybrid_switch_factor: float = 1e3
    restart_enabled: bool = True
    restart_threshold: float = 1e5       # total steps before restarting begins
    restart_period: int = 1000           # steps between restarts (>= 2)
    half_update: bool = False
    alpha1: float = 0.3                  # stable whenever alpha1+alpha2 < 2
    alpha2: float = 1.0                  # 1.0 keeps s = -lam*grad F(x) exact
    inner_rule: str = "auto"             # plain | average | conic | auto
    conic_alpha: float = 1.0             # exponent for the conic inner rule
    norm_mode: str = "auto"              # two | inf | auto
    max_admm_iters: int = 1_000_000
    time_limit: float | None = None
    skip_dual_check: bool = False
    linsys_mode: str = "direct"          # direct | indirect
    global_check_gate: float = 1e3       # residual checks once mu < tol*gate
    scaling: str = "both"                # none | ruiz | pc | both
    scale_order: str = "ruiz_first"
    ruiz_iters: int = 10
    pc_alpha: float = 1.0

    def validate(self):
        if not 0 < self.tol < 1:
            raise ValueError("tol must lie in (0, 1)")
        if self.beta <= 0:
            raise ValueError("beta must be positive")
        if self.mu_strategy not in ("aggressive", "loqo", "hybrid"):
            raise ValueError(f"unknown mu strategy {self.mu_strategy!r}")
        if self.inner_rule not in ("plain", "average", "conic", "auto"):
            raise ValueError(f"unknown inner rule {self.inner_rule!r}")
        if not 0.25 <= self.conic_alpha <= 2.0:
            raise ValueError("conic_alpha must lie in [0.25, 2]")
        if self.norm_mode not in ("two", "inf", "auto"):
            raise ValueError(f"unknown norm mode {self.norm_mode!r}")
        if int(self.restart_period) < 2:
            raise ValueError("restart_period must be >= 2")
        if self.half_update:
            for a in (self.alpha1, self.alpha2):
                if not 0 < a < 2:
                    raise ValueError("alpha1/alpha2 must lie in (0, 2)")
            if self.alpha1 + self.alpha2 >= 2:
                warnings.warn("half-update steps with alpha1 + alpha2 >= 2 "
                              "diverge on typical problems", RuntimeWarning,
                              stacklevel=2)
        if self.linsys_mode not in ("direct", "indirect"):
            raise ValueError(f"unknown linsys mode {self.linsys_mode!r}")
        if self.scaling not in ("none", "ruiz", "pc", "both"):
            raise ValueError(f"unknown scaling {self.scaling!r}")


@dataclass
class TraceRecord:
    k: int
    mu: float
    inner_iters: int
    pres: float
    dres: float
    dgap: float
    restarts: int


@dataclass
class SolveTrace:
    records: list = field(default_factory=list)
    total_admm_iters: int = 0
    total_restarts: int = 0
    strategy: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# mu schedules
# ---------------------------------------------------------------------------

def update_mu_aggressive(mu, zeta=0.8, eta=1.5):
    """Geometric/power decrease: min(zeta*mu, mu**eta)."""
    return min(zeta * mu, mu ** eta)


def update_mu_loqo(sys: HsdSystem, state: IterateState, mu, alpha=0.1):
    """Centrality-adaptive decrease; falls back to alpha*mu whenever the
    centrality measure is not positive."""
    m, n = sys.m, sys.n
    x = state.u[m:m + n]
    s = state.v[m:m + n]
    tau, theta = state.u[m + n], state.u[m + n + 1]
    kappa, xi = state.v[m + n], state.v[m + n + 1]
    prods = x * s
    gate = theta * (-xi)
    total = float(prods.sum()) + tau * kappa + gate
    smallest = min(float(prods.min()), tau * kappa, gate)
    if not np.isfinite(total) or total <= 0:
        return alpha * mu
    phi = (sys.n + 2) * smallest / total
    if phi <= 0:
        return alpha * mu
    factor = max(0.1 * min(0.05 * (1.0 - phi) / phi, 2.0) ** 3, alpha)
    return mu * factor


def _next_mu(cfg: SolverConfig, sys, state, mu):
    strategy = cfg.mu_strategy
    if strategy == "hybrid":
        strategy = ("aggressive"
                    if mu > cfg.hybrid_switch_factor * cfg.tol else "loqo")
    if strategy == "aggressive":
        nxt = update_mu_aggressive(mu, cfg.aggressive_zeta, cfg.aggressive_eta)
    else:
        nxt = update_mu_loqo(sys, state, mu, cfg.loqo_alpha)
    if nxt >= mu:  # schedules contract for mu < 1; keep the trace monotone
        nxt = 0.5 * mu
    return nxt


# ---------------------------------------------------------------------------
# one ADMM step (and its double-relaxed variant)
# ---------------------------------------------------------------------------

def _prox_scalar_pos(lam, z):
    D = sqrt(z * z + 4.0 * lam)
    return 0.5 * (z + D) if z >= 0 else 2.0 * lam / (D - z)


def _prox_x_block(sys: HsdSystem, lam, z, out):
    """Barrier prox over the x-block, written into out."""
    if sys.orthant_only:
        np.sqrt(z * z + 4.0 * lam, out=out)
        # conjugate form where z < 0 avoids cancellation
        neg = z < 0
        out[~neg] = 0.5 * (z[~neg] + out[~neg])
        out[neg] = 2.0 * lam / (out[neg] - z[neg])
        return
    for cone, lo, hi in sys.cone_blocks:
        out[lo:hi] = _cones.prox_cone_block(cone, lam, z[lo:hi])


def _prox_x_block_pair(sys: HsdSystem, lam, z, out_x, out_s):
    """Barrier prox over the x-block plus its multiplier -lam*grad F(x).

    The multiplier comes from the prox internals rather than the recurrence
    v + u - u~, which cancels catastrophically once the products x*s ~ lam
    drop below roundoff on the O(1) iterates."""
    if sys.orthant_only:
        _prox_x_block(sys, lam, z, out_x)
        np.divide(lam, out_x, out=out_s)
        return
    for cone, lo, hi in sys.cone_blocks:
        x, s = _cones.prox_cone_block_pair(cone, lam, z[lo:hi])
        out_x[lo:hi] = x
        out_s[lo:hi] = s


def admm_step(sys: HsdSystem, state: IterateState, mu, cg_tol=None):
    """One plain inner step; returns the state it mutated."""
    m, n = sys.m, sys.n
    mn = m + n
    u, v = state.u, state.v
    ut = sys.factor.solve(u + v, cg_tol=cg_tol)
    lam = max(mu, MU_MIN) / sys.beta
    z = ut - v
    u[:m] = z[:m]
    _prox_x_block_pair(sys, lam, z[m:mn], u[m:mn], v[m:mn])
    u[mn] = _prox_scalar_pos(lam, z[mn])
    u[mn + 1] = z[mn + 1] - sys.nu
    v[:m] = 0.0
    v[mn] = lam / u[mn]
    v[mn + 1] = -sys.nu
    return state


def half_update_step(sys: HsdSystem, state: IterateState, mu,
                     alpha1=1.5, alpha2=1.5, cg_tol=None):
    """Double-relaxed step: v is moved toward Q u~ by alpha1 before the
    proxes and relaxed by alpha2 afterwards."""
    m, n = sys.m, sys.n
    mn = m + n
    u, v = state.u, state.v
    ut = sys.factor.solve(u + v, cg_tol=cg_tol)
    lam = max(mu, MU_MIN) / sys.beta
    vmid = v + alpha1 * (u - ut)
    z = ut - vmid
    u[:m] = z[:m]
    _prox_x_block(sys, lam, z[m:mn], u[m:mn])
    u[mn] = _prox_scalar_pos(lam, z[mn])
    u[mn + 1] = z[mn + 1] - sys.nu
    v[:] = vmid - alpha2 * (ut - u)
    return state


def inner_converged(sys: HsdSystem, state: IterateState, mu, rule="plain",
                    conic_alpha=0.5, qu=None):
    """Inner-loop termination test on ||Q u - v||."""
    if qu is None:
        qu = apply_Q(sys, state.u)
    diff = qu - state.v
    sq = float(diff @ diff)
    if rule == "plain":
        return sq <= mu
    if rule == "average":
        if sq <= mu:
            return True
        davg = (state.qu_avg - state.v_avg) / state.navg
        return float(davg @ davg) <= mu
    if rule == "conic":
        nrm = sqrt(float(state.u @ state.u) + float(state.v @ state.v))
        return sqrt(sq) <= mu ** conic_alpha * (1.0 + nrm)
    raise ValueError(f"unknown inner rule {rule!r}")


# ---------------------------------------------------------------------------
# strategy presets
# ---------------------------------------------------------------------------

def select_strategy(features: dict) -> dict:
    """Deterministic preset table keyed on coarse problem shape."""
    m = features["m"]
    n = features["n"]
    density = features.get("density")
    if density is None:
        density = features.get("nnz", m * n) / float(m * n)
    if density > 0.1 and n < 1e4:
        return {"name": "plain + hybrid mu", "mu_strategy": "hybrid",
                "restart_enabled": False, "scaling": "none"}
    if m >= 2 * n:
        return {"name": "restart + scaling", "mu_strategy": "aggressive",
                "restart_enabled": True, "scaling": "both"}
    return {"name": "restart + scaling + hybrid mu", "mu_strategy": "hybrid",
            "restart_enabled": True, "scaling": "both"}


# ---------------------------------------------------------------------------
# the driver
# ---------------------------------------------------------------------------

def _interior_assert(sys: HsdSystem, state: IterateState, check_dual):
    # Diverging iterates would fail the margin tests below with an
    # AssertionError: once a component passes ~1e154 its square overflows
    # inside the proxes and the stable-quadratic output rounds to exactly
    # zero.  Surface that as a numerical failure instead of a crash.
    amax = max(np.abs(state.u).max(), np.abs(state.v).max())
    if not amax <= 1e150:               # catches nan as well
        raise NumericalFailureError("iterates overflowed")
    m, n = sys.m, sys.n
    x = state.u[m:m + n]
    for cone, lo, hi in sys.cone_blocks:
        assert _cones.interior_margin(cone, x[lo:hi]) > 0, \
            f"x left the {cone.kind} cone"
    assert state.u[m + n] > 0, "tau must stay positive"
    if check_dual:
        s = state.v[m:m + n]
        for cone, lo, hi in sys.cone_blocks:
            assert _cones.interior_margin(cone, s[lo:hi]) > 0, \
                f"s left the {cone.kind} cone"
        assert state.v[m + n] > 0, "kappa must stay positive"


def _empty_result(problem, status, norm_mode):
    nan = float("nan")
    return SolveResult(status, np.zeros(problem.n), np.zeros(problem.m),
                       np.zeros(problem.n), nan, nan,
                       Residuals(nan, nan, nan, norm_mode))


def solve(problem: ConicProblem, config: SolverConfig | None = None,
          trace_sink=None):
    """Solve a standard-form conic LP.  Returns (SolveResult, SolveTrace)."""
    cfg = config if config is not None else SolverConfig()
    cfg.validate()
    t0 = time.perf_counter()

    norm_mode = cfg.norm_mode
    if norm_mode == "auto":
        norm_mode = "two" if problem.is_orthant_only() else "inf"
    rule = cfg.inner_rule
    if rule == "auto":
        rule = "average" if problem.is_orthant_only() else "conic"
    if cfg.skip_dual_check and np.any(problem.c != 0):
        raise ValueError("skip_dual_check requires a null objective (c = 0)")

    trace = SolveTrace(strategy={
        "mu_strategy": cfg.mu_strategy, "inner_rule": rule,
        "norm_mode": norm_mode, "scaling": cfg.scaling,
        "half_update": cfg.half_update, "restart": cfg.restart_enabled})

    # -- optional data scaling (skipped for matrices with empty rows/cols,
    #    where the equilibration contracts don't apply)
    work = problem
    info = None
    if cfg.scaling != "none" and np.all(problem.A.getnnz(axis=1) > 0) \
            and np.all(problem.A.getnnz(axis=0) > 0):
        work, info = scale_problem(problem, method=cfg.scaling,
                                   order=cfg.scale_order,
                                   ruiz_iters=cfg.ruiz_iters,
                                   pc_alpha=cfg.pc_alpha)

    try:
        sys = build_embedding(work, beta=cfg.beta, mode=cfg.linsys_mode)
    except NumericalFailureError:
        return _empty_result(problem, Status.NUMERICAL_FAILURE, norm_mode), trace

    m, n = sys.m, sys.n
    mn = m + n
    state = initial_state(sys)
    mu = cfg.beta
    tol = cfg.tol
    gate = tol * cfg.global_check_gate
    period = int(cfg.restart_period)
    threshold = cfg.restart_threshold

    # residual checks run against the ORIGINAL problem data
    d1 = info.D1 if info is not None else None
    A0, b0, c0 = problem.A, problem.b, problem.c
    Ad0 = A0.toarray() if m * n <= 250_000 else None
    nb2, nc2 = 1.0 + np.linalg.norm(b0), 1.0 + np.linalg.norm(c0)
    nbinf = np.linalg.norm(b0, np.inf) if m else 0.0
    ncinf1 = 1.0 + np.linalg.norm(c0, np.inf)

    def original_xys():
        tau = state.u[mn]
        x = state.u[m:mn] / tau
        y = state.u[:m] / tau
        s = state.v[m:mn] / tau
        if info is not None:
            x, y, s = unscale_solution(info, x, y, s)
        return x, y, s

    na0 = 1.0 + spnorm(A0)

    def certified_infeasibility():
        """Farkas-ray check on the raw homogeneous iterate.

        A collapsing tau can be a transient (the half-update rescale knocks
        the whole iterate down between outer loops), so the ray has to
        actually certify before the solver classifies.  Ratios are scale
        invariant, so the unnormalized iterate is fine here."""
        xr = state.u[m:mn]
        yr = state.u[:m]
        sr = state.v[m:mn]
        if info is not None:
            xr, yr, sr = unscale_solution(info, xr, yr, sr)
        ctx = float(c0 @ xr)
        if ctx < 0:
            ax = Ad0 @ xr if Ad0 is not None else A0 @ xr
            if np.linalg.norm(ax) * (1.0 + nc2) <= 1e-3 * (-ctx) * na0:
                return Status.DUAL_INFEASIBLE
        bty = float(b0 @ yr)
        if bty > 0:
            aty = Ad0.T @ yr if Ad0 is not None else A0.T @ yr
            if np.linalg.norm(aty + sr) * nb2 <= 1e-3 * bty * na0:
                return Status.PRIMAL_INFEASIBLE
        return None

    feas_inf = np.inf   # ||Ax - b||_inf at the last residual check

    def global_residuals():
        nonlocal feas_inf
        x, y, s = original_xys()
        ax = Ad0 @ x if Ad0 is not None else A0 @ x
        aty = Ad0.T @ y if Ad0 is not None else A0.T @ y
        pobj, dobj = float(c0 @ x), float(b0 @ y)
        err = ax - b0
        feas_inf = float(np.linalg.norm(err, np.inf))
        if norm_mode == "two":
            pres = np.linalg.norm(err) / nb2
            dres = np.linalg.norm(aty + s - c0) / nc2
            dgap = abs(pobj - dobj) / (1.0 + abs(pobj) + abs(dobj))
        else:
            pres = feas_inf / (1.0 + max(np.linalg.norm(ax, np.inf), nbinf))
            dres = np.linalg.norm(aty + s - c0, np.inf) / ncinf1
            dgap = abs(pobj - dobj) / (1.0 + max(abs(pobj), abs(dobj)))
        return Residuals(float(pres), float(dres), float(dgap), norm_mode)

    # Feasibility-certification runs (null objective) additionally demand
    # absolute per-row accuracy: the relative normalizer 1 + max(|Ax|, |b|)
    # would otherwise accept up to ~2*tol on individual rows.
    def feasibility_certified():
        return not cfg.skip_dual_check or feas_inf <= tol

    check_dual_interior = not cfg.half_update  # alpha2 != 1 lets s wander
    status = None
    final_res = None
    outer_k = 0

    while status is None:
        state.reset_cycle()
        state.qu_avg[:] = apply_Q(sys, state.u)
        inner_iters = 0
        cycle_restarts = 0
        lam_mu = max(mu, MU_MIN)
        cg_tol = (min(1e-9, 0.1 * lam_mu)
                  if cfg.linsys_mode == "indirect" else None)

        while True:
            if state.total_count >= cfg.max_admm_iters:
                status = Status.ITERATION_LIMIT
                break
            if cfg.time_limit is not None \
                    and time.perf_counter() - t0 > cfg.time_limit:
                status = Status.TIME_LIMIT
                break
            try:
                if cfg.half_update:
                    half_update_step(sys, state, mu, cfg.alpha1, cfg.alpha2,
                                     cg_tol=cg_tol)
                else:
                    admm_step(sys, state, mu, cg_tol=cg_tol)
                _interior_assert(sys, state, check_dual_interior)
            except NumericalFailureError:
                status = Status.NUMERICAL_FAILURE
                break
            qu = apply_Q(sys, state.u)
            inner_iters += 1
            state.inner_count += 1
            state.total_count += 1
            state.u_avg += state.u
            state.v_avg += state.v
            state.qu_avg += qu
            state.navg += 1

            if cfg.restart_enabled and state.total_count >= threshold \
                    and inner_iters % period == 0:
                state.u[:] = state.u_avg / period
                state.v[:] = state.v_avg / period
                qu = state.qu_avg / period  # Q is linear in the average
                state.reset_cycle()
                state.qu_avg[:] = qu
                cycle_restarts += 1
                try:
                    _interior_assert(sys, state, check_dual_interior)
                except NumericalFailureError:
                    status = Status.NUMERICAL_FAILURE
                    break

            tau, kappa = state.u[mn], state.v[mn]
            if not np.isfinite(tau) or not np.isfinite(kappa):
                status = Status.NUMERICAL_FAILURE
                break
            if tau < 1e-8 * max(1.0, kappa):
                verdict = certified_infeasibility()
                if verdict is not None:
                    status = verdict
                    break
                # tau collapsed but no ray certifies: transient; keep going

            if inner_converged(sys, state, mu, rule, cfg.conic_alpha, qu=qu):
                break

            if mu < gate and (mu < tol or state.total_count % 20 == 0):
                res = global_residuals()
                if res.max(skip_dual=cfg.skip_dual_check) <= tol \
                        and tau > tol * kappa and feasibility_certified():
                    status = Status.OPTIMAL
                    final_res = res
                    break

        outer_k += 1
        if final_res is not None:
            res = final_res
        elif status in (Status.PRIMAL_INFEASIBLE, Status.DUAL_INFEASIBLE,
                        Status.NUMERICAL_FAILURE):
            nan = float("nan")
            res = Residuals(nan, nan, nan, norm_mode)
        else:
            res = global_residuals()
        rec = TraceRecord(outer_k, mu, inner_iters, res.pres, res.dres,
                          res.dgap, cycle_restarts)
        trace.records.append(rec)
        trace.total_restarts += cycle_restarts
        if trace_sink is not None:
            trace_sink(rec)
        if status is not None:
            break

        tau, kappa = state.u[mn], state.v[mn]
        if res.max(skip_dual=cfg.skip_dual_check) <= tol and tau > tol * kappa \
                and feasibility_certified():
            status = Status.OPTIMAL
            final_res = res
            break

        mu_next = _next_mu(cfg, sys, state, mu)
        if cfg.half_update:
            # Warm-start (u, v) mostly unchanged, like the plain scheme, but
            # repair the two v-blocks whose exact values the relaxed update
            # lets drift.  Rescaling the multiplier blocks here destroys the
            # already-converged dual values on the coordinates where x -> 0
            # (there v_s ~ s* stays O(1) across outer stages) and costs an
            # order of magnitude in inner iterations to regrind.
            state.v[:m] = 0.0
            state.v[mn + 1] = -sys.nu
        mu = mu_next

    trace.total_admm_iters = state.total_count

    # -- assemble the result in the original problem's frame
    tau = float(state.u[mn])
    wall = time.perf_counter() - t0
    if status in (Status.PRIMAL_INFEASIBLE, Status.DUAL_INFEASIBLE,
                  Status.NUMERICAL_FAILURE) or tau <= 0:
        xr = state.u[m:mn].copy()
        yr = state.u[:m].copy()
        sr = state.v[m:mn].copy()
        if info is not None:
            xr, yr, sr = unscale_solution(info, xr, yr, sr)
        nan = float("nan")
        result = SolveResult(status, xr, yr, sr, float(c0 @ xr),
                             float(b0 @ yr), Residuals(nan, nan, nan,
                                                       norm_mode))
    else:
        x, y, s = original_xys()
        res = final_res if final_res is not None else global_residuals()
        result = SolveResult(status, x, y, s, float(c0 @ x), float(b0 @ y),
                             res)
    result.outer_iters = outer_k
    result.admm_iters = state.total_count
    result.wall_time = wall
    return result, trace


# ---------------------------------------------------------------------------
# reference three-block scheme (test oracle; dense algebra)
# ---------------------------------------------------------------------------

class ReferenceState:
    """Iterates and scaled dual variables of the unreduced three-block ADMM."""

    def __init__(self, sys: HsdSystem, state: IterateState):
        self.Q = assemble_q_dense(sys)
        G = np.eye(sys.dim) + self.Q.T @ self.Q
        self.chol = sla.cho_factor(G, lower=True)
        self.u = state.u.copy()
        self.v = state.v.copy()
        self.p = state.v.copy()   # dual for the u-block, started at v0
        self.q = state.u.copy()   # dual for the v-block, started at u0
        self.ut = np.zeros(sys.dim)  # last subspace projection, for tests
        self.vt = np.zeros(sys.dim)


def reference_admm_step(sys: HsdSystem, ref: ReferenceState, mu):
    """One step of the three-block scheme: project onto {Qu = v}, prox each
    block, update the scaled duals."""
    m, n = sys.m, sys.n
    mn = m + n
    lam = max(mu, MU_MIN) / sys.beta
    a = ref.u + ref.p
    b = ref.v + ref.q
    ut = sla.cho_solve(ref.chol, a - ref.Q @ b)
    vt = ref.Q @ ut

    z = ut - ref.p
    unew = np.empty_like(ut)
    unew[:m] = z[:m]
    _prox_x_block(sys, lam, z[m:mn], unew[m:mn])
    unew[mn] = _prox_scalar_pos(lam, z[mn])
    unew[mn + 1] = z[mn + 1] - sys.nu

    zv = vt - ref.q
    vnew = np.empty_like(vt)
    vnew[:m] = 0.0
    _prox_x_block(sys, lam, zv[m:mn], vnew[m:mn])
    vnew[mn] = _prox_scalar_pos(lam, zv[mn])
    vnew[mn + 1] = -sys.nu

    ref.p -= ut - unew
    ref.q -= vt - vnew
    ref.u, ref.v = unew, vnew
    ref.ut, ref.vt = ut, vt
    return ref
