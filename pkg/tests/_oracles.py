"""Independent reference solvers used to cross-check the conic solver.

Each oracle attacks the original (un-embedded) formulation with a
different algorithm family, so agreement is evidence rather than an
identity: coordinate descent for the lasso, an accelerated projected
gradient on the SVM dual, and a damped Newton method on the prox
optimality conditions lives in coneip.cones.prox_oracle_newton.
"""
import numpy as np


# --------------------------------------------------------------------------
# lasso:  min ||F w - g||^2 + lam * |w|_1   (coordinate descent)
# --------------------------------------------------------------------------
def lasso_cd(F, g, lam, tol=1e-10, max_sweeps=100_000):
    """Cyclic coordinate descent; stops when the max subgradient
    violation of the objective drops below tol."""
    F = np.asarray(F, float)
    g = np.asarray(g, float)
    n = F.shape[1]
    G = F.T @ F
    Fg = F.T @ g
    diag = np.diag(G).copy()
    w = np.zeros(n)
    Gw = np.zeros(n)                 # G @ w, maintained incrementally
    half = 0.5 * lam
    for sweep in range(max_sweeps):
        for j in range(n):
            r = Fg[j] - Gw[j] + diag[j] * w[j]   # = F_j'(g - F w_{-j})
            if r > half:
                new = (r - half) / diag[j]
            elif r < -half:
                new = (r + half) / diag[j]
            else:
                new = 0.0
            d = new - w[j]
            if d != 0.0:
                Gw += G[:, j] * d
                w[j] = new
        grad = 2.0 * (Gw - Fg)       # gradient of the smooth part
        viol = np.where(w != 0.0, np.abs(grad + lam * np.sign(w)),
                        np.maximum(np.abs(grad) - lam, 0.0))
        if viol.max() <= tol:
            return w, sweep + 1
    raise RuntimeError("coordinate descent did not converge")


def lasso_objective(F, g, lam, w):
    r = F @ w - g
    return float(r @ r) + lam * float(np.abs(w).sum())


# --------------------------------------------------------------------------
# SVM dual via accelerated projected gradient:
#   max  1'a - (1/(2 lam)) a' K a,   K = diag(y) X X' diag(y)
#   s.t. 0 <= a <= C,  y'a = 0
# --------------------------------------------------------------------------
def _project_box_hyperplane(z, y, C):
    """Euclidean projection onto {0 <= a <= C, y'a = 0} by bisection on
    the hyperplane multiplier."""
    lo, hi = -1.0, 1.0

    def h(theta):
        return float(y @ np.clip(z - theta * y, 0.0, C))

    while h(lo) < 0:
        lo *= 2.0
        if lo < -1e12:
            break
    while h(hi) > 0:
        hi *= 2.0
        if hi > 1e12:
            break
    for _ in range(120):
        mid = 0.5 * (lo + hi)
        if h(mid) > 0:
            lo = mid
        else:
            hi = mid
    return np.clip(z - 0.5 * (lo + hi) * y, 0.0, C)


def svm_dual_pg(X, y, C, lam, tol=1e-8, max_iters=200_000):
    """FISTA with objective restart on the box-and-hyperplane dual.
    Returns (alpha, w, bias, primal, dual, iters, stationarity)."""
    X = np.asarray(X, float)
    y = np.asarray(y, float)
    K = (X @ X.T) * np.outer(y, y)
    L = np.linalg.eigvalsh(K)[-1] / lam
    t = 1.0 / L
    a = np.full(y.size, min(C, 1e-3))
    a = _project_box_hyperplane(a, y, C)
    av = a.copy()
    theta = 1.0
    gm = np.inf
    for k in range(max_iters):
        grad = 1.0 - (K @ av) / lam
        a_new = _project_box_hyperplane(av + t * grad, y, C)
        if k % 10 == 0 or k == max_iters - 1:
            # gradient-mapping stationarity at the non-extrapolated point
            gm = np.abs(a - _project_box_hyperplane(
                a + t * (1.0 - (K @ a) / lam), y, C)).max() / t
            if gm <= tol:
                break
        theta_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * theta * theta))
        beta = (theta - 1.0) / theta_new
        if float((a_new - a) @ grad) < 0:     # restart on non-monotone step
            theta_new, beta = 1.0, 0.0
        av = a_new + beta * (a_new - a)
        a, theta = a_new, theta_new
    w = X.T @ (a * y) / lam
    dual = float(a.sum()) - 0.5 * lam * float(w @ w)
    # the optimal bias minimizes the piecewise-linear hinge sum; the
    # minimum sits at one of the breakpoints 1 - y_i(x_i'w + b) = 0
    margins = y * (X @ w)
    bps = (1.0 - margins) * y
    best = None
    for b in bps:
        val = np.maximum(0.0, 1.0 - margins - y * b).sum()
        if best is None or val < best[0]:
            best = (val, b)
    primal = 0.5 * lam * float(w @ w) + C * best[0]
    return a, w, float(best[1]), primal, dual, k + 1, gm


def svm_primal_objective(X, y, C, lam, w, bias):
    hinge = np.maximum(0.0, 1.0 - y * (X @ w + bias)).sum()
    return 0.5 * lam * float(w @ w) + C * hinge
