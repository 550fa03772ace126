"""Closed-form proximal operators of the canonical log barriers.

For a cone block K with barrier F, the operator computed here is

    prox(lam, zeta) = argmin_x  lam * F(x) + 0.5 * ||x - zeta||^2 ,

which is always strictly interior to K (the barrier blows up at the
boundary).  Orthant and PSD blocks reduce to scalar/eigenvalue square
roots; second-order and rotated second-order blocks reduce to one scalar
quartic whose relevant root is computed in cancellation-free form.

A damped-Newton oracle (`prox_oracle_newton`) solves the same subproblem
iteratively and exists purely so tests can cross-check the closed forms.
"""
from __future__ import annotations

from dataclasses import dataclass
from math import sqrt, hypot, log

import numpy as np

from .core import Cone, NONNEG, SOC, RSOC, PSD

_SQRT2 = sqrt(2.0)

# ---------------------------------------------------------------------------
# packed symmetric (svec) storage: lower triangle, column order, off-diag * sqrt2
# ---------------------------------------------------------------------------

_SVEC_CACHE = {}


def _svec_plan(order):
    plan = _SVEC_CACHE.get(order)
    if plan is None:
        rows = np.concatenate([np.arange(j, order) for j in range(order)])
        cols = np.concatenate([np.full(order - j, j) for j in range(order)])
        scale = np.where(rows == cols, 1.0, _SQRT2)
        plan = (rows, cols, scale)
        _SVEC_CACHE[order] = plan
    return plan


def svec_len(order):
    return order * (order + 1) // 2


def svec(M):
    """Pack a symmetric matrix into its svec vector (isometric for Frobenius)."""
    M = np.asarray(M, dtype=float)
    rows, cols, scale = _svec_plan(M.shape[0])
    return M[rows, cols] * scale


def smat(vec, order=None):
    """Inverse of svec."""
    vec = np.asarray(vec, dtype=float)
    if order is None:
        order = int(round((sqrt(8 * vec.size + 1) - 1) / 2))
    if svec_len(order) != vec.size:
        raise ValueError(f"svec length {vec.size} is not triangular")
    rows, cols, scale = _svec_plan(order)
    X = np.zeros((order, order))
    vals = vec / scale
    X[rows, cols] = vals
    X[cols, rows] = vals
    return X


# ---------------------------------------------------------------------------
# closed-form prox, one cone block at a time
# ---------------------------------------------------------------------------

def prox_nonneg(lam, zeta):
    """Componentwise: the positive root of x^2 - zeta*x - lam = 0.

    The conjugate form for negative zeta avoids the subtractive
    cancellation of zeta + sqrt(zeta^2 + 4 lam).
    """
    zeta = np.asarray(zeta, dtype=float)
    D = np.sqrt(zeta * zeta + 4.0 * lam)
    return np.where(zeta >= 0, 0.5 * (zeta + D), (2.0 * lam) / (D - zeta))


def prox_soc(lam, zeta):
    """Barrier prox for the second-order cone {(t, xbar): t >= ||xbar||}."""
    zeta = np.asarray(zeta, dtype=float)
    zt = zeta[0]
    zx = zeta[1:]
    nx = np.linalg.norm(zx)
    out = np.empty_like(zeta)
    if abs(zt) <= 1e-14 * (1.0 + hypot(zt, nx)):
        # zt = 0: the quartic factors; t and xbar decouple.
        out[0] = sqrt(2.0 * lam + 0.25 * nx * nx)
        out[1:] = 0.5 * zx
        return out
    # gamma = rho + 4/rho is the larger root of g^2 - B g - C = 0, where
    # rho = (t^2 - ||xbar||^2)/lam is the scaled barrier value at the prox.
    B = (zt * zt - nx * nx) / lam
    C = (4.0 * zt * zt + 4.0 * nx * nx) / lam + 16.0
    disc = hypot(B, 2.0 * sqrt(C))
    # disc - B cancels for large positive B (tiny lam, interior zeta)
    gap = 4.0 * C / (disc + B) if B > 0 else disc - B
    d4 = 16.0 * zt * zt / (lam * (gap + 8.0))       # gamma - 4, exact
    sq = sqrt(d4 * (d4 + 8.0))                      # sqrt((g-4)(g+4))
    if zt > 0:
        rho_m2 = 0.5 * (d4 + sq)        # rho - 2 for the larger rho-root
        rho = rho_m2 + 2.0
    else:
        rho_m2 = -4.0 * d4 / (d4 + sq)  # rho - 2 for the smaller rho-root
        # rho -> 0 here, so rho_m2 + 2 cancels; 2(sq-d4)/(sq+d4) in
        # conjugate form is exact
        rho = 16.0 * d4 / ((d4 + sq) * (d4 + sq))
    out[0] = rho * zt / rho_m2
    out[1:] = (rho / (rho + 2.0)) * zx
    return out


def prox_rsoc(lam, zeta):
    """Barrier prox for {(eta, nu, xbar): 2*eta*nu >= ||xbar||^2, eta,nu >= 0}."""
    zeta = np.asarray(zeta, dtype=float)
    ze, zn = zeta[0], zeta[1]
    zx = zeta[2:]
    nx2 = float(zx @ zx)
    sigma = ze + zn
    out = np.empty_like(zeta)
    if abs(sigma) <= 1e-14 * (1.0 + np.linalg.norm(zeta)):
        # eta + nu and eta - nu decouple when zeta_eta + zeta_nu = 0.
        D = sqrt(ze * ze + 4.0 * (lam + 0.125 * nx2))
        out[0] = 0.5 * (ze + D)
        out[1] = 0.5 * (-ze + D)
        out[2:] = 0.5 * zx
        return out
    # gamma = rho + 1/rho, rho = (eta*nu - ||xbar||^2/2)/lam at the prox.
    B = (2.0 * ze * zn - nx2) / (2.0 * lam)
    C = (ze * ze + zn * zn + nx2) / lam + 4.0
    disc = hypot(B, 2.0 * sqrt(C))
    # disc - B cancels for large positive B (tiny lam, interior zeta)
    gap = 4.0 * C / (disc + B) if B > 0 else disc - B
    d2 = 2.0 * sigma * sigma / (lam * (gap + 4.0))       # gamma - 2, exact
    sq = sqrt(d2 * (d2 + 4.0))                           # sqrt((g-2)(g+2))
    if sigma > 0:
        r1 = 0.5 * (d2 + sq)           # rho - 1, larger root
        s_over_r1 = 2.0 * sigma / (d2 + sq)
        rho = r1 + 1.0
    else:
        r1 = -2.0 * d2 / (d2 + sq)     # rho - 1, smaller root (rho = 1/rho2)
        s_over_r1 = -sigma * (d2 + sq) / (2.0 * d2)
        # rho -> 0 here; (sq-d2)/(sq+d2) in conjugate form is exact
        rho = 4.0 * d2 / ((d2 + sq) * (d2 + sq))
    f = rho / (rho + 1.0)
    out[0] = f * (ze + s_over_r1)
    out[1] = f * (zn + s_over_r1)
    out[2:] = f * zx
    return out


def _psd_eig_pair(lam, w):
    """Map eigenvalues d to the positive root e of e^2 - d*e - lam = 0 and
    to the multiplier lam/e, in conjugate (cancellation-free) form.

    For d << -sqrt(lam) the naive 0.5*(d + sqrt(d^2 + 4 lam)) rounds to
    exactly zero, and lam/e then divides by zero.  The two maps swap under
    d -> -d and multiply to lam, so the larger one is 0.5*(|d| + D) (never
    cancels) and the smaller is lam over that."""
    D = np.sqrt(w * w + 4.0 * lam)
    big = 0.5 * (np.abs(w) + D)
    small = lam / big
    pos = w >= 0
    e = np.where(pos, big, small)
    se = np.where(pos, small, big)
    return e, se


def prox_psd_matrix(lam, A):
    """Barrier prox over symmetric PSD matrices: shift each eigenvalue to the
    positive root of e^2 - d*e - lam = 0."""
    A = np.asarray(A, dtype=float)
    w, V = np.linalg.eigh(0.5 * (A + A.T))
    e, _ = _psd_eig_pair(lam, w)
    return (V * e) @ V.T


def prox_cone_block(cone: Cone, lam, zeta):
    """Dispatch on cone kind; psd blocks round-trip through svec."""
    if cone.kind == NONNEG:
        return prox_nonneg(lam, zeta)
    if cone.kind == SOC:
        return prox_soc(lam, zeta)
    if cone.kind == RSOC:
        return prox_rsoc(lam, zeta)
    return svec(prox_psd_matrix(lam, smat(zeta, cone.size)))


# ---------------------------------------------------------------------------
# prox + multiplier pairs
#
# The stationarity condition lam*grad F(x) + x = zeta identifies the dual
# point s = -lam*grad F(x) = x - zeta.  Forming x - zeta directly loses all
# relative accuracy once s << |zeta| (small lam), so each pair function
# emits s from the same internal quantities as the prox itself.
# ---------------------------------------------------------------------------

def prox_nonneg_pair(lam, zeta):
    x = prox_nonneg(lam, zeta)
    return x, lam / x


def prox_soc_pair(lam, zeta):
    """(x, s) with s = -lam*grad F(x); F = -log(t^2 - |xbar|^2).

    Using delta := t^2 - |xbar|^2 = lam*rho, the multiplier is
    s = (2*zeta_t/(rho-2), -2*zeta_xbar/(rho+2))."""
    zeta = np.asarray(zeta, dtype=float)
    zt = zeta[0]
    zx = zeta[1:]
    nx = np.linalg.norm(zx)
    x = np.empty_like(zeta)
    s = np.empty_like(zeta)
    if abs(zt) <= 1e-14 * (1.0 + hypot(zt, nx)):
        x[0] = sqrt(2.0 * lam + 0.25 * nx * nx)   # delta = 2*lam exactly
        x[1:] = 0.5 * zx
        s[0] = x[0]
        s[1:] = -0.5 * zx
        return x, s
    B = (zt * zt - nx * nx) / lam
    C = (4.0 * zt * zt + 4.0 * nx * nx) / lam + 16.0
    disc = hypot(B, 2.0 * sqrt(C))
    gap = 4.0 * C / (disc + B) if B > 0 else disc - B
    d4 = 16.0 * zt * zt / (lam * (gap + 8.0))
    sq = sqrt(d4 * (d4 + 8.0))
    if zt > 0:
        rho_m2 = 0.5 * (d4 + sq)
        rho = rho_m2 + 2.0
    else:
        rho_m2 = -4.0 * d4 / (d4 + sq)
        rho = 16.0 * d4 / ((d4 + sq) * (d4 + sq))
    x[0] = rho * zt / rho_m2
    x[1:] = (rho / (rho + 2.0)) * zx
    s[0] = 2.0 * zt / rho_m2
    s[1:] = (-2.0 / (rho + 2.0)) * zx
    return x, s


def prox_rsoc_pair(lam, zeta):
    """(x, s) for F = -log(eta*nu - |xbar|^2/2); with delta = lam*rho the
    multiplier is s = (nu/rho, eta/rho, -zeta_xbar/(rho+1))."""
    zeta = np.asarray(zeta, dtype=float)
    ze, zn = zeta[0], zeta[1]
    zx = zeta[2:]
    nx2 = float(zx @ zx)
    sigma = ze + zn
    x = np.empty_like(zeta)
    s = np.empty_like(zeta)
    if abs(sigma) <= 1e-14 * (1.0 + np.linalg.norm(zeta)):
        D = sqrt(ze * ze + 4.0 * (lam + 0.125 * nx2))
        x[0] = 0.5 * (ze + D)
        x[1] = 0.5 * (-ze + D)
        x[2:] = 0.5 * zx
        s[0] = x[1]                  # delta = lam exactly in this branch
        s[1] = x[0]
        s[2:] = -0.5 * zx
        return x, s
    B = (2.0 * ze * zn - nx2) / (2.0 * lam)
    C = (ze * ze + zn * zn + nx2) / lam + 4.0
    disc = hypot(B, 2.0 * sqrt(C))
    gap = 4.0 * C / (disc + B) if B > 0 else disc - B
    d2 = 2.0 * sigma * sigma / (lam * (gap + 4.0))
    sq = sqrt(d2 * (d2 + 4.0))
    if sigma > 0:
        r1 = 0.5 * (d2 + sq)
        s_over_r1 = 2.0 * sigma / (d2 + sq)
        rho = r1 + 1.0
    else:
        r1 = -2.0 * d2 / (d2 + sq)
        s_over_r1 = -sigma * (d2 + sq) / (2.0 * d2)
        rho = 4.0 * d2 / ((d2 + sq) * (d2 + sq))
    f = rho / (rho + 1.0)
    x[0] = f * (ze + s_over_r1)
    x[1] = f * (zn + s_over_r1)
    x[2:] = f * zx
    s[0] = x[1] / rho
    s[1] = x[0] / rho
    s[2:] = (-1.0 / (rho + 1.0)) * zx
    return x, s


def prox_psd_pair(lam, A):
    A = np.asarray(A, dtype=float)
    w, V = np.linalg.eigh(0.5 * (A + A.T))
    e, se = _psd_eig_pair(lam, w)
    return (V * e) @ V.T, (V * se) @ V.T


def prox_cone_block_pair(cone: Cone, lam, zeta):
    """(prox(zeta), -lam*grad F(prox(zeta))) for one cone block."""
    if cone.kind == NONNEG:
        return prox_nonneg_pair(lam, zeta)
    if cone.kind == SOC:
        return prox_soc_pair(lam, zeta)
    if cone.kind == RSOC:
        return prox_rsoc_pair(lam, zeta)
    X, S = prox_psd_pair(lam, smat(zeta, cone.size))
    return svec(X), svec(S)


# ---------------------------------------------------------------------------
# barrier value / gradient / interiority (used by tests and diagnostics)
# ---------------------------------------------------------------------------

def barrier_value(cone: Cone, x):
    x = np.asarray(x, dtype=float)
    if cone.kind == NONNEG:
        return -float(np.sum(np.log(x)))
    if cone.kind == SOC:
        return -log(x[0] * x[0] - float(x[1:] @ x[1:]))
    if cone.kind == RSOC:
        return -log(x[0] * x[1] - 0.5 * float(x[2:] @ x[2:]))
    sign, logdet = np.linalg.slogdet(smat(x, cone.size))
    if sign <= 0:
        return np.inf
    return -logdet


def barrier_gradient(cone: Cone, x):
    x = np.asarray(x, dtype=float)
    if cone.kind == NONNEG:
        return -1.0 / x
    if cone.kind == SOC:
        delta = x[0] * x[0] - float(x[1:] @ x[1:])
        g = np.empty_like(x)
        g[0] = -2.0 * x[0] / delta
        g[1:] = 2.0 * x[1:] / delta
        return g
    if cone.kind == RSOC:
        delta = x[0] * x[1] - 0.5 * float(x[2:] @ x[2:])
        g = np.empty_like(x)
        g[0] = -x[1] / delta
        g[1] = -x[0] / delta
        g[2:] = x[2:] / delta
        return g
    X = smat(x, cone.size)
    return svec(-np.linalg.inv(X))


def interior_margin(cone: Cone, x):
    """Positive iff x is strictly interior to the cone."""
    x = np.asarray(x, dtype=float)
    if cone.kind == NONNEG:
        return float(np.min(x))
    if cone.kind == SOC:
        return min(float(x[0]), x[0] * x[0] - float(x[1:] @ x[1:]))
    if cone.kind == RSOC:
        delta = x[0] * x[1] - 0.5 * float(x[2:] @ x[2:])
        return min(float(x[0]), float(x[1]), delta)
    return float(np.min(np.linalg.eigvalsh(smat(x, cone.size))))


def interior_point(cone: Cone):
    """The canonical strictly interior start for a block."""
    if cone.kind == NONNEG:
        return np.ones(cone.size)
    if cone.kind == SOC:
        x = np.zeros(cone.size)
        x[0] = 1.0
        return x
    if cone.kind == RSOC:
        x = np.zeros(cone.size)
        x[0] = x[1] = 1.0
        return x
    return svec(np.eye(cone.size))


# ---------------------------------------------------------------------------
# damped-Newton oracle (test-only reference for the closed forms)
# ---------------------------------------------------------------------------

@dataclass
class ProxQuery:
    cone: Cone
    lam: float
    zeta: np.ndarray


def _barrier_hessian(cone: Cone, x):
    if cone.kind == NONNEG:
        return np.diag(1.0 / (x * x))
    if cone.kind == SOC:
        delta = x[0] * x[0] - float(x[1:] @ x[1:])
        grad_delta = np.concatenate([[2.0 * x[0]], -2.0 * x[1:]])
        H = np.outer(grad_delta, grad_delta) / (delta * delta)
        H[0, 0] -= 2.0 / delta
        H[np.arange(1, x.size), np.arange(1, x.size)] += 2.0 / delta
        return H
    if cone.kind == RSOC:
        delta = x[0] * x[1] - 0.5 * float(x[2:] @ x[2:])
        grad_delta = np.concatenate([[x[1], x[0]], -x[2:]])
        H = np.outer(grad_delta, grad_delta) / (delta * delta)
        H[0, 1] -= 1.0 / delta
        H[1, 0] -= 1.0 / delta
        H[np.arange(2, x.size), np.arange(2, x.size)] += 1.0 / delta
        return H
    raise ValueError("psd uses an eigenbasis Newton step")


def prox_oracle_newton(query: ProxQuery, tol=None, max_iters=200):
    """Solve the prox subproblem by damped Newton from the canonical start.

    Reference implementation: slow, globally convergent, no closed forms.
    """
    cone, lam = query.cone, float(query.lam)
    zeta = np.asarray(query.zeta, dtype=float)
    if tol is None:
        tol = 1e-12 * max(1.0, np.linalg.norm(zeta))

    if cone.kind == PSD:
        return _prox_oracle_newton_psd(cone, lam, zeta, tol, max_iters)

    if cone.kind == NONNEG:
        x = np.ones(cone.size)
    elif cone.kind == SOC:
        x = np.zeros(cone.size)
        x[0] = 1.0 + np.linalg.norm(zeta[1:])
    else:
        x = np.zeros(cone.size)
        x[0] = x[1] = 1.0 + np.linalg.norm(zeta)

    def objective(pt):
        return lam * barrier_value(cone, pt) + 0.5 * float((pt - zeta) @ (pt - zeta))

    def gradient(pt):
        return lam * barrier_gradient(cone, pt) + pt - zeta

    obj = objective(x)
    for _ in range(max_iters):
        grad = gradient(x)
        gnorm = np.linalg.norm(grad)
        if gnorm <= tol:
            return x
        H = lam * _barrier_hessian(cone, x)
        H[np.diag_indices_from(H)] += 1.0
        step = np.linalg.solve(H, -grad)
        # Newton decrement bounds the euclidean distance to the minimizer
        # (H >= I); near the boundary it keeps converging after roundoff
        # noise floors the raw gradient norm.
        decrement = sqrt(max(float(grad @ -step), 0.0))
        if decrement <= tol:
            cand = x + step
            return cand if interior_margin(cone, cand) > 0 else x
        alpha = 1.0
        for _ in range(60):
            cand = x + alpha * step
            if interior_margin(cone, cand) > 0:
                cand_obj = objective(cand)
                # near the optimum the objective flattens below float
                # resolution; a shrinking gradient is equally acceptable
                if cand_obj < obj or np.linalg.norm(gradient(cand)) < 0.9 * gnorm:
                    x, obj = cand, cand_obj
                    break
            alpha *= 0.5
        else:
            raise RuntimeError("newton line search stalled")
    raise RuntimeError("newton oracle did not converge")


def _prox_oracle_newton_psd(cone, lam, zeta, tol, max_iters):
    A = smat(zeta, cone.size)
    X = np.eye(cone.size) * (1.0 + np.linalg.norm(A))

    def objective(M):
        # det > 0 is NOT enough: an even count of negative eigenvalues
        # also passes, and Newton then rides to a spurious indefinite
        # root of X - lam*inv(X) = A
        w = np.linalg.eigvalsh(M)
        if w[0] <= 0:
            return np.inf
        return -lam * float(np.sum(np.log(w))) + 0.5 * np.sum((M - A) ** 2)

    def gradient(M):
        return -lam * np.linalg.inv(M) + M - A

    obj = objective(X)
    for _ in range(max_iters):
        grad = gradient(X)
        gnorm = np.linalg.norm(grad)
        if gnorm <= tol:
            return svec(X)
        # Newton step in the eigenbasis of X: the Hessian acts as
        # D + lam * Xinv (.) Xinv, diagonalized by X's eigenvectors.
        w, V = np.linalg.eigh(X)
        G = V.T @ grad @ V
        denom = 1.0 + lam / np.outer(w, w)
        step = V @ (-G / denom) @ V.T
        step = 0.5 * (step + step.T)
        decrement = sqrt(max(-float(np.sum(grad * step)), 0.0))
        if decrement <= tol:
            cand = X + step
            if np.all(np.linalg.eigvalsh(cand) > 0):
                return svec(cand)
            return svec(X)
        alpha = 1.0
        for _ in range(60):
            cand = X + alpha * step
            cand_obj = objective(cand)
            if np.isfinite(cand_obj) and (
                    cand_obj < obj
                    or np.linalg.norm(gradient(cand)) < 0.9 * gnorm):
                X, obj = cand, cand_obj
                break
            alpha *= 0.5
        else:
            raise RuntimeError("newton line search stalled")
    raise RuntimeError("newton oracle did not converge")
