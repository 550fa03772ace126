"""Linear algebra kernels for the embedded ADMM subproblem.

Every inner iteration solves one system with the fixed matrix

    I + Q,   Q = [[ 0,    A,  -b,  rp],
                  [-A',   0,   c,  rd],
                  [ b',  -c',  0,  rg],
                  [-rp', -rd', -rg, 0]]   (skew-symmetric),

which reduces by block elimination to a single solve with the SPD matrix
I + A A' plus a precomputed 2x2 Schur complement for the last two
(tau/theta) coordinates.  The I + A A' solve is either a cached Cholesky
factorization (direct mode) or Jacobi-preconditioned CG (indirect mode).
"""
from __future__ import annotations

import re

import numpy as np
import scipy.sparse as sp
import scipy.linalg as sla
import scipy.sparse.linalg as spla

# Counts factorizations, so tests can pin the factor-once-per-solve invariant.
FACTOR_COUNT = 0

# Below this m, normal equations are formed dense and Cholesky-factored;
# above, a sparse LU of the (SPD) matrix stands in.
DENSE_LIMIT = 4096

# Keep a dense copy of A for matvecs when it's this small (hot-loop speed).
_DENSE_MATVEC_CELLS = 250_000


class NumericalFailureError(RuntimeError):
    """Raised when a factorization or iterative solve breaks down."""

    def __init__(self, message, pivot_index=None, residual=None):
        super().__init__(message)
        self.pivot_index = pivot_index
        self.residual = residual


def cg_solve(apply_fn, rhs, tol=1e-9, max_iters=None, precond_diag=None):
    """Preconditioned conjugate gradients for an SPD operator.

    Stops when ||rhs - A x|| <= tol * ||rhs||.  Raises NumericalFailureError
    (carrying the final residual) if the iteration cap is reached first.
    """
    rhs = np.asarray(rhs, dtype=float)
    nrhs = np.linalg.norm(rhs)
    if nrhs == 0.0:
        return np.zeros_like(rhs)
    if max_iters is None:
        max_iters = 10 * rhs.size
    if precond_diag is not None:
        dinv = 1.0 / precond_diag
    x = np.zeros_like(rhs)
    r = rhs.copy()
    z = r * dinv if precond_diag is not None else r.copy()
    p = z.copy()
    rz = float(r @ z)
    target = tol * nrhs
    for _ in range(max_iters):
        ap = apply_fn(p)
        alpha = rz / float(p @ ap)
        x += alpha * p
        r -= alpha * ap
        if np.linalg.norm(r) <= target:
            return x
        z = r * dinv if precond_diag is not None else r
        rz_new = float(r @ z)
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise NumericalFailureError(
        f"cg failed to reach tol {tol:g} in {max_iters} iterations",
        residual=float(np.linalg.norm(r) / nrhs))


def spectral_decompose_symmetric(A):
    """Eigendecomposition of a symmetric matrix: returns (Q, d) with
    A = Q' diag(d) Q and orthonormal rows of Q."""
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("need a square matrix")
    if A.shape[0] > 1 and np.max(np.abs(A - A.T)) > 1e-12:
        raise ValueError("matrix is not symmetric to 1e-12")
    w, vecs = np.linalg.eigh(0.5 * (A + A.T))
    return vecs.T, w


class ReducedSystemFactor:
    """Cached factorization data for repeated (I + Q) z = w solves."""

    def __init__(self, A, b, c, rp, rd, rg, mode="direct"):
        self.mode = mode
        self.A = sp.csc_matrix(A)
        m, n = self.A.shape
        self.m, self.n = m, n
        self.b = np.asarray(b, dtype=float)
        self.c = np.asarray(c, dtype=float)
        self.rp = np.asarray(rp, dtype=float)
        self.rd = np.asarray(rd, dtype=float)
        self.rg = float(rg)
        self._Ad = self.A.toarray() if m * n <= _DENSE_MATVEC_CELLS else None
        self.normal_solves = 0

        if mode == "direct":
            self._build_direct()
        elif mode == "indirect":
            self._build_indirect()
        else:
            raise ValueError(f"unknown linear-system mode {mode!r}")

        # Border columns of I + Q for the (tau, theta) coordinates and the
        # 2x2 Schur complement of the leading (y, x) block.
        h = np.concatenate([-self.b, self.c])
        g = np.concatenate([self.rp, self.rd])
        self._H = np.column_stack([h, g])
        self._MiH = np.column_stack([
            self._solve_leading(self._H[:, 0], tol=1e-12),
            self._solve_leading(self._H[:, 1], tol=1e-12),
        ])
        S = np.array([[1.0, self.rg], [-self.rg, 1.0]])
        S += self._H.T @ self._MiH
        det = S[0, 0] * S[1, 1] - S[0, 1] * S[1, 0]
        if abs(det) <= 1e-14:
            raise NumericalFailureError(
                f"border Schur complement is singular (det={det:g})")
        self._Sinv = np.array([[S[1, 1], -S[0, 1]],
                               [-S[1, 0], S[0, 0]]]) / det

    # -- matvecs ---------------------------------------------------------
    def Amv(self, x):
        return self._Ad @ x if self._Ad is not None else self.A @ x

    def ATmv(self, y):
        return self._Ad.T @ y if self._Ad is not None else self.A.T @ y

    # -- I + A A' --------------------------------------------------------
    def _build_direct(self):
        global FACTOR_COUNT
        m = self.m
        if m <= DENSE_LIMIT:
            K = (self.A @ self.A.T).toarray()
            K[np.diag_indices(m)] += 1.0
            try:
                self._chol = sla.cho_factor(K, lower=True, check_finite=False)
            except np.linalg.LinAlgError as exc:  # pragma: no cover - rare
                match = re.search(r"(\d+)", str(exc))
                idx = int(match.group(1)) - 1 if match else None
                raise NumericalFailureError(
                    f"Cholesky breakdown: {exc}", pivot_index=idx) from exc
            self._splu = None
        else:
            K = (self.A @ self.A.T).tocsc()
            K = K + sp.identity(m, format="csc")
            try:
                self._splu = spla.splu(K, permc_spec="MMD_AT_PLUS_A")
            except RuntimeError as exc:
                raise NumericalFailureError(
                    f"sparse factorization breakdown: {exc}",
                    pivot_index=None) from exc
            self._chol = None
        FACTOR_COUNT += 1

    def _build_indirect(self):
        global FACTOR_COUNT
        sq = self.A.multiply(self.A)
        self._jacobi = 1.0 + np.asarray(sq.sum(axis=1)).ravel()
        self._chol = None
        self._splu = None
        FACTOR_COUNT += 1

    def solve_normal(self, w, tol=1e-9):
        """Solve (I + A A') y = w."""
        self.normal_solves += 1
        if self.mode == "direct":
            if self._chol is not None:
                return sla.cho_solve(self._chol, w, check_finite=False)
            return self._splu.solve(w)
        apply_fn = lambda v: v + self.Amv(self.ATmv(v))
        return cg_solve(apply_fn, w, tol=tol, max_iters=10 * self.m,
                        precond_diag=self._jacobi)

    def _solve_leading(self, w, tol=1e-9):
        """Solve [[I, A], [-A', I]] z = w via the normal equations."""
        f, g = w[:self.m], w[self.m:]
        y = self.solve_normal(f - self.Amv(g), tol=tol)
        x = g + self.ATmv(y)
        return np.concatenate([y, x])

    # -- full bordered system -------------------------------------------
    def solve(self, w, cg_tol=None):
        """Solve (I + Q) z = w for the full (m + n + 2)-vector w."""
        tol = 1e-9 if cg_tol is None else cg_tol
        mn = self.m + self.n
        w_lead, w_tail = w[:mn], w[mn:]
        t1 = self._solve_leading(w_lead, tol=tol)
        z_tail = self._Sinv @ (w_tail + self._H.T @ t1)
        z_lead = t1 - self._MiH @ z_tail
        out = np.empty_like(w)
        out[:mn] = z_lead
        out[mn:] = z_tail
        return out

    def apply(self, z):
        """Matrix-free (I + Q) z, for residual checks."""
        m, n = self.m, self.n
        y, x = z[:m], z[m:m + n]
        tau, theta = z[m + n], z[m + n + 1]
        out = np.empty_like(z)
        out[:m] = y + self.Amv(x) - tau * self.b + theta * self.rp
        out[m:m + n] = -self.ATmv(y) + x + tau * self.c + theta * self.rd
        out[m + n] = self.b @ y - self.c @ x + tau + theta * self.rg
        out[m + n + 1] = (-self.rp @ y - self.rd @ x - self.rg * tau + theta)
        return out


def factor_reduced_system(A, b, c, rp, rd, rg, mode="direct"):
    """Factor the reduced ADMM system once; reuse for every inner iteration."""
    return ReducedSystemFactor(A, b, c, rp, rd, rg, mode=mode)


def solve_bordered(factor, w, cg_tol=None):
    """Solve (I + Q) z = w using a prepared ReducedSystemFactor."""
    return factor.solve(np.asarray(w, dtype=float), cg_tol=cg_tol)
