"""Closed-form barrier proximal maps, their multiplier pairs, and the
supporting svec/barrier helpers."""
import numpy as np
import pytest

from coneip.core import NONNEG, SOC, RSOC, PSD, Cone
from coneip.cones import (
    ProxQuery, barrier_gradient, barrier_value, interior_margin,
    interior_point, prox_cone_block, prox_cone_block_pair, prox_nonneg,
    prox_nonneg_pair, prox_oracle_newton, prox_psd_matrix, prox_psd_pair,
    prox_rsoc, prox_rsoc_pair, prox_soc, prox_soc_pair, smat, svec, svec_len,
)

SQ13 = np.sqrt(13.0)
SQ17 = np.sqrt(17.0)
SQ2 = np.sqrt(2.0)
SQ5 = np.sqrt(5.0)


# -- svec / smat --------------------------------------------------------------

def test_svec_packing_order_and_scale():
    M = np.array([[1.0, 4.0, 5.0],
                  [4.0, 2.0, 6.0],
                  [5.0, 6.0, 3.0]])
    v = svec(M)
    # lower triangle in column order, off-diagonals scaled by sqrt(2)
    want = np.array([1.0, 4 * SQ2, 5 * SQ2, 2.0, 6 * SQ2, 3.0])
    assert np.allclose(v, want, atol=1e-15)
    assert svec_len(3) == 6


def test_svec_smat_roundtrip_and_isometry():
    rng = np.random.default_rng(0)
    for order in (1, 2, 3, 7):
        B = rng.standard_normal((order, order))
        A = 0.5 * (B + B.T)
        C = rng.standard_normal((order, order))
        C = 0.5 * (C + C.T)
        assert np.allclose(smat(svec(A)), A, atol=1e-14)
        # svec is an isometry for the Frobenius inner product
        assert float(svec(A) @ svec(C)) == pytest.approx(
            float(np.sum(A * C)), rel=1e-13, abs=1e-13)


def test_smat_rejects_non_triangular_length():
    with pytest.raises(ValueError):
        smat(np.zeros(5))


# -- frozen scalar cases -------------------------------------------------------

def test_prox_nonneg_hand_value():
    # x^2 - 3x - 1 = 0  ->  x = (3 + sqrt(13))/2
    x = prox_nonneg(1.0, np.array([3.0]))
    assert x[0] == pytest.approx((3.0 + SQ13) / 2.0, rel=1e-15)


def test_prox_soc_hand_value():
    # zero tail: reduces to t^2 - 3t - 2 = 0  ->  t = (3 + sqrt(17))/2
    x = prox_soc(1.0, np.array([3.0, 0.0]))
    assert x[0] == pytest.approx((3.0 + SQ17) / 2.0, rel=1e-14)
    assert x[1] == 0.0


def test_prox_rsoc_hand_value():
    # zeta_eta + zeta_nu = 0 decouples: eta = 1 + sqrt(2), nu = sqrt(2) - 1
    x = prox_rsoc(1.0, np.array([2.0, -2.0, 0.0]))
    assert x[0] == pytest.approx(1.0 + SQ2, rel=1e-14)
    assert x[1] == pytest.approx(SQ2 - 1.0, rel=1e-14)
    assert x[2] == 0.0


def test_prox_psd_hand_value():
    # diagonal input: eigenvalues map independently
    X = prox_psd_matrix(1.0, np.diag([3.0, -1.0]))
    assert np.allclose(np.diag(X),
                       [(3.0 + SQ13) / 2.0, (SQ5 - 1.0) / 2.0], rtol=1e-14)
    assert abs(X[0, 1]) <= 1e-15


def test_prox_nonneg_negative_zeta_no_cancellation():
    # for zeta << -sqrt(lam) the naive root collapses; conjugate form keeps
    # full relative accuracy: x*(x - zeta) = lam exactly
    lam = 1e-6
    x = prox_nonneg(lam, np.array([-1e6]))
    assert x[0] > 0
    assert float(x[0] * (x[0] + 1e6)) == pytest.approx(lam, rel=1e-12)


# -- seeded query generators ---------------------------------------------------

def random_queries(kind, count, seed, scale_decades=0.0):
    """lam in [1e-6, 10]; zeta standard normal (optionally scale-swept).

    The stationarity check recomputes grad F from the prox output, which
    forms the quadratic barrier argument by subtraction; at |zeta| >> 1
    with lam ~ 1e-6 that reference loses digits (error ~ eps|zeta|^2/lam),
    so tight-tolerance tests use unit-scale queries and the wide sweep
    only asserts interiority.
    """
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        lam = float(10.0 ** rng.uniform(-6, 1))
        size = {NONNEG: rng.integers(1, 9),
                SOC: rng.integers(2, 9),
                RSOC: rng.integers(3, 9),
                PSD: rng.integers(1, 7)}[kind]
        cone = Cone(kind, int(size))
        scale = float(10.0 ** rng.uniform(-scale_decades, scale_decades))
        zeta = scale * rng.standard_normal(cone.veclen)
        out.append(ProxQuery(cone, lam, zeta))
    return out


def stationarity_residual(q, x):
    r = q.lam * barrier_gradient(q.cone, x) + x - q.zeta
    return np.linalg.norm(r) / (1.0 + np.linalg.norm(q.zeta))


@pytest.mark.parametrize("kind", [NONNEG, SOC, RSOC, PSD])
def test_prox_interior_and_stationary(kind):
    for q in random_queries(kind, 60, seed=hash(kind) % 1000):
        x = prox_cone_block(q.cone, q.lam, q.zeta)
        assert interior_margin(q.cone, x) > 0.0
        assert stationarity_residual(q, x) <= 1e-9


@pytest.mark.parametrize("kind", [NONNEG, SOC, RSOC, PSD])
def test_prox_interior_across_scales(kind):
    # four decades of zeta magnitude either way: interiority must never break
    for q in random_queries(kind, 60, seed=3 + hash(kind) % 1000,
                            scale_decades=2.0):
        x = prox_cone_block(q.cone, q.lam, q.zeta)
        assert interior_margin(q.cone, x) > 0.0


@pytest.mark.parametrize("kind", [NONNEG, SOC, RSOC, PSD])
def test_pair_consistency(kind):
    # x - s = zeta and s = -lam*grad F(x); both strictly interior
    for q in random_queries(kind, 40, seed=7 + hash(kind) % 1000):
        x, s = prox_cone_block_pair(q.cone, q.lam, q.zeta)
        xr = prox_cone_block(q.cone, q.lam, q.zeta)
        assert np.allclose(x, xr, rtol=1e-13, atol=1e-300)
        nz = 1.0 + np.linalg.norm(q.zeta)
        assert np.linalg.norm(x - s - q.zeta) <= 1e-12 * nz
        want_s = -q.lam * barrier_gradient(q.cone, x)
        assert np.linalg.norm(s - want_s) <= 1e-9 * (1.0 + np.linalg.norm(s))
        assert interior_margin(q.cone, s) > 0.0


def test_pair_multiplier_accuracy_at_tiny_lam():
    # s = x - zeta computed naively loses every digit when lam ~ 1e-12 and
    # |zeta| ~ 1; the pair form must keep s's own relative accuracy
    lam = 1e-12
    zeta = np.array([5.0, 3.0, -1.0])
    x, s = prox_soc_pair(lam, zeta)
    want = -lam * barrier_gradient(Cone(SOC, 3), x)
    assert np.linalg.norm(s - want) <= 1e-9 * np.linalg.norm(want)
    x, s = prox_nonneg_pair(lam, np.array([2.0]))
    assert s[0] == pytest.approx(lam / x[0], rel=1e-15)


def test_psd_pair_complementarity_exact():
    rng = np.random.default_rng(3)
    B = rng.standard_normal((5, 5))
    A = 0.5 * (B + B.T) * 3.0
    nA = np.linalg.norm(A)
    for lam in (1e-18, 1e-9, 1e-3, 1.0, 10.0):
        X, S = prox_psd_pair(lam, A)
        # e*se = lam per eigenvalue is exact; the residual left over is the
        # eigenbasis roundoff, on the scale of eps*||X||*||S||
        assert np.linalg.norm(X @ S - lam * np.eye(5)) <= max(
            1e-12 * lam, 1e-13 * (1.0 + nA) ** 2)
        assert np.linalg.norm(X - S - A) <= 1e-13 * (1.0 + nA)
        assert np.linalg.eigvalsh(X)[0] > 0
        # S's eigenvalue map lam/big is exactly positive, but reassembling
        # (V*se)V' adds eps*||S|| noise, which at lam=1e-18 dwarfs the
        # 1e-19-scale eigenvalues; certify positivity up to assembly noise
        assert np.linalg.eigvalsh(S)[0] > (
            lam / (2.0 * (nA + np.sqrt(lam) + 1.0)) - 5e-14 * (1.0 + nA))


def test_psd_pair_stable_for_deep_negative_eigenvalues():
    # naive root 0.5*(d + sqrt(d^2 + 4 lam)) rounds to 0 here and the
    # multiplier map divides by zero
    A = np.diag([-1e3, -1.0, 2.0, 1e6])
    with np.errstate(all="raise"):
        X, S = prox_psd_pair(1e-18, A)
    assert np.all(np.diag(X) > 0) and np.all(np.diag(S) > 0)
    assert np.allclose(np.diag(X) * np.diag(S), 1e-18, rtol=1e-12)


# -- threshold branches (D-form stability) --------------------------------------

def test_soc_zero_head_branch_continuity():
    zx = np.array([2.0, -1.0])
    lam = 0.37
    base = prox_soc(lam, np.concatenate([[0.0], zx]))
    for eps in (1e-20, 1e-16, 1e-13):
        near = prox_soc(lam, np.concatenate([[eps], zx]))
        assert np.linalg.norm(near - base) <= 1e-10
    # exact zero head: t^2 = 2 lam + |zx|^2/4, tail halves
    assert base[0] == pytest.approx(np.sqrt(2 * lam + 0.25 * float(zx @ zx)),
                                    rel=1e-15)
    assert np.allclose(base[1:], 0.5 * zx, rtol=1e-15)


def test_rsoc_zero_sum_branch_continuity():
    zx = np.array([1.5])
    lam = 0.8
    base = prox_rsoc(lam, np.array([3.0, -3.0, *zx]))
    for eps in (1e-20, 1e-16, 1e-13):
        near = prox_rsoc(lam, np.array([3.0, -3.0 + eps, *zx]))
        assert np.linalg.norm(near - base) <= 1e-10


def test_soc_negative_head_root_selection():
    # zt < 0 must take the smaller rho-root so that t > 0 still holds
    for zt in (-0.3, -5.0, -1e4):
        q = ProxQuery(Cone(SOC, 3), 0.9, np.array([zt, 1.0, 2.0]))
        x = prox_soc(q.lam, q.zeta)
        assert interior_margin(q.cone, x) > 0
        assert stationarity_residual(q, x) <= 1e-9


def test_rsoc_negative_sum_root_selection():
    for shift in (-0.2, -4.0, -1e3):
        q = ProxQuery(Cone(RSOC, 4), 0.5,
                      np.array([shift, shift, 0.7, -0.4]))
        x = prox_rsoc(q.lam, q.zeta)
        assert interior_margin(q.cone, x) > 0
        assert stationarity_residual(q, x) <= 1e-9


# -- barrier helpers -------------------------------------------------------------

@pytest.mark.parametrize("kind", [NONNEG, SOC, RSOC, PSD])
def test_barrier_gradient_matches_finite_difference(kind):
    rng = np.random.default_rng(1 + hash(kind) % 100)
    size = {NONNEG: 4, SOC: 4, RSOC: 4, PSD: 3}[kind]
    cone = Cone(kind, size)
    x = interior_point(cone) * 2.0 + 0.05 * rng.standard_normal(cone.veclen)
    assert interior_margin(cone, x) > 0
    g = barrier_gradient(cone, x)
    h = 1e-6
    for i in range(cone.veclen):
        e = np.zeros(cone.veclen)
        e[i] = h
        fd = (barrier_value(cone, x + e) - barrier_value(cone, x - e)) / (2 * h)
        assert g[i] == pytest.approx(fd, rel=2e-5, abs=2e-6)


def test_barrier_value_outside_cone():
    assert barrier_value(Cone(PSD, 2), svec(np.diag([1.0, -1.0]))) == np.inf


@pytest.mark.parametrize("kind", [NONNEG, SOC, RSOC, PSD])
def test_interior_point_is_interior(kind):
    cone = Cone(kind, {NONNEG: 5, SOC: 5, RSOC: 5, PSD: 4}[kind])
    x0 = interior_point(cone)
    assert x0.shape == (cone.veclen,)
    assert interior_margin(cone, x0) > 0


def test_interior_margin_signs():
    assert interior_margin(Cone(NONNEG, 2), np.array([1.0, -0.5])) < 0
    assert interior_margin(Cone(SOC, 2), np.array([1.0, 2.0])) < 0
    assert interior_margin(Cone(SOC, 2), np.array([2.0, 1.0])) > 0
    assert interior_margin(Cone(RSOC, 3), np.array([1.0, 1.0, 2.0])) < 0
    assert interior_margin(Cone(PSD, 2), svec(np.diag([1.0, -2.0]))) < 0


# -- Newton oracle agreement ------------------------------------------------------

@pytest.mark.parametrize("kind", [NONNEG, SOC, RSOC, PSD])
def test_closed_form_matches_newton_oracle(kind):
    for q in random_queries(kind, 12, seed=42 + hash(kind) % 1000):
        x = prox_cone_block(q.cone, q.lam, q.zeta)
        ref = prox_oracle_newton(q)
        assert np.linalg.norm(x - ref, np.inf) <= 1e-8 * (
            1.0 + np.linalg.norm(ref, np.inf))
