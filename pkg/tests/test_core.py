"""Problem container, residual arithmetic, terminal-status classification."""
import numpy as np
import pytest
import scipy.sparse as sp

from coneip.core import (
    NONNEG, SOC, RSOC, PSD,
    Cone, ConicProblem, InfNorm, Residuals, Status, TwoNorm,
    classify_terminal_state, compute_residuals,
)


def one_var_lp():
    return ConicProblem(sp.csc_matrix(np.array([[1.0]])),
                        np.array([1.0]), np.array([1.0]),
                        [Cone(NONNEG, 1)])


# -- Cone -------------------------------------------------------------------

def test_cone_kind_validation():
    with pytest.raises(ValueError):
        Cone("orthant", 3)
    with pytest.raises(ValueError):
        Cone(NONNEG, 0)
    with pytest.raises(ValueError):
        Cone(SOC, 1)          # needs a head plus at least one tail entry
    with pytest.raises(ValueError):
        Cone(RSOC, 2)         # needs two heads plus at least one tail entry
    Cone(SOC, 2)
    Cone(RSOC, 3)
    Cone(PSD, 1)


def test_cone_veclen():
    assert Cone(NONNEG, 7).veclen == 7
    assert Cone(SOC, 4).veclen == 4
    assert Cone(RSOC, 5).veclen == 5
    # psd size is the matrix order; storage is the packed lower triangle
    assert Cone(PSD, 1).veclen == 1
    assert Cone(PSD, 4).veclen == 10


def test_cone_barrier_degree():
    assert Cone(NONNEG, 7).barrier_degree == 7
    assert Cone(PSD, 5).barrier_degree == 5
    assert Cone(SOC, 9).barrier_degree == 1
    assert Cone(RSOC, 9).barrier_degree == 1


def test_status_values():
    assert Status.OPTIMAL.value == "optimal"
    assert Status.PRIMAL_INFEASIBLE.value == "primal_infeasible"
    assert Status.DUAL_INFEASIBLE.value == "dual_infeasible"
    assert Status.ITERATION_LIMIT.value == "iteration_limit"
    assert Status.TIME_LIMIT.value == "time_limit"
    assert Status.NUMERICAL_FAILURE.value == "numerical_failure"


# -- ConicProblem -----------------------------------------------------------

def test_problem_canonicalizes_to_csc_and_cleans():
    A = sp.coo_matrix((np.array([1.0, 2.0, 0.0, 3.0]),
                       (np.array([0, 0, 1, 0]), np.array([0, 0, 1, 1]))),
                      shape=(2, 2))
    p = ConicProblem(A, np.zeros(2), np.zeros(2), [Cone(NONNEG, 2)])
    assert sp.issparse(p.A) and p.A.format == "csc"
    # duplicates summed, explicit zeros dropped
    assert p.A[0, 0] == 3.0
    assert p.A.nnz == 2
    assert p.m == 2 and p.n == 2 and p.nnz == 2


def test_problem_shape_and_finiteness_validation():
    A = sp.csc_matrix(np.ones((2, 3)))
    cones = [Cone(NONNEG, 3)]
    with pytest.raises(ValueError):
        ConicProblem(A, np.zeros(3), np.zeros(3), cones)      # b wrong length
    with pytest.raises(ValueError):
        ConicProblem(A, np.zeros(2), np.zeros(2), cones)      # c wrong length
    with pytest.raises(ValueError):
        ConicProblem(A, np.array([np.nan, 0.0]), np.zeros(3), cones)
    with pytest.raises(ValueError):
        ConicProblem(A, np.zeros(2), np.zeros(3), [Cone(NONNEG, 2)])  # cover


def test_problem_cone_bookkeeping():
    A = sp.csc_matrix(np.ones((1, 9)))
    cones = [Cone(NONNEG, 2), Cone(SOC, 3), Cone(RSOC, 4)]
    p = ConicProblem(A, np.ones(1), np.zeros(9), cones)
    assert not p.is_orthant_only()
    assert p.barrier_degree_total() == 2 + 1 + 1
    q = ConicProblem(A, np.ones(1), np.zeros(9), [Cone(NONNEG, 9)])
    assert q.is_orthant_only()
    assert q.barrier_degree_total() == 9


# -- residuals --------------------------------------------------------------

def test_residuals_hand_example_two_norm():
    # A=[1], b=c=[1] evaluated at x=2, y=0, s=0, tau=1:
    #   pres = |2-1|/(1+1) = 1/2, dres = |0+0-1|/(1+1) = 1/2,
    #   dgap = |2-0|/(1+2+0) = 2/3
    r = compute_residuals(one_var_lp(), [2.0], [0.0], [0.0], 1.0)
    assert r.pres == pytest.approx(0.5, abs=1e-15)
    assert r.dres == pytest.approx(0.5, abs=1e-15)
    assert r.dgap == pytest.approx(2.0 / 3.0, abs=1e-15)
    assert r.norm_mode == "two"


def test_residuals_tau_divides_through():
    # the same ray scaled by tau=2 gives identical residuals
    r1 = compute_residuals(one_var_lp(), [2.0], [0.0], [0.0], 1.0)
    r2 = compute_residuals(one_var_lp(), [4.0], [0.0], [0.0], 2.0)
    assert r2.pres == pytest.approx(r1.pres, rel=1e-15)
    assert r2.dres == pytest.approx(r1.dres, rel=1e-15)
    assert r2.dgap == pytest.approx(r1.dgap, rel=1e-15)


def test_residuals_inf_norm_normalizers():
    # inf mode normalizes pres by 1+max(|Ax|_inf, |b|_inf) and dgap by
    # 1+max(|p|,|d|)
    r = compute_residuals(one_var_lp(), [2.0], [0.0], [0.0], 1.0,
                          norm_mode="inf")
    assert r.pres == pytest.approx(1.0 / 3.0, abs=1e-15)
    assert r.dres == pytest.approx(0.5, abs=1e-15)
    assert r.dgap == pytest.approx(2.0 / 3.0, abs=1e-15)
    assert r.norm_mode == "inf"


def test_residuals_norm_mode_classes_and_errors():
    p = one_var_lp()
    a = compute_residuals(p, [2.0], [0.0], [0.0], 1.0, norm_mode=TwoNorm)
    assert a.norm_mode == "two"
    b = compute_residuals(p, [2.0], [0.0], [0.0], 1.0, norm_mode=InfNorm)
    assert b.norm_mode == "inf"
    with pytest.raises(ValueError):
        compute_residuals(p, [2.0], [0.0], [0.0], 1.0, norm_mode="one")


def test_residuals_reject_nonpositive_tau():
    for tau in (0.0, -1.0):
        with pytest.raises(ValueError):
            compute_residuals(one_var_lp(), [1.0], [0.0], [0.0], tau)


def test_residuals_max_skip_dual():
    r = Residuals(pres=0.1, dres=0.9, dgap=0.2)
    assert r.max() == 0.9
    assert r.max(skip_dual=True) == 0.2


# -- terminal classification -------------------------------------------------

def _uv(y, x, tau, theta=0.0, r=None, s=None, kappa=1.0, xi=0.0):
    y = np.atleast_1d(np.asarray(y, float))
    x = np.atleast_1d(np.asarray(x, float))
    r = np.zeros_like(y) if r is None else np.atleast_1d(np.asarray(r, float))
    s = np.zeros_like(x) if s is None else np.atleast_1d(np.asarray(s, float))
    return (y, x, tau, theta), (r, s, kappa, xi)


def test_classify_optimal_on_exact_solution():
    p = one_var_lp()
    u, v = _uv(y=[1.0], x=[1.0], tau=1.0, s=[0.0], kappa=0.0)
    # kappa=0 < tau here, and classification needs tau > tol*kappa
    assert classify_terminal_state(p, u, v, tol=1e-9) is Status.OPTIMAL


def test_classify_residuals_too_large():
    p = one_var_lp()
    u, v = _uv(y=[0.0], x=[2.0], tau=1.0, kappa=0.0)
    assert (classify_terminal_state(p, u, v, tol=1e-9)
            is Status.NUMERICAL_FAILURE)


def test_classify_dual_infeasible_ray():
    # tau ~ 0, kappa > 0, c'x < 0: improving primal ray
    p = ConicProblem(sp.csc_matrix(np.array([[0.0]])), np.array([0.0]),
                     np.array([-1.0]), [Cone(NONNEG, 1)])
    u, v = _uv(y=[0.0], x=[1.0], tau=1e-12, kappa=1.0)
    assert classify_terminal_state(p, u, v, tol=1e-9) is Status.DUAL_INFEASIBLE


def test_classify_primal_infeasible_ray():
    # tau ~ 0, kappa > 0, b'y > 0 with c'x = 0: Farkas dual ray
    p = ConicProblem(sp.csc_matrix(np.array([[1.0]])), np.array([-1.0]),
                     np.array([0.0]), [Cone(NONNEG, 1)])
    u, v = _uv(y=[-1.0], x=[0.0], tau=1e-12, kappa=1.0)
    assert (classify_terminal_state(p, u, v, tol=1e-9)
            is Status.PRIMAL_INFEASIBLE)


def test_classify_tiny_tau_without_certificate():
    p = one_var_lp()
    u, v = _uv(y=[0.0], x=[0.0], tau=1e-12, kappa=1.0)
    assert (classify_terminal_state(p, u, v, tol=1e-9)
            is Status.NUMERICAL_FAILURE)


def test_classify_ambiguous_tau_kappa_scale():
    # tau above the hard ray cutoff but below tol*kappa: never optimal
    p = one_var_lp()
    u, v = _uv(y=[1.0], x=[1.0], tau=1e-6, kappa=1.0, s=[0.0])
    assert (classify_terminal_state(p, u, v, tol=1e-4)
            is Status.NUMERICAL_FAILURE)


def test_classify_skip_dual_check_ignores_dres():
    # x=b feasible with a null objective: pres=dgap=0 but dres huge
    p = ConicProblem(sp.csc_matrix(np.array([[1.0]])), np.array([1.0]),
                     np.array([0.0]), [Cone(NONNEG, 1)])
    u, v = _uv(y=[0.0], x=[1.0], tau=1.0, s=[3.0], kappa=0.0)
    assert (classify_terminal_state(p, u, v, tol=1e-9)
            is Status.NUMERICAL_FAILURE)
    assert (classify_terminal_state(p, u, v, tol=1e-9, skip_dual_check=True)
            is Status.OPTIMAL)
