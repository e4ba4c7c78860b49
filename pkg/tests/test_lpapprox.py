import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from numpy.testing import assert_allclose

from privfunnel.geometry import build_context
from privfunnel.instances import erasure, g0_example, matrix1, matrix2
from privfunnel.lpapprox import solve_g0, solve_g_l, solve_g_l_pooled, solve_g_wl
from privfunnel.mechanisms import DomainError, Mechanism, decompose_utility
from privfunnel.oracle import slack
from privfunnel.probcore import JointDist, binary_entropy, entropy_suite

from conftest import find_fixture, joints

TINY = JointDist.from_backward([0.25, 0.25, 0.5], [[0.2, 0.8, 0.5], [0.8, 0.2, 0.5]])


@pytest.mark.parametrize("theta", [0.1, 0.3])
def test_g0_erasure_is_binary_entropy(theta):
    r = solve_g0(erasure(theta), "bits")
    assert_allclose(r.utility_lb, binary_entropy(theta, "bits"), atol=1e-9)
    assert r.error_bound.regime == "exact"


def test_g0_invertible_leakage_matrix_is_zero():
    j = JointDist([[0.3, 0.1], [0.15, 0.45]])
    r = solve_g0(j)
    assert r.flags["invertible"]
    assert_allclose(r.utility_lb, 0.0, atol=1e-12)


def test_g0_reference_example():
    r = solve_g0(g0_example(), "bits")
    assert_allclose(r.utility_lb, 0.915258, atol=5e-6)


def test_g0_of_tiny_instance():
    assert_allclose(solve_g0(TINY).utility_lb, math.log(2), atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(joints(nx=(2, 2), ny=(3, 4)))
def test_g0_mechanism_is_private_and_consistent(j):
    r = solve_g0(j)
    mech = Mechanism.from_kernel_uy(j, r.mechanism.kernel_u_given_y)
    dec = decompose_utility(mech)
    assert dec.i_xu <= 1e-9
    assert_allclose(r.mechanism.kernel_y_given_u @ r.mechanism.p_u, j.py, atol=1e-9)
    # the exact value of a vertex mixture equals its LP cost
    assert_allclose(r.exact_h_y_given_u, r.lp_value, atol=1e-9)
    assert 0 <= r.utility_lb <= entropy_suite(j).h_y_given_x + 1e-9


@pytest.mark.parametrize("solver, crit", [(solve_g_wl, "wl"), (solve_g_l, "l")])
def test_zero_budget_matches_perfect_privacy(solver, crit):
    j = matrix1()
    assert_allclose(solver(j, 0.0).utility_lb, solve_g0(j).utility_lb, atol=1e-9)


@pytest.mark.parametrize("eps", [0.004, 0.008, 0.012])
def test_unweighted_reconstruction_certified(eps):
    j = matrix1()
    r = solve_g_l(j, eps)
    assert r.leakage.max() <= eps + 1e-12
    assert abs(r.exact_h_y_given_u - r.lp_value) < 0.75
    # the linearization overestimates the conditional entropy
    assert r.exact_h_y_given_u <= r.lp_value + 1e-12
    p_x_u = j.p_x_given_y @ r.mechanism.kernel_y_given_u
    assert np.all(np.abs(p_x_u - j.px[:, None]).sum(axis=0) <= eps + 1e-12)


def test_weighted_reconstruction_certified():
    r = solve_g_wl(matrix2(), 0.03)
    assert r.leakage.max() <= 0.03 + 1e-12
    assert r.utility_lb >= solve_g0(matrix2()).utility_lb - 1e-9


@pytest.mark.parametrize("make", [matrix1, matrix2])
def test_monotone_in_budget(make):
    j = make()
    ctx = build_context(j)
    grid = np.linspace(0, 0.95 * ctx.eps2, 5)
    for solver in (solve_g_l, solve_g_wl):
        vals = [solver(j, e, ctx=ctx).approx_utility for e in grid]
        assert np.all(np.diff(vals) >= -1e-9)


def test_weighted_dominates_unweighted():
    # ||G eta||_1 <= eps * mass is tighter than ||G eta||_1 <= eps since mass <= 1
    j = matrix1()
    assert solve_g_wl(j, 0.01).approx_utility >= solve_g_l(j, 0.01).approx_utility - 1e-9


def test_pooled_bounds_enumeration():
    j = matrix1()
    for eps in (0.0, 0.006, 0.012):
        assert solve_g_l_pooled(j, eps) >= solve_g_l(j, eps).approx_utility - 1e-9


def test_upper_bounds_regimes():
    j = matrix1()
    ctx = build_context(j)
    fine = solve_g_l(j, 0.5 * ctx.fine_boundary)
    assert set(fine.upper_bounds) == {"U1_gl", "U2_gl"}
    assert fine.error_bound.regime == "fine"
    coarse = solve_g_l(j, 0.5 * (ctx.fine_boundary + ctx.coarse_boundary))
    assert set(coarse.upper_bounds) == {"U1_gl"}
    outside = solve_g_l(j, 0.5 * (ctx.coarse_boundary + ctx.eps2))
    assert outside.upper_bounds == {} and outside.error_bound.regime == "none"


def test_rejects_budget_above_threshold():
    j = matrix1()
    with pytest.raises(DomainError, match="eps2"):
        solve_g_l(j, 0.05)
    r = solve_g_l(j, 0.05, force=True)
    assert r.leakage.max() <= 0.05 + 1e-12


def test_heuristic_flag_above_cap():
    j = matrix1()
    full = solve_g_l(j, 0.008)
    greedy = solve_g_l(j, 0.008, cap=1)
    assert greedy.heuristic and not full.heuristic
    assert greedy.approx_utility <= full.approx_utility + 1e-9


def test_parallel_enumeration_is_deterministic():
    j = matrix2()
    a = solve_g_l(j, 0.05)
    b = solve_g_l(j, 0.05, workers=4)
    assert a.combination == b.combination
    assert_allclose(a.lp_value, b.lp_value, atol=1e-12)


def test_bits_and_nats_agree():
    j = matrix1()
    a, b = solve_g_l(j, 0.008, "nats"), solve_g_l(j, 0.008, "bits")
    assert_allclose(b.utility_lb * math.log(2), a.utility_lb, rtol=1e-12)
    assert_allclose(b.upper_bounds["U1_gl"] * math.log(2), a.upper_bounds["U1_gl"], rtol=1e-12)


def test_result_json():
    doc = json.loads(solve_g_l(matrix1(), 0.004).to_json())
    assert doc["regime"] == "fine" and len(doc["p_u"]) == len(doc["J"])


def test_perfect_privacy_agrees_with_oracle(oracle_fixtures):
    rec = find_fixture(oracle_fixtures, "tiny_2x3", "perfect", 0.0)
    tol = slack(3, rec["grid"]["resolution"])
    assert abs(solve_g0(TINY).utility_lb - rec["value"]) <= tol


def test_unweighted_lower_bound_below_oracle(oracle_fixtures):
    rec = find_fixture(oracle_fixtures, "tiny_2x3", "l", 0.05)
    r = solve_g_l(TINY, 0.05)
    assert r.utility_lb <= rec["value"] + slack(3, rec["grid"]["resolution"])
    assert r.utility_lb >= solve_g0(TINY).utility_lb - 1e-9


@pytest.mark.parametrize("crit", ["wl", "l"])
def test_oracle_below_upper_bounds(oracle_fixtures, crit):
    # the grid search only produces feasible kernels, so its value cannot exceed a valid upper bound
    rec = find_fixture(oracle_fixtures, "matrix1", crit, 0.005)
    r = solve_g_l(matrix1(), 0.005)
    assert rec["value"] <= min(r.upper_bounds.values())
    assert rec["value"] <= entropy_suite(matrix1()).h_y_given_x + 1e-12
