import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from privfunnel.bounds import h0_report, h_bounds_mi
from privfunnel.instances import bsc, erasure
from privfunnel.mechanisms import efrl
from privfunnel.oracle import (
    GridSpec,
    RefusedError,
    brute_force_g,
    brute_force_h,
    optimizer_audits,
    simplex_grid,
    slack,
)
from privfunnel.probcore import JointDist, entropy_suite

from conftest import find_fixture

TINY = JointDist.from_backward([0.25, 0.25, 0.5], [[0.2, 0.8, 0.5], [0.8, 0.2, 0.5]])


@pytest.mark.parametrize("k, steps", [(1, 5), (2, 4), (3, 10), (4, 5)])
def test_simplex_grid_counts(k, steps):
    g = simplex_grid(k, steps)
    assert g.shape == (math.comb(steps + k - 1, k - 1), k)
    assert_allclose(g.sum(axis=1), 1.0)
    assert len({tuple(r) for r in g}) == len(g)


def test_grid_spec_validation():
    assert GridSpec(0.05, 3).steps == 20
    with pytest.raises(ValueError):
        GridSpec(0.03)
    with pytest.raises(ValueError):
        GridSpec(0.05, 0)


def test_slack_units():
    assert_allclose(slack(3, 0.05), 3 * math.log(3) * 0.05)
    assert_allclose(slack(3, 0.05, "bits"), 3 * math.log2(3) * 0.05)
    assert slack(1, 0.05) == 0.0


def test_refuses_oversized_search():
    with pytest.raises(RefusedError, match="evaluations"):
        brute_force_h(bsc(0.3), 0.1, GridSpec(0.01, 3))
    with pytest.raises(RefusedError):
        brute_force_g(TINY, 0.0, "perfect", GridSpec(0.05, 3), max_evals=10)


def test_perfect_privacy_on_invertible_channel_is_zero():
    r = brute_force_g(bsc(0.3), 0.0, "perfect", GridSpec(0.05, 2))
    assert_allclose(r.value, 0.0, atol=1e-12)
    assert r.feasible


def test_erasure_perfect_privacy_reaches_binary_entropy():
    # theta = 0.5 puts the optimum on the 0.05 grid
    r = brute_force_g(erasure(0.5), 0.0, "perfect", GridSpec(0.05, 2), base="bits")
    assert_allclose(r.value, entropy_suite(erasure(0.5), "bits").h_y_given_x, atol=1e-12)


def test_refinement_never_lowers_the_value():
    coarse = brute_force_g(TINY, 0.05, "l", GridSpec(0.05, 2))
    fine = brute_force_g(TINY, 0.05, "l", GridSpec(0.025, 2))
    assert fine.value >= coarse.value - 1e-12


def test_mi_criterion_units():
    a = brute_force_g(bsc(0.2), 0.1, "mi", GridSpec(0.05, 2), base="bits")
    b = brute_force_g(bsc(0.2), 0.1 * math.log(2), "mi", GridSpec(0.05, 2), base="nats")
    assert_allclose(a.value * math.log(2), b.value, atol=1e-12)
    assert a.value <= entropy_suite(bsc(0.2), "bits").h_y + 1e-12


def test_h_oracle_respects_sandwich():
    j = bsc(0.2)
    s = entropy_suite(j)
    eps = 0.05
    r = brute_force_h(j, eps, GridSpec(0.1, 2))
    assert r.kernel.shape == (2, 2, 2)
    assert r.value <= s.h_y_given_x + eps + 1e-12


def test_frozen_h_values(oracle_fixtures):
    rec = find_fixture(oracle_fixtures, "bsc_0.2", "mi", 0.0)
    # the perfect-privacy optimum for the BSC is 2 theta bits and lies on the grid
    exact = h0_report(bsc(0.2), "nats").flags["exact_value"]
    assert_allclose(rec["value"], exact, atol=1e-9)
    skewed = JointDist.from_channel([0.4, 0.6], [[0.9, 0.1], [0.2, 0.8]])
    for name, j in (("bsc_0.2", bsc(0.2)), ("skewed_2x2", skewed)):
        rec = find_fixture(oracle_fixtures, name, "mi", 0.05)
        s = entropy_suite(j)
        tol = slack(j.shape[1], rec["grid"]["resolution"])
        r = h_bounds_mi(j, 0.05)
        lower = max(r["L1"], r["L2"], r["L3"])
        assert lower - tol <= rec["value"] <= s.h_y_given_x + 0.05 + tol


def test_audit_negative_control():
    # a constant U leaves all of H(Y|X) undisclosed
    j = bsc(0.3)
    rep = optimizer_audits(j, 0.0, np.ones((1, 2)))
    assert_allclose(rep.h_y_given_xu, entropy_suite(j).h_y_given_x)
    assert rep.h_x_given_y_zero is False and rep.matches_tight is None


def test_audit_tight_value_for_x_function_of_y():
    j = JointDist([[0.1, 0.3, 0, 0], [0, 0, 0.25, 0.35]])
    s = entropy_suite(j)
    eps = 0.3 * s.i_xy
    p = efrl(j, eps).joint()  # (X, Y, U)
    with np.errstate(invalid="ignore", divide="ignore"):
        k = np.where(j.matrix[..., None] > 0, p / j.matrix[..., None], 1 / p.shape[2])
    rep = optimizer_audits(j, eps, np.moveaxis(k, 2, 0), tol=1e-9)
    assert rep.h_x_given_y_zero and rep.matches_tight
    assert rep.h_y_given_xu <= 1e-9
