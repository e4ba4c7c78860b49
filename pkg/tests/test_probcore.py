import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from privfunnel.probcore import (
    JointDist,
    Kernel,
    ProbVec,
    SupportError,
    ValidationError,
    binary_entropy,
    criterion_leakages,
    divergences,
    entropy_nats,
    entropy_suite,
    kl_divergence,
    l1_distance,
    per_letter_leakage,
)

from conftest import joints


def test_uniform_product_has_unit_entropies():
    s = entropy_suite(JointDist(np.full((2, 2), 0.25)), "bits")
    assert_allclose([s.h_x, s.h_y, s.i_xy], [1, 1, 0], atol=1e-15)


def test_identity_coupling():
    s = entropy_suite(JointDist([[0.5, 0], [0, 0.5]]), "bits")
    assert_allclose(s.i_xy, 1.0)
    assert_allclose(s.h_y_given_x, 0.0, atol=1e-15)


def test_bsc_conditional_entropy():
    # h(0.3) from the closed form, computed independently of entropy_nats
    expected = -(0.3 * math.log2(0.3) + 0.7 * math.log2(0.7))
    j = JointDist.from_channel([0.5, 0.5], [[0.7, 0.3], [0.3, 0.7]])
    assert_allclose(entropy_suite(j, "bits").h_y_given_x, expected, rtol=1e-14)
    assert_allclose(expected, 0.881291, atol=5e-7)


def test_binary_entropy_values():
    assert binary_entropy(0.0) == 0.0
    assert_allclose(binary_entropy(0.5, "bits"), 1.0)
    assert_allclose(binary_entropy(0.25, "bits"), 0.811278, atol=5e-7)
    with pytest.raises(ValueError):
        binary_entropy(1.5)


@given(st.floats(0, 1))
def test_binary_entropy_symmetric(theta):
    assert_allclose(binary_entropy(theta), binary_entropy(1 - theta), atol=1e-12)
    assert binary_entropy(theta, "bits") <= 1 + 1e-12


def test_divergence_examples():
    same = ProbVec([0.3, 0.7])
    d = divergences(same, same)
    assert d.kl == 0 and d.d == 0
    assert l1_distance([1, 0], [0, 1]) == 2
    p, q = ProbVec([0.6, 0.4]), ProbVec([0.5, 0.5])
    d = divergences(p, q)
    assert_allclose(d.d, 0.2)
    assert d.kl >= d.d**2 / 2


def test_kl_support_violation_is_an_error():
    with pytest.raises(SupportError):
        kl_divergence([0.5, 0.5], [1.0, 0.0])


@pytest.mark.parametrize(
    "bad, fragment",
    [
        ([0.5, 0.6], "sum"),
        ([-0.1, 1.1], "negative"),
        ([np.nan, 1.0], "non-finite"),
    ],
)
def test_probvec_validation(bad, fragment):
    with pytest.raises(ValidationError, match=fragment):
        ProbVec(bad)


def test_strict_marginals_required():
    with pytest.raises(ValidationError, match="zero marginal"):
        JointDist([[0.5, 0.0], [0.5, 0.0]])
    JointDist([[0.5, 0.0], [0.5, 0.0]], strict=False)


def test_kernel_columns_must_be_stochastic():
    Kernel([[0.2, 1.0], [0.8, 0.0]])
    with pytest.raises(ValidationError, match="column 1"):
        Kernel([[0.2, 0.5], [0.8, 0.0]])


def test_leakage_examples():
    indep = criterion_leakages(np.outer([0.3, 0.7], [0.4, 0.6]))
    assert_allclose(indep.weighted, 0, atol=1e-15)
    assert_allclose(indep.unweighted, 0, atol=1e-15)
    assert_allclose(indep.mi, 0, atol=1e-15)
    ident = criterion_leakages(np.diag([0.5, 0.5]))
    assert_allclose(ident.unweighted, [1.0, 1.0])


@settings(max_examples=60, deadline=None)
@given(joints())
def test_chain_rule_and_nonnegativity(j):
    s = entropy_suite(j)
    assert_allclose(entropy_nats(j.matrix), s.h_x + s.h_y_given_x, atol=1e-12)
    assert min(s.h_x, s.h_y, s.h_x_given_y, s.h_y_given_x, s.i_xy) >= 0
    assert s.i_xy == s.h_y - s.h_y_given_x or s.i_xy == 0.0


@settings(max_examples=60, deadline=None)
@given(joints(), st.integers(2, 4), st.integers(0, 2**31))
def test_linkage_inequality(j, nu, seed):
    # X - Y - U: leakage about X never exceeds leakage about Y, per atom
    k = np.random.default_rng(seed).dirichlet(np.ones(nu), size=j.shape[1]).T
    p_yu = (k * j.py[None, :]).T
    p_xu = j.matrix @ k.T
    wx, ux = per_letter_leakage(p_xu)
    wy, uy = per_letter_leakage(p_yu)
    assert np.all(wx <= wy + 1e-12)
    assert np.all(ux <= uy + 1e-12)
    assert np.all(wx <= ux + 1e-12)


@settings(max_examples=60, deadline=None)
@given(joints(), st.integers(0, 2**31))
def test_pinsker_and_reverse_pinsker(j, seed):
    px = j.px
    q = np.random.default_rng(seed).dirichlet(np.ones(px.size))
    kl = kl_divergence(q, px)
    d = l1_distance(q, px)
    assert kl >= d**2 / 2 - 1e-12
    assert kl <= d**2 / px.min() + 1e-12
