import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from privfunnel.bounds import (
    BoundsReport,
    PrioritizedJoint,
    efi_lower,
    equality_detector,
    h0_report,
    h_bounds_mi,
    integral_term,
    perletter_closed_bounds,
    pinsker_convert,
    positivity_condition,
    prioritized_bounds,
)
from privfunnel.instances import bsc, erasure, matrix1
from privfunnel.mechanisms import DomainError, sfrl_constant
from privfunnel.probcore import JointDist, binary_entropy, entropy_suite, xlogx

from conftest import joints


def deterministic_x(rng, nx=2, ny=4):
    """Joint with X = f(Y): each column has a single non-zero row."""
    f = np.concatenate([np.arange(nx), rng.integers(0, nx, ny - nx)])
    py = rng.dirichlet(np.ones(ny))
    m = np.zeros((nx, ny))
    m[f, np.arange(ny)] = py
    return JointDist(m)


def test_tight_when_x_is_function_of_y():
    j = deterministic_x(np.random.default_rng(1))
    s = entropy_suite(j)
    eps = 0.3 * s.i_xy
    r = h_bounds_mi(j, eps, g0=None)
    # with H(X|Y) = 0 the g0 value is H(Y|X); inject it
    r = h_bounds_mi(j, eps, g0=s.h_y_given_x)
    assert_allclose([r["L1"], r["L3"]], r["upper"], atol=1e-12)


def test_l2_beats_l1_for_independent_high_entropy_x():
    # X uniform on 32 symbols (5 bits) independent of Y: I(X;Y) = 0 so eps must be 0
    px = np.full(32, 1 / 32)
    j = JointDist(np.outer(px, [0.5, 0.5]))
    s = entropy_suite(j, "bits")
    l1 = s.h_y - s.h_x
    l2 = s.h_y_given_x - sfrl_constant(s.i_xy, "bits")
    assert l2 > l1


def test_zero_budget_reduces_to_perfect_privacy_bounds():
    j = bsc(0.2)
    r = h_bounds_mi(j, 0.0, base="bits")
    s = entropy_suite(j, "bits")
    assert_allclose(r["L1"], s.h_y - s.h_x)
    assert_allclose(r["L2"], s.h_y_given_x - (math.log2(s.i_xy + 1) + 4))


def test_budget_at_mutual_information_is_rejected():
    j = bsc(0.2)
    with pytest.raises(DomainError, match="optimum is H"):
        h_bounds_mi(j, entropy_suite(j).i_xy)


@settings(max_examples=80, deadline=None)
@given(joints(), st.floats(0, 0.99))
def test_bound_consistency(j, frac):
    s = entropy_suite(j)
    eps = frac * s.i_xy
    r = h_bounds_mi(j, eps)
    assert max(r["L1"], r["L2"], r["L3"]) <= r["upper"] + 1e-12
    # gap identity between L2 at eps and at zero
    alpha = eps / s.h_x
    c = sfrl_constant(s.i_xy)
    gap = r["L2"] - (s.h_y_given_x - c)
    assert_allclose(gap, eps + alpha * (c - s.h_x_given_y), atol=1e-12)
    assert gap >= -1e-12


@settings(max_examples=40, deadline=None)
@given(joints(), st.floats(0.05, 0.45), st.floats(0.5, 0.95))
def test_monotone_in_budget(j, a, b):
    s = entropy_suite(j)
    lo, hi = h_bounds_mi(j, a * s.i_xy), h_bounds_mi(j, b * s.i_xy)
    for k in ("L1", "L3", "upper"):
        assert hi[k] > lo[k]


@settings(max_examples=40, deadline=None)
@given(joints())
def test_lower_upper_width_is_five_units(j):
    s = entropy_suite(j)
    l02 = h0_report(j)["L02"]
    upper = s.h_y_given_x - math.log(s.i_xy + 1) + 1
    assert_allclose(upper - l02, 5.0, atol=1e-12)


def test_positivity_examples():
    y_of_x = JointDist([[0.3, 0.0], [0.0, 0.7]])
    assert not positivity_condition(y_of_x, 0.0).necessary
    x_of_y = JointDist([[0.2, 0.3, 0.0], [0.0, 0.0, 0.5]])
    p = positivity_condition(x_of_y, 0.0)
    assert p.necessary and p.sufficient
    p = positivity_condition(bsc(0.3), 0.05 * entropy_suite(bsc(0.3)).i_xy)
    assert p.necessary


def test_integral_term_bsc():
    for theta in (0.1, 0.3):
        assert_allclose(integral_term(bsc(theta), "bits"), -(1 - 2 * theta), atol=1e-12)


def test_efi_lower_deterministic_cases():
    # the integral collapses to -H(Y) or -H(X), which equals -I(X;Y) in both cases
    y_of_x = JointDist([[0.3, 0.0], [0.0, 0.2], [0.5, 0.0]])
    assert_allclose(integral_term(y_of_x), -entropy_suite(y_of_x).h_y, atol=1e-12)
    assert_allclose(efi_lower(y_of_x), 0.0, atol=1e-12)
    x_of_y = deterministic_x(np.random.default_rng(7), 3, 5)
    assert_allclose(efi_lower(x_of_y), 0.0, atol=1e-12)


@settings(max_examples=20, deadline=None)
@given(joints())
def test_integral_matches_riemann_sum(j):
    n = 10**6
    t = (np.arange(n) + 0.5) / n
    total = 0.0
    for y in range(j.shape[1]):
        col = j.p_y_given_x[:, y]
        order = np.argsort(col)
        # g(t) = P_X{col >= t}: mass of the entries at or above t
        mass_above = np.concatenate([np.cumsum(j.px[order][::-1])[::-1], [0.0]])
        g = mass_above[np.searchsorted(col[order], t, side="left")]
        total += xlogx(g).sum() / n
    assert_allclose(integral_term(j), total, atol=1e-6)


@pytest.mark.parametrize("theta", [0.05, 0.2, 0.45])
def test_h0_bsc(theta):
    r = h0_report(bsc(theta), "bits")
    assert_allclose(r["U02"], 2 * theta, atol=1e-12)
    assert_allclose(r["U01"], binary_entropy(theta, "bits"), atol=1e-12)
    assert r.flags["binary_y_exact"] and r.flags["exact_value"] == r["U02"]
    assert r["U02"] <= r["U01"]


@pytest.mark.parametrize("theta", [0.1, 0.3])
def test_h0_erasure(theta):
    r = h0_report(erasure(theta), "bits")
    assert_allclose([r["U01"], r["U02"]], binary_entropy(theta, "bits"), atol=1e-12)


def test_h0_x_function_of_y():
    j = deterministic_x(np.random.default_rng(3), 2, 5)
    r = h0_report(j)
    assert_allclose(r["U02"], r["U01"], atol=1e-12)


def test_per_letter_zero_budget():
    j = matrix1()
    r = perletter_closed_bounds(j, 0.0)
    assert_allclose(r["L1_hwl"], h0_report(j)["L01"] + entropy_suite(j).h_y_given_x - entropy_suite(j).h_y + entropy_suite(j).h_x - entropy_suite(j).h_x_given_y)
    assert_allclose(r["U_hl"], entropy_suite(j).h_y_given_x)


def test_per_letter_lower_bounds_omitted_out_of_range():
    j = bsc(0.45)
    big = 2 * math.sqrt(2 * entropy_suite(j).i_xy)
    r = perletter_closed_bounds(j, big)
    assert "L1_hwl" not in r and "lower_omitted" in r.flags
    assert "U_hl" in r


def test_per_letter_nat_terms_convert_with_base():
    j = matrix1()
    nats = perletter_closed_bounds(j, 0.05, "nats")
    bits = perletter_closed_bounds(j, 0.05, "bits")
    # L2_hwl carries the additive constant of the session base, so it is not a rescaling
    for k in ("L1_hwl", "U_hl", "U_gwl"):
        assert_allclose(bits[k] * math.log(2), nats[k], rtol=1e-12)


def test_per_letter_asymptotics_deterministic():
    j = deterministic_x(np.random.default_rng(5), 2, 4)
    hyx = entropy_suite(j).h_y_given_x
    r = perletter_closed_bounds(j, 1e-7)
    assert_allclose([r["U_gwl"], r["L1_hwl"]], hyx, atol=1e-5)


def test_pinsker_convert_examples():
    z = pinsker_convert(0.0, 0.5)
    assert (z.eps_bar, z.eps_prime, z.eps_tilde) == (0.0, 0.0, 0.0)
    assert_allclose(pinsker_convert(0.02, 0.5).eps_bar, 0.2)
    c = pinsker_convert(0.1, 0.4)
    assert_allclose([c.eps_tilde, c.eps_prime], [0.2, 0.025])


@settings(max_examples=40, deadline=None)
@given(joints(), st.integers(0, 2**31), st.integers(2, 4))
def test_pinsker_sandwich_on_random_kernels(j, seed, nu):
    # any kernel leaking eps nats is within eps_bar in the weighted criterion
    from privfunnel.mechanisms import Mechanism, decompose_utility

    k = np.random.default_rng(seed).dirichlet(np.ones(nu), size=j.shape[1]).T
    m = Mechanism.from_kernel_uy(j, k)
    eps = decompose_utility(m).i_xu
    w, u = m.leakages()
    assert w.max() <= pinsker_convert(eps, j.px.min()).eps_bar + 1e-12
    # unweighted level u certifies I(X;U) <= u^2 / min P_X
    assert eps <= pinsker_convert(u.max(), j.px.min()).eps_prime + 1e-12


def _tensor_from(f1, f2, py):
    t = np.zeros((max(f1) + 1, max(f2) + 1, len(py)))
    for y, p in enumerate(py):
        t[f1[y], f2[y], y] = p
    return PrioritizedJoint(t)


def test_prioritized_tight_for_deterministic_pair():
    pj = _tensor_from([0, 0, 1, 1, 0], [0, 1, 0, 1, 1], [0.1, 0.2, 0.3, 0.15, 0.25])
    r = prioritized_bounds(pj, 0.2)
    assert abs(r["U1_p"] - r["L1_p"]) <= 1e-12


def test_prioritized_ordering_when_x1_is_function_of_y():
    rng = np.random.default_rng(4)
    ny = 4
    f1 = [0, 1, 0, 1]
    t = np.zeros((2, 3, ny))
    for y in range(ny):
        t[f1[y], :, y] = rng.dirichlet(np.ones(3)) / ny
    r = prioritized_bounds(PrioritizedJoint(t), 0.1)
    assert r["L1_p"] >= r["L3_p"] >= r["L2_p"]


def test_prioritized_independence_needs_large_entropy():
    px = np.full(5, 0.2)
    t = np.einsum("a,b,c->abc", px, px, [0.3, 0.7])
    r = prioritized_bounds(PrioritizedJoint(t), 0.1, "bits")
    assert r["L2_p"] >= r["L1_p"] and r["L3_p"] >= r["L1_p"]


def test_prioritized_rejects_constant_x2():
    t = np.zeros((2, 1, 2))
    t[0, 0, 0], t[1, 0, 1] = 0.5, 0.5
    with pytest.raises(DomainError):
        prioritized_bounds(PrioritizedJoint(t), 0.1)


def test_equality_detector():
    j = deterministic_x(np.random.default_rng(2))
    s = entropy_suite(j)
    v = equality_detector(j, 0.5 * s.i_xy)
    assert v.h_x_given_y_zero and v.value == pytest.approx(s.h_y_given_x + 0.5 * s.i_xy)
    assert not equality_detector(bsc(0.3), 0.01).h_x_given_y_zero
    ident = JointDist([[0.4, 0.0], [0.0, 0.6]])
    assert equality_detector(ident, 0.1).value == pytest.approx(0.1)


def test_report_serialization():
    r = h0_report(bsc(0.3), "bits")
    doc = json.loads(r.to_json())
    assert doc["entries"]["U02"]["value"] == pytest.approx(0.6)
    lines = r.to_csv().strip().splitlines()
    assert lines[0] == "x,series,value,valid" and len(lines) == 5


def test_best_lower_and_upper():
    r = BoundsReport(0.0, "nats")
    r.add("a", 1.0, "lower")
    r.add("b", 2.0, "lower", valid=False)
    r.add("c", 3.0, "upper")
    assert (r.best_lower(), r.best_upper()) == (1.0, 3.0)
