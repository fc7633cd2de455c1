import itertools
import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from shefluct.coefficients import smooth_preset
from shefluct.partitions import drift_coefficient, evaluate_j, lambda_set, lambda_set_m, weight


def brute(length, total, weighted):
    if length == 0:
        return [()] if total == weighted == 0 else []
    return sorted(
        q for q in itertools.product(range(total + 1), repeat=length)
        if sum(q) == total and sum(i * x for i, x in enumerate(q, 1)) == weighted
    )


@pytest.mark.parametrize("k", range(1, 7))
def test_lambda_matches_brute_force(k):
    for l in range(k + 1):
        want = brute(k - l, l, k - 1) if l < k else []
        assert list(lambda_set(k, l)) == want


def test_lambda_examples():
    assert lambda_set(3, 2) == ((2,),)
    assert lambda_set(2, 0) == ()
    assert lambda_set(1, 0) == ((0,),)
    for k in range(2, 9):
        assert lambda_set(k, 1) == ((0,) * (k - 2) + (1,),)


def test_lambda_errors():
    with pytest.raises(ValueError):
        lambda_set(-1, 0)
    with pytest.raises(ValueError):
        lambda_set(2, -1)
    with pytest.raises(ValueError):
        lambda_set(0, 0)
    with pytest.raises(ValueError):
        lambda_set_m(3, 1, -2)


def test_lambda_m_examples_and_ranges():
    assert lambda_set_m(4, 2, 3) == ((2, 0),)
    for k in range(1, 9):
        for l in range(k):
            assert lambda_set_m(k, l, k) == lambda_set(k, l)
            assert lambda_set_m(k, l, (k - l) * l + 2) == ()
            assert lambda_set_m(k, l, l) == ()


def test_projection_property():
    # for l+1 <= m <= k-1 every solution vanishes beyond entry m-l
    for k in range(2, 9):
        for l in range(1, k):
            for m in range(l + 1, k):
                for q in lambda_set_m(k, l, m):
                    assert all(x == 0 for x in q[m - l:])


def test_zero_padding_property():
    for k in range(2, 9):
        for l in range(1, k):
            for m in range(l + 1, k + 1):
                target = set(lambda_set_m(k, l, m))
                for q in lambda_set(m, l):
                    assert q + (0,) * (k - m) in target


def test_regrouping_covers_unconstrained_set():
    for k in range(1, 7):
        for l in range(1, k):
            union = []
            for m in range(l + 1, (k - l) * l + 2):
                union.extend(lambda_set_m(k, l, m))
            full = sorted(q for q in itertools.product(range(l + 1), repeat=k - l) if sum(q) == l)
            assert sorted(union) == full
            assert len(set(union)) == len(union)


def test_weights():
    assert weight(2, (2,)) == 1
    assert weight(2, (1, 1)) == 2
    assert weight(3, (1, 2)) == 3
    assert weight(0, (0, 0)) == 1
    with pytest.raises(ValueError):
        weight(2, (1, 2))


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(0, 5), min_size=1, max_size=5))
def test_weight_is_multinomial(q):
    l = sum(q)
    assert weight(l, q) == math.factorial(l) // math.prod(math.factorial(x) for x in q)


def test_evaluate_j_closed_forms():
    rng = np.random.default_rng(0)
    c = [None] + [rng.standard_normal(6) for _ in range(5)]
    np.testing.assert_array_equal(evaluate_j(1, 0, c), np.ones(6))
    np.testing.assert_array_equal(evaluate_j(3, 0, c), np.zeros(6))
    np.testing.assert_allclose(evaluate_j(3, 1, c), c[2])
    for k in range(2, 6):
        np.testing.assert_allclose(evaluate_j(k, k - 1, c), c[1] ** (k - 1))
    # J(4, 2): q1 + q2 = 2, q1 + 2 q2 = 3 -> (1, 1) with weight 2
    np.testing.assert_allclose(evaluate_j(4, 2, c), 2 * c[1] * c[2])


def test_evaluate_j_depth_check():
    with pytest.raises(ValueError):
        evaluate_j(4, 1, [np.zeros(3), np.zeros(3), np.zeros(3)])


def test_drift_k3_closed_form():
    G = smooth_preset("cosine")
    u0 = np.linspace(-1, 1, 5)
    u1, u2 = np.sin(u0), np.cos(3 * u0)
    g = G.derivatives(u0, 2)
    got = drift_coefficient(3, g, [u0, u1, u2])
    np.testing.assert_allclose(got, g[1] * u2 + 0.5 * g[2] * u1**2, atol=1e-15)


@pytest.mark.parametrize("k", range(1, 6))
def test_drift_is_taylor_coefficient(k):
    # c_k is the s^{k-1} coefficient of G(u0 + sum_i s^i u^i), s = sqrt(eps)
    s, a = sp.symbols("s a")
    us = sp.symbols(f"v1:{k + 1}")
    expr = sp.cos(a + sum(s ** (i + 1) * us[i] for i in range(k)))
    coeff = sp.series(expr, s, 0, k).removeO().coeff(s, k - 1)
    vals = {a: 0.3, **{us[i]: 0.1 * (i + 2) * (-1) ** i for i in range(k)}}
    G = smooth_preset("cosine")
    g = G.derivatives(np.array(0.3), k - 1)
    coeffs = [np.array(0.3)] + [np.array(float(vals[us[i]])) for i in range(k)]
    assert math.isclose(float(drift_coefficient(k, g, coeffs)), float(coeff.subs(vals)), rel_tol=1e-12, abs_tol=1e-14)


def test_drift_needs_derivatives():
    with pytest.raises(ValueError):
        drift_coefficient(3, [np.ones(2)], [np.ones(2)] * 3)
