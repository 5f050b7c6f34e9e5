import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fracvi.cq import (
    GridSeries,
    bdf_generating_polynomial,
    conv_left,
    conv_right,
    corrected_conv_left,
    cq_weights,
    series_power,
    starting_quadrature,
)
from fracvi.errors import ConfigurationError, DimensionError, InvalidOrderError


def binom_weights(alpha, n_max):
    # (-1)^n binom(-alpha, n) by the product formula, exact for rational alpha
    a = Fraction(alpha).limit_denominator(1000)
    out, c = [], Fraction(1)
    for n in range(n_max + 1):
        out.append(c)
        c = c * (n + a) / (n + 1)
    return np.array([float(x) for x in out])


# ---- generating polynomial


def test_bdf_polynomials_hand_expanded():
    assert bdf_generating_polynomial(1).exact == (1, -1)
    # (1-z) + (1-z)^2/2 = 3/2 - 2z + z^2/2
    assert bdf_generating_polynomial(2).exact == (Fraction(3, 2), -2, Fraction(1, 2))
    # + (1-z)^3/3 = 11/6 - 3z + 3/2 z^2 - 1/3 z^3
    assert bdf_generating_polynomial(3).exact == (
        Fraction(11, 6), -3, Fraction(3, 2), Fraction(-1, 3)
    )


@pytest.mark.parametrize("p", range(1, 7))
def test_bdf_vanishes_at_one_with_unit_slope(p):
    g = bdf_generating_polynomial(p)
    assert sum(g.exact) == 0
    # gamma'(1) = -1, so gamma(z) ~ 1 - z
    assert sum(k * c for k, c in enumerate(g.exact)) == -1
    assert g(0.0) == pytest.approx(sum(Fraction(1, k) for k in range(1, p + 1)))


@pytest.mark.parametrize("p", [0, 7, 2.5, -1])
def test_bdf_order_out_of_range(p):
    with pytest.raises(InvalidOrderError):
        bdf_generating_polynomial(p)


# ---- weights


def test_series_power_against_polynomial_square():
    a = np.array([2.0, 1.0, 3.0])
    c = series_power(a, 2.0, 6)
    np.testing.assert_allclose(c, [4, 4, 13, 6, 9, 0], atol=1e-13)


def test_series_power_inverse():
    a = np.array([1.5, -2.0, 0.5])
    inv = series_power(a, -1.0, 30)
    prod = np.convolve(a, inv)[:30]
    np.testing.assert_allclose(prod, np.eye(1, 30)[0], atol=1e-10)


def test_alpha_zero_gives_identity():
    w = cq_weights(0.0, 3, 0.1, 10).weights
    np.testing.assert_array_equal(w, np.eye(1, 11)[0])


@pytest.mark.parametrize("alpha", [-0.75, -0.5, -0.25, 0.25, 0.5, 0.75])
def test_bdf1_is_grunwald(alpha):
    h = 0.1
    w = cq_weights(alpha, 1, h, 200).weights
    ref = h**alpha * binom_weights(alpha, 200)
    np.testing.assert_allclose(w, ref, rtol=1e-12, atol=0)


def test_bdf1_half_integral_small_values():
    # h=1, alpha=-1/2: 1, -1/2, -1/8, -1/16, -5/128
    w = cq_weights(-0.5, 1, 1.0, 4).weights
    np.testing.assert_allclose(w, [1, -0.5, -0.125, -0.0625, -5 / 128], rtol=1e-15)


def test_integer_orders_reproduce_bdf():
    # alpha = -1 gives the BDF difference coefficients / h
    h = 0.25
    w = cq_weights(-1.0, 2, h, 5).weights
    np.testing.assert_allclose(w, [1.5 / h, -2 / h, 0.5 / h, 0, 0, 0], atol=1e-12)


def test_weight_scaling_in_h():
    w1 = cq_weights(0.3, 3, 1.0, 20).weights
    w2 = cq_weights(0.3, 3, 0.01, 20).weights
    np.testing.assert_allclose(w2, 0.01**0.3 * w1, rtol=1e-13)


def test_weights_are_read_only():
    w = cq_weights(0.5, 2, 0.1, 5)
    with pytest.raises(ValueError):
        w.weights[0] = 3.0
    assert w.length_N == 5 and len(w) == 6


@pytest.mark.parametrize("h,N", [(0.0, 4), (-1.0, 4), (0.1, -1)])
def test_bad_grid(h, N):
    with pytest.raises(ConfigurationError):
        cq_weights(0.5, 1, h, N)


# ---- convolutions


def test_conv_left_telescopes_for_bdf1_derivative():
    # alpha=-1, p=1: (f_k - f_{k-1}) / h with f_{-1} = 0
    h = 0.5
    f = np.array([1.0, 3.0, 4.0, 8.0])
    g = conv_left(cq_weights(-1.0, 1, h, 3), f).values
    np.testing.assert_allclose(g, np.diff(np.concatenate([[0.0], f])) / h)


def test_conv_left_right_identity_weights():
    f = np.arange(6.0)
    w = cq_weights(0.0, 2, 1.0, 5)
    np.testing.assert_array_equal(conv_left(w, f).values, f)
    np.testing.assert_array_equal(conv_right(w, f).values, f)


def test_conv_right_is_reversed_left():
    rng = np.random.default_rng(1)
    f = rng.normal(size=17)
    w = cq_weights(-0.4, 3, 0.1, 16)
    np.testing.assert_allclose(conv_right(w, f).values, conv_left(w, f[::-1]).values[::-1])


def test_conv_left_matches_direct_sum():
    rng = np.random.default_rng(2)
    f = rng.normal(size=(12, 2))
    w = cq_weights(0.7, 2, 0.3, 11)
    g = conv_left(w, f).values
    for k in range(12):
        ref = sum(w.weights[n] * f[k - n] for n in range(k + 1))
        np.testing.assert_allclose(g[k], ref, atol=1e-14)


def test_conv_too_few_weights():
    with pytest.raises(DimensionError):
        conv_left(cq_weights(0.5, 1, 1.0, 3), np.ones(6))


def test_grid_series_frozen():
    g = GridSeries.sample(np.sin, 0.1, 5)
    np.testing.assert_allclose(g.times, 0.1 * np.arange(6))
    with pytest.raises(ValueError):
        g.values[0] = 1.0


@settings(max_examples=60, deadline=None)
@given(
    a=st.floats(-0.9, 0.9),
    b=st.floats(-0.9, 0.9),
    p=st.integers(1, 4),
    seed=st.integers(0, 2**32 - 1),
)
def test_semigroup_property(a, b, p, seed):
    N, h = 40, 0.05
    f = np.random.default_rng(seed).normal(size=N + 1)
    wa, wb, wab = (cq_weights(x, p, h, N) for x in (a, b, a + b))
    lhs = conv_left(wa, conv_left(wb, f)).values
    rhs = conv_left(wab, f).values
    scale = np.max(np.abs(wa.weights)) * np.max(np.abs(wb.weights)) * np.sum(np.abs(f)) * N
    assert np.max(np.abs(lhs - rhs)) <= 1e-12 * scale


@settings(max_examples=60, deadline=None)
@given(a=st.floats(-0.9, 0.9), p=st.integers(1, 6), seed=st.integers(0, 2**32 - 1))
def test_summation_by_parts_property(a, p, seed):
    N, h = 30, 0.1
    rng = np.random.default_rng(seed)
    f, g = rng.normal(size=(2, N + 1))
    w = cq_weights(a, p, h, N)
    lhs = g @ conv_left(w, f).values
    rhs = f @ conv_right(w, g).values
    scale = np.abs(g) @ np.abs(conv_left(w, np.abs(f)).values) + 1.0
    assert abs(lhs - rhs) <= 1e-12 * scale


# ---- starting quadrature


@pytest.mark.parametrize("alpha", [-0.5, 0.5, -1.5])
@pytest.mark.parametrize("p", [2, 3, 4])
def test_corrected_cq_exact_on_low_monomials(alpha, p):
    h, N = 0.1, 20
    s = p - 1
    w = cq_weights(alpha, p, h, N)
    sq = starting_quadrature(alpha, p, h, N, s)
    t = h * np.arange(N + 1)
    for q in range(s + 1):
        f = t**q
        approx = corrected_conv_left(w, sq, f).values
        with np.errstate(divide="ignore"):
            exact = math.gamma(q + 1) / math.gamma(q + 1 + alpha) * t ** (q + alpha)
        ok = np.isfinite(exact)
        assert np.max(np.abs(approx[ok] - exact[ok])) < 1e-9 * max(1.0, np.max(np.abs(exact[ok])))


def test_starting_quadrature_s0_p1_is_small():
    sq = starting_quadrature(-0.5, 1, 0.1, 10, 0)
    assert sq.weights.shape == (11, 1)
    assert sq.condition == pytest.approx(1.0)


def test_singular_row_zero():
    # q = 0, alpha = -1.5: t^-1.5 is infinite at t=0
    sq = starting_quadrature(-1.5, 2, 0.1, 10, 1)
    assert sq.singular_rows == (0,)
    assert np.all(sq.weights[0] == 0)


def test_corrected_improves_order_on_smooth_data():
    from fracvi.bench import cq_error, fit_order
    from fracvi.fracops import rl_integral_monomial

    # J^(1/2) e^t, termwise exponential series as the reference
    def exact(t):
        return sum(rl_integral_monomial(0.5, m + 1, t) / math.factorial(m) for m in range(40))

    hs = [2.0**-i for i in range(4, 9)]
    plain, corr = [], []
    for h in hs:
        t = h * np.arange(int(round(1 / h)) + 1)
        plain.append(cq_error(np.exp(t), exact(t), 0.5, 3, h))
        corr.append(cq_error(np.exp(t), exact(t), 0.5, 3, h, corrected=True, s=2))
    assert fit_order(hs, plain).slope == pytest.approx(0.5, abs=0.1)
    assert fit_order(hs, corr).slope > 2.8


@pytest.mark.parametrize("s,N", [(-1, 5), (7, 10), (3, 2)])
def test_starting_quadrature_validation(s, N):
    with pytest.raises(ConfigurationError):
        starting_quadrature(0.5, 3, 0.1, N, s)


def test_bdf1_integral_correction_on_constants():
    # alpha=1, p=1 is h * sum_{j<=k} f_j: (k+1) h on f=1 against k h exactly
    sq = starting_quadrature(1.0, 1, 0.1, 6, 0)
    np.testing.assert_allclose(sq.weights[:, 0], -1.0, atol=1e-13)


def test_half_integer_power_not_in_correction_span():
    # t^{3/2} is not a polynomial, so integer-monomial correction cannot help;
    # frozen: plain max-norm order 2, corrected order 1.5
    from fracvi.bench import cq_monomial_study

    hs = [2.0**-i for i in range(3, 11)]
    plain = cq_monomial_study(0.5, 2.5, 3, hs)
    corr = cq_monomial_study(0.5, 2.5, 3, hs, corrected=True, s=3)
    assert plain.slope == pytest.approx(2.0, abs=0.05)
    assert corr.local_slopes[-1] == pytest.approx(1.5, abs=0.05)


def test_bdf1_unit_integral_weights_are_ones():
    np.testing.assert_allclose(cq_weights(1.0, 1, 1.0, 10).weights, 1.0, rtol=1e-15)


def test_bdf1_first_derivative_weights():
    np.testing.assert_allclose(cq_weights(-1.0, 1, 0.1, 4).weights, [10, -10, 0, 0, 0], atol=1e-12)


def test_half_derivative_of_ones():
    g = conv_left(cq_weights(-0.5, 1, 1.0, 2), np.ones(3)).values
    np.testing.assert_allclose(g, [1, 0.5, 0.375], rtol=1e-15)


def test_indicator_picks_out_weights():
    w = cq_weights(0.3, 2, 0.5, 8)
    e = np.zeros(9)
    e[-1] = 1.0
    np.testing.assert_allclose(conv_right(w, e).values, w.weights[::-1])
    np.testing.assert_allclose(conv_left(w, e[::-1]).values, w.weights)


def test_half_integral_of_t_second_order():
    N = 1024
    h = 1 / N
    t = h * np.arange(N + 1)
    g = conv_left(cq_weights(0.5, 2, h, N), t).values
    # frozen: max error / h^2 = 2.056
    assert np.max(np.abs(g - t**1.5 / math.gamma(2.5))) < 2.1 * h**2
