import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ell_lab.spherical_means import (
    FieldWithLaplacian, PolynomialField, catalogue, half_space_samples, half_sphere_area,
    half_sphere_mean, half_sphere_moment, half_sphere_rule, linear_combination,
    linear_lower_bound_check, mean_derivative_identity_check, monotonicity_scan,
)

import oracles


def test_zero_field_mean_is_exact_zero():
    zero = FieldWithLaplacian(lambda x: 0.0 * x[..., -1], lambda x: 0.0 * x[..., -1])
    assert half_sphere_mean(zero, R=3.0, n=3).value == 0.0


@pytest.mark.parametrize("n, expected", [(2, 0.5), (3, 1 / 3)])
@pytest.mark.parametrize("R", [0.5, 1.0, 10.0])
def test_mean_of_x_n(n, expected, R):
    s = half_sphere_mean(catalogue("x_n"), R=R, n=n)
    assert abs(s.value - expected) <= 1e-8


def test_mean_of_x_n_independent_of_radius():
    vals = [half_sphere_mean(catalogue("x_n"), R=R, n=3).value for R in np.logspace(-1, 1, 7)]
    assert max(vals) - min(vals) < 1e-10


def test_monte_carlo_mean_high_dimension():
    s = half_sphere_mean(catalogue("x_n"), R=2.0, n=5, seed=1)
    assert s.method == "monte-carlo"
    assert abs(s.value - 1 / 5) <= 5 * s.error
    again = half_sphere_mean(catalogue("x_n"), R=2.0, n=5, seed=1)
    assert again.value == s.value


def test_area():
    assert half_sphere_area(2) == pytest.approx(math.pi)
    assert half_sphere_area(3) == pytest.approx(2 * math.pi)


@pytest.mark.parametrize("exps", [(0, 0), (2, 0), (4, 2), (2, 3), (0, 6),
                                  (0, 0, 0), (2, 0, 2), (2, 2, 2), (4, 0, 2), (0, 0, 6), (2, 2, 1), (0, 2, 3)])
def test_rules_integrate_moments(exps):
    # even powers in the tangential coordinates keep the integrand polynomial
    ref = oracles.half_sphere_moment(exps)
    assert half_sphere_moment(exps) == pytest.approx(ref, rel=1e-12)
    z, w = half_sphere_rule(len(exps))
    quad = float(np.dot(w, np.prod(np.abs(z) ** np.array(exps), axis=-1)))
    assert quad == pytest.approx(ref, rel=1e-12)


def test_x_n_squared_identity_value():
    chk = mean_derivative_identity_check(catalogue("x_n^2"), R=2.5, n=2)
    assert chk.lhs == pytest.approx(4 / (3 * math.pi), rel=1e-8)
    assert chk.rhs == pytest.approx(4 / (3 * math.pi), rel=1e-8)


def test_x_n_identity_both_zero():
    chk = mean_derivative_identity_check(catalogue("x_n"), R=1.0, n=3)
    assert abs(chk.lhs) < 1e-8 and abs(chk.rhs) < 1e-12


def random_polynomial(rng, n, degree=4, terms=6):
    out = {}
    for _ in range(terms):
        k = rng.integers(0, degree + 1)
        e = np.zeros(n, dtype=int)
        for _ in range(k):
            e[rng.integers(0, n)] += 1
        out[tuple(int(x) for x in e)] = float(rng.normal())
    return PolynomialField(out)


def test_polynomial_laplacian_exact():
    P = PolynomialField({(2, 1): 3.0, (0, 4): -1.0, (1, 0): 2.0})
    x = np.array([[0.3, -1.2], [2.0, 0.5]])
    expected = 6.0 * x[:, 1] - 12.0 * x[:, 1] ** 2
    np.testing.assert_allclose(P.laplacian(x), expected, rtol=1e-14)


@pytest.mark.parametrize("n", [2, 3])
def test_identity_on_random_polynomials(n):
    rng = np.random.default_rng(n)
    for _ in range(10):
        P = random_polynomial(rng, n)
        y = np.append(rng.uniform(-1, 1, n - 1), 0.0)
        chk = mean_derivative_identity_check(P, y=y, R=float(rng.uniform(0.5, 2.0)), n=n)
        assert chk.rel_gap <= 1e-4


def test_identity_needs_laplacian():
    with pytest.raises(ValueError):
        mean_derivative_identity_check(FieldWithLaplacian(lambda x: x[..., -1]), n=2)


def test_center_must_be_on_boundary():
    with pytest.raises(ValueError):
        half_sphere_mean(catalogue("x_n"), y=[0.0, 1.0], n=2)


@pytest.mark.parametrize("n", [2, 3])
def test_superharmonic_scan(n):
    w = catalogue("superharmonic")
    y2 = np.zeros(n)
    y2[0] = 5.0
    v = monotonicity_scan(w, n=n, y2=y2)
    assert v.monotone and v.nonnegative and v.consistent and v.centers_agree
    assert all(b <= a for a, b in zip(v.means, v.means[1:]))
    # means approach [x_n] = 1/n from above
    assert 1 / n <= v.means[-1] <= 1 / n + 0.05


def test_harmonic_scan_constant():
    v = monotonicity_scan(catalogue("x_n"), n=2)
    assert max(v.means) - min(v.means) <= 1e-8 and v.consistent


def test_negated_field_inconsistent():
    neg = catalogue("x_n").scaled(-1.0)
    v = monotonicity_scan(neg, n=2)
    assert not v.nonnegative and not v.consistent


def test_increasing_means_flagged():
    # x_n^2 is subharmonic and its means grow linearly in R
    v = monotonicity_scan(catalogue("x_n^2"), n=2, radii=(1, 2, 4))
    assert not v.monotone and v.violations == [0, 1]


def test_radii_must_increase():
    with pytest.raises(ValueError):
        monotonicity_scan(catalogue("x_n"), radii=(1, 1, 2))


@pytest.mark.parametrize("w, L", [(catalogue("x_n"), 0.5), (catalogue("superharmonic"), 0.5),
                                  (catalogue("x_n").scaled(2.0), 1.0)])
def test_linear_lower_bound(w, L):
    pts = half_space_samples(2, 1000, seed=4)
    assert linear_lower_bound_check(w, L, pts, 2).passed


def test_linear_lower_bound_fails_for_large_L():
    pts = half_space_samples(2, 1000, seed=4)
    assert not linear_lower_bound_check(catalogue("x_n"), 0.6, pts, 2).passed


@settings(max_examples=25, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(0.2, 5.0), st.integers(0, 1000))
def test_linearity(alpha, beta, R, seed):
    rng = np.random.default_rng(seed)
    w1, w2 = random_polynomial(rng, 2), random_polynomial(rng, 2)
    combo = linear_combination(alpha, w1, beta, w2)
    m = half_sphere_mean(combo, R=R, n=2)
    m1, m2 = half_sphere_mean(w1, R=R, n=2), half_sphere_mean(w2, R=R, n=2)
    expected = alpha * m1.value + beta * m2.value
    slack = m.error + abs(alpha) * m1.error + abs(beta) * m2.error
    assert abs(m.value - expected) <= slack + 1e-12 * max(1.0, abs(m1.value), abs(m2.value))
