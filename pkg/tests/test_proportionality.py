import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ell_lab.proportionality import (
    J_scale, ProportionalityCertificate, SampleSpec, certificate_ok, check_condition_19, compute_K,
    eval_HK, eval_hK, eval_J, hk_coefficients, lemma72_ratio_inf, sign_changes,
)
from ell_lab.system_model import Coefficients, Exponents, ProblemInstance, eval_f, eval_g

import oracles
from params import draw_admissible


@pytest.mark.parametrize("co, ex, K", [
    ((3, 1, 1, 1), (0, 1, 1), 2.0),
    ((2, 2, 1, 1), (0, 2, 1), 1.0),
    ((4, 1, 0, 0), (0, 2, 2), 4.0),
])
def test_closed_form_examples(co, ex, K):
    cert = compute_K(Coefficients(*co), Exponents(*ex))
    assert cert.K == pytest.approx(K, rel=1e-14)
    assert cert.source == "closed-form"
    assert cert.unique


def test_root_find_against_bisection_oracle():
    # p=1, q=2, r=1, (a,b,c,d) = (2,1,1,1): J(K) = K^3 + K^2 - K - 2
    co, ex = Coefficients(2, 1, 1, 1), Exponents(1, 2, 1)
    cert = compute_K(co, ex)
    assert cert.source == "root-find"
    assert cert.K == pytest.approx(oracles.cubic_root_bisection(), rel=1e-13)
    assert cert.K == pytest.approx(1.2055694304005904, rel=1e-13)
    assert certificate_ok(cert, co, ex)


def test_against_high_precision_oracle():
    rng = np.random.default_rng(11)
    for _ in range(25):
        co, ex = draw_admissible(rng)
        K = compute_K(co, ex).K
        ref = oracles.K_by_diagonal_balance(*co.at(), ex.p, ex.q, ex.r)
        assert K == pytest.approx(ref, rel=1e-10)


def test_J_negative_near_zero():
    rng = np.random.default_rng(5)
    for _ in range(50):
        co, ex = draw_admissible(rng)
        assert eval_J(1e-6, co, ex) < 0


def test_HK_equals_hK_of_power():
    co, ex = Coefficients(3, 2, 1, 1), Exponents(0.5, 2, 1.5)
    K = compute_K(co, ex).K
    X = np.linspace(0.1, 4, 30)
    np.testing.assert_allclose(eval_HK(K, X, co, ex), eval_hK(K, X ** ex.m, co, ex), rtol=1e-12, atol=1e-12)


def test_hk_branch_assignment():
    co = Coefficients(3, 2, 1, 5)
    hi = hk_coefficients(2.0, co, Exponents(0, 2, 1))
    lo = hk_coefficients(2.0, co, Exponents(1, 2, 0))
    assert (hi.A, hi.B, hi.C, hi.D) == (1, 4, 3, 10)
    assert (lo.A, lo.B, lo.C, lo.D) == (4, 1, 10, 3)


def test_hK_undefined_for_equal_exponents():
    with pytest.raises(ValueError):
        eval_hK(1.0, 1.0, Coefficients(1, 1, 1, 1), Exponents(1, 1, 1))


def test_nonconstant_coefficients_rejected():
    with pytest.raises(ValueError):
        compute_K(Coefficients(lambda x: 1 + 0 * x[..., 0], 1), Exponents(0, 1, 1))


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_swap_duality_and_threshold(seed):
    co, ex = draw_admissible(np.random.default_rng(seed))
    K = compute_K(co, ex).K
    Ks = compute_K(co.swapped(), ex).K
    assert K * Ks == pytest.approx(1.0, rel=1e-10)
    a, b, c, d = co.at()
    if abs((a + d) - (b + c)) > 1e-6 * (a + b + c + d):
        assert (K > 1) == (a + d > b + c)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_diagonal_balance(seed):
    # on the ray u = K v the two reactions are in ratio K
    co, ex = draw_admissible(np.random.default_rng(seed))
    K = compute_K(co, ex).K
    I = ProblemInstance(3, ex, co)
    v = np.array([0.3, 1.0, 2.5])
    f, g = eval_f(K * v, v, I), eval_g(K * v, v, I)
    assert np.allclose(K * g, f, rtol=1e-9, atol=1e-9 * np.abs(f).max())


def test_sign_change_count_on_log_grid():
    count, brackets = sign_changes(Coefficients(3, 1, 1, 1), Exponents(0, 1, 1))
    assert count == 1
    lo, hi = brackets[0]
    assert lo < 2.0 <= hi


def test_equal_case_margins_vanish():
    co, ex = Coefficients(2, 3, 2, 3), Exponents(1, 2, 1)
    cert = compute_K(co, ex)
    assert abs(cert.margin_a) <= 1e-10 and abs(cert.margin_b) <= 1e-10


def test_condition_19_on_examples():
    for co, ex in [((3, 1, 1, 1), (0, 1, 1)), ((2, 2, 1, 1), (0, 2, 1)), ((2, 1, 1, 1), (1, 2, 1))]:
        co, ex = Coefficients(*co), Exponents(*ex)
        rep = check_condition_19(compute_K(co, ex).K, co, ex, SampleSpec(per_axis=60))
        assert rep.passed


def test_condition_19_fails_for_wrong_K():
    co, ex = Coefficients(3, 1, 1, 1), Exponents(0, 1, 1)
    assert not check_condition_19(1.5, co, ex).passed


def test_power_law_minorants():
    assert lemma72_ratio_inf("i", Coefficients(3, 2, 1, 1), Exponents(0, 1, 1)) > 0
    assert lemma72_ratio_inf("ii", Coefficients(2, 1, 1, 0), Exponents(1, 2, 1)) > 0
    with pytest.raises(ValueError):
        lemma72_ratio_inf("i", Coefficients(2, 1, 1, 0), Exponents(1, 2, 1))
    with pytest.raises(ValueError):
        lemma72_ratio_inf("ii", Coefficients(2, 1, 1, 1), Exponents(1, 2, 1))


def test_certificate_json_round_trip():
    cert = compute_K(Coefficients(2, 1, 1, 1), Exponents(1, 2, 1))
    back = ProportionalityCertificate.from_json(cert.to_json())
    assert back.K == cert.K and back.margin_a == cert.margin_a and back.source == cert.source
    assert set(json.loads(cert.to_json())) == {"K", "residual", "margin_a", "margin_b", "unique", "source"}


def test_root_certificate_bound():
    rng = np.random.default_rng(23)
    for _ in range(200):
        co, ex = draw_admissible(rng)
        cert = compute_K(co, ex)
        assert cert.residual <= 1e-13 * J_scale(cert.K, co, ex)


def test_refined_grid_keeps_verdict():
    # the 50-per-axis grid is a subset of the 100-per-axis grid
    co, ex = Coefficients(3, 2, 1, 1), Exponents(0.5, 1, 1)
    K = compute_K(co, ex).K
    coarse = check_condition_19(K, co, ex, SampleSpec(per_axis=50))
    fine = check_condition_19(K, co, ex, SampleSpec(per_axis=100))
    assert coarse.passed and fine.passed
    assert fine.max_signed_product >= coarse.max_signed_product
