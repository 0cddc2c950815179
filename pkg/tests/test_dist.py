import math
from fractions import Fraction

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import binom_pmf, clone_pmfs
from shuffle_dp.dist import (
    CloneInstance,
    binom_cdf,
    binom_log_tails,
    binom_sf,
    clone_joint_logpmf_column,
    clone_joint_pmf,
    log_binom_pmf,
    log_binom_pmf_array,
    log_binom_range_mass,
)
from shuffle_dp.errors import ParameterDomainError


def test_log_pmf_examples():
    assert log_binom_pmf(2, 0.5, 1) == pytest.approx(math.log(0.5), abs=1e-15)
    assert log_binom_pmf(4, 0.25, 0) == pytest.approx(-1.150728, abs=1e-6)
    assert log_binom_pmf(5, 0.3, -1) == -math.inf


def test_cdf_examples():
    assert binom_cdf(10, 0.3, 10) == 1.0
    assert binom_cdf(10, 0.3, -0.5) == 0.0
    assert binom_cdf(2, 0.25, 1) == pytest.approx(0.9375, abs=1e-15)


@pytest.mark.parametrize("prob", [-0.1, 1.5, float("nan")])
def test_prob_domain(prob):
    with pytest.raises(ParameterDomainError):
        log_binom_pmf(3, prob, 1)
    with pytest.raises(ParameterDomainError):
        binom_cdf(3, prob, 1)


@pytest.mark.parametrize("n", [1, 2, 7, 30, 90])
@pytest.mark.parametrize("p", [Fraction(1, 2), Fraction(1, 3), Fraction(1, 1000), Fraction(997, 1000)])
def test_pmf_matches_fractions(n, p):
    ks = np.arange(n + 1)
    got = log_binom_pmf_array(n, float(p), ks)
    for k in ks:
        exact = binom_pmf(n, p, int(k))
        ref = float(mpmath.log(mpmath.mpf(exact.numerator) / exact.denominator))
        assert got[k] == pytest.approx(ref, rel=1e-13, abs=1e-13)
        assert log_binom_pmf(n, float(p), int(k)) == pytest.approx(ref, rel=1e-13, abs=1e-13)


def test_large_n_pmf_against_mpmath():
    mpmath.mp.dps = 40
    n, p = 10**7, 0.3
    for k in (3 * 10**6, 3 * 10**6 + 4000, 2 * 10**6):
        ref = (
            mpmath.log(mpmath.binomial(n, k))
            + k * mpmath.log(mpmath.mpf(p))
            + (n - k) * mpmath.log(1 - mpmath.mpf(p))
        )
        assert log_binom_pmf(n, p, k) == pytest.approx(float(ref), rel=1e-12)


def test_tails_against_mpmath():
    mpmath.mp.dps = 40
    n, p, k = 2000, 0.1, 300
    terms = [mpmath.binomial(n, j) * mpmath.mpf(p) ** j * (1 - mpmath.mpf(p)) ** (n - j) for j in range(n + 1)]
    lo = mpmath.fsum(terms[: k + 1])
    hi = mpmath.fsum(terms[k + 1 :])
    log_f, log_u = binom_log_tails(n, p, k)
    assert log_f == pytest.approx(float(mpmath.log(lo)), rel=1e-12)
    assert log_u == pytest.approx(float(mpmath.log(hi)), rel=1e-12)


@settings(max_examples=60, deadline=None)
@given(
    n=st.integers(0, 3000),
    p=st.floats(0.0, 1.0),
    k=st.floats(-5.0, 3005.0),
)
def test_cdf_sf_complement(n, p, k):
    total = binom_cdf(n, p, k) + binom_sf(n, p, k)
    assert total == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(n=st.integers(1, 400), p=st.floats(0.01, 0.99), a=st.integers(0, 400), b=st.integers(0, 400))
def test_range_mass_is_pmf_sum(n, p, a, b):
    lo, hi = min(a, b), max(a, b)
    direct = np.exp(log_binom_pmf_array(n, p, np.arange(lo, hi + 1))).sum()
    got = math.exp(log_binom_range_mass(n, p, lo, hi))
    assert got == pytest.approx(direct, rel=1e-11, abs=1e-300)


def test_clone_pmf_hand_value():
    inst = CloneInstance(2, math.log(3))
    assert math.exp(clone_joint_pmf(inst, 0, 0, "P")) == pytest.approx(0.5, abs=1e-15)


@pytest.mark.parametrize("n", [2, 5, 12])
def test_clone_pmf_matches_fractions(n):
    inst = CloneInstance(n, math.log(3))
    P, Q = clone_pmfs(n, Fraction(3))
    for c in range(n):
        col_p = np.exp(clone_joint_logpmf_column(inst, c, "P"))
        col_q = np.exp(clone_joint_logpmf_column(inst, c, "Q"))
        for a in range(c + 2):
            assert col_p[a] == pytest.approx(float(P.get((a, c), 0)), rel=1e-13, abs=1e-300)
            assert col_q[a] == pytest.approx(float(Q.get((a, c), 0)), rel=1e-13, abs=1e-300)


def test_clone_pmf_symmetric_at_zero_eps0():
    inst = CloneInstance(9, 0.0)
    for c in range(9):
        np.testing.assert_array_equal(clone_joint_logpmf_column(inst, c, "P"), clone_joint_logpmf_column(inst, c, "Q"))


@pytest.mark.parametrize("n,eps0", [(40, 0.5), (300, 2.0)])
def test_clone_pmf_normalized(n, eps0):
    inst = CloneInstance(n, eps0)
    total = math.fsum(math.fsum(np.exp(clone_joint_logpmf_column(inst, c, "P"))) for c in range(n))
    assert total == pytest.approx(1.0, abs=1e-12)


def test_clone_pmf_out_of_support():
    inst = CloneInstance(5, 1.0)
    assert clone_joint_pmf(inst, 4, 2, "P") == -math.inf
    assert clone_joint_pmf(inst, 0, 7, "Q") == -math.inf


def test_instance_validation():
    with pytest.raises(ParameterDomainError):
        CloneInstance(0, 1.0)
    with pytest.raises(ParameterDomainError):
        CloneInstance(5, -1.0)
