import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from shuffle_dp.closed_form import (
    EpsDelta,
    LocalPrivacy,
    approx_dp_bound,
    eps0_for_frequency,
    eps_closed_form,
    eps_generic_clones,
    eps_krr,
    gaussian_sigma,
    max_eps0,
    sgd_accounting,
)
from shuffle_dp.errors import ApplicabilityError, ParameterDomainError


def test_closed_form_spot_values():
    # independent evaluation at 40 digits: 0.0234967749..., 0.00163727675...
    assert eps_closed_form(10**6, 1.0, 1e-6) == pytest.approx(0.02349677490535563, rel=1e-12)
    assert eps_closed_form(10**6, 0.1, 1e-6) == pytest.approx(0.0016372767546991045, rel=1e-12)


def test_closed_form_vanishes_with_eps0():
    assert eps_closed_form(10**4, 1e-12, 1e-6) < 1e-12
    assert eps_closed_form(10**4, 0.0, 1e-6) == 0.0


def test_applicability_limit():
    assert max_eps0(10**4, 1e-8) == pytest.approx(math.log(1e4 / (16 * math.log(2e8))))
    with pytest.raises(ApplicabilityError) as info:
        eps_closed_form(10**4, 4.0, 1e-8)
    assert info.value.max_eps0 == pytest.approx(3.4873, abs=1e-4)


@settings(max_examples=50, deadline=None)
@given(n=st.integers(10**3, 10**9), frac=st.floats(0.01, 0.99), delta=st.floats(1e-12, 1e-2))
def test_closed_form_positive_and_increasing(n, frac, delta):
    top = max_eps0(n, delta)
    if top <= 0.02:
        return
    a, b = frac * top, min(frac * top + 0.01, top)
    lo, hi = eps_closed_form(n, a, delta), eps_closed_form(n, b, delta)
    assert 0.0 < lo < hi


def test_approx_dp_reduces_to_pure():
    res = approx_dp_bound(10**6, LocalPrivacy(1.0), 1e-6)
    assert res == EpsDelta(eps_closed_form(10**6, 1.0, 1e-6), 1e-6, "upper")


def test_approx_dp_example():
    res = approx_dp_bound(10**6, LocalPrivacy(1.0, 1e-12), 1e-6)
    eps = eps_closed_form(10**6, 1.0, 1e-6)
    assert res.eps == eps
    expected = 1e-6 + (math.exp(eps) + 1) * (1 + math.exp(-1.0) / 2) * 1e6 * 1e-12
    assert res.delta == pytest.approx(expected, rel=1e-14)


def test_approx_dp_saturates():
    res = approx_dp_bound(10**6, LocalPrivacy(1.0, 1e-6), 1e-6)
    assert res.delta == 1.0


def test_generic_clones():
    assert eps_generic_clones(10**6, 0.1, 0.0, 1e-6) == 0.0
    expected = math.log(1 + 0.5 * (4 * math.sqrt(2 * math.log(4e6)) / math.sqrt(1e5) + 4 / 1e5))
    assert eps_generic_clones(10**6, 0.1, 0.5, 1e-6) == pytest.approx(expected, rel=1e-14)
    with pytest.raises(ParameterDomainError):
        eps_generic_clones(10**6, 0.5, 0.5, 1e-6)
    with pytest.raises(ApplicabilityError):
        eps_generic_clones(100, 0.01, 0.5, 1e-6)


@pytest.mark.parametrize("eps0", [0.5, 1.0, 3.0])
def test_generic_sqrt_term_ratio(eps0):
    # with p = e^-eps0/3 and q = tanh(eps0/2) the square-root term is sqrt(3/2)
    # times that of the eps0 bound; recover both terms from the outputs
    n, delta = 10**7, 1e-6
    q = math.tanh(eps0 / 2)
    p = math.exp(-eps0) / 3
    generic = math.expm1(eps_generic_clones(n, p, q, delta)) / q - 4 / (p * n)
    eq1 = math.expm1(eps_closed_form(n, eps0, delta)) / q - 8 * math.exp(eps0) / n
    assert generic / eq1 == pytest.approx(math.sqrt(1.5), rel=1e-9)


def test_krr_plugin():
    n, k, e0, d = 10**6, 16, 3.0, 1e-6
    e = math.exp(e0)
    expected = math.log(
        1 + (e - 1) * (4 * math.sqrt(2 * (k + 1) * math.log(4 / d)) / math.sqrt((e + k - 1) * k * n) + 4 * (k + 1) / (k * n))
    )
    assert eps_krr(n, k, e0, d) == pytest.approx(expected, rel=1e-14)
    assert eps_krr(n, k, 1e-12, d) < 1e-12


def test_krr_domain():
    with pytest.raises(ParameterDomainError):
        eps_krr(10**6, 1, 1.0, 1e-6)
    with pytest.raises(ApplicabilityError):
        eps_krr(10**3, 4, 5.0, 1e-6)


def test_frequency_eps0():
    assert eps0_for_frequency(10**6, 0.5, 1e-6) == pytest.approx(5.198, abs=1e-3)
    assert eps0_for_frequency(10**6, 0.001, 1e-6) == pytest.approx(0.01682, abs=1e-5)


def test_frequency_branch_boundary():
    n, d = 10**6, 1e-6
    edge = math.sqrt(math.log(1 / d) / n)
    assert eps0_for_frequency(n, edge, d) == pytest.approx(edge * math.sqrt(n) / (16 * math.sqrt(math.log(1 / d))))


def test_sgd():
    acc = sgd_accounting(10**6, LocalPrivacy(1.0, 1e-8), 1e-6)
    assert acc.sigma == pytest.approx(7.0697, abs=1e-4)
    assert acc.guarantee.eps == approx_dp_bound(10**6, LocalPrivacy(1.0, 1e-8), 1e-6).eps
    assert gaussian_sigma(2.0, 1e-8) == pytest.approx(gaussian_sigma(1.0, 1e-8) / 2)
    with pytest.raises(ParameterDomainError):
        gaussian_sigma(1.0, 0.0)


def test_validation():
    with pytest.raises(ParameterDomainError):
        LocalPrivacy(-1.0)
    with pytest.raises(ParameterDomainError):
        EpsDelta(0.1, 2.0)
    with pytest.raises(ParameterDomainError):
        eps_closed_form(0, 1.0, 1e-6)
