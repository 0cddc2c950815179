import math
from fractions import Fraction

import numpy as np
import pytest

from oracles import clone_pmfs
from shuffle_dp.dist import CloneInstance
from shuffle_dp.errors import ParameterDomainError
from shuffle_dp.renyi import (
    RdpCurve,
    advanced_composition,
    default_alphas,
    rdp_clones,
    rdp_clones_curve,
    rdp_clones_exact_small,
    rdp_clones_many,
    rdp_compose,
    rdp_lower_2rr,
    rdp_lower_2rr_curve,
    rdp_to_dp,
)


def test_hand_value_n2():
    # alpha = 2: sum P^2/Q over the five-point support is 19/9
    P, Q = clone_pmfs(2, Fraction(3))
    chi = max(sum(P[k] ** 2 / Q[k] for k in P), sum(Q[k] ** 2 / P[k] for k in P))
    assert chi == Fraction(19, 9)
    inst = CloneInstance(2, math.log(3))
    assert rdp_clones(inst, 2.0).value == pytest.approx(math.log(19 / 9), abs=1e-14)


def test_zero_eps0():
    vals = rdp_clones_many(CloneInstance(40, 0.0), [1.5, 2.0, 64.0])
    assert all(v.value == 0.0 and v.slack == 0.0 for v in vals)


@pytest.mark.parametrize("n,eps0", [(3, 0.7), (30, 2.0), (120, 4.0)])
def test_matches_enumeration(n, eps0):
    inst = CloneInstance(n, eps0)
    alphas = np.array([1.1, 2.0, 7.5, 64.0, 1024.0])
    got = np.array([v.value for v in rdp_clones_many(inst, alphas)])
    np.testing.assert_allclose(got, rdp_clones_exact_small(inst, alphas), atol=1e-12, rtol=1e-12)


def test_truncated_is_upper_bound():
    inst = CloneInstance(5000, 2.0)
    alphas = [2.0, 16.0, 256.0]
    exact = [v.value for v in rdp_clones_many(inst, alphas)]
    approx = rdp_clones_many(inst, alphas, mass_tol=1e-20, stride=None)
    for e, a in zip(exact, approx):
        assert a.upper >= e - 1e-13
        # block bounds take each block's first member, which costs some tightness at large alpha
        assert a.upper <= 1.10 * e


def test_alpha_domain():
    with pytest.raises(ParameterDomainError):
        rdp_clones(CloneInstance(10, 1.0), 1.0)


def test_curve_invariants():
    inst = CloneInstance(300, 3.0)
    curve = rdp_clones_curve(inst)
    eps = [e for _, e in curve.points]
    assert all(b >= a for a, b in zip(eps, eps[1:]))
    assert max(eps) <= 3.0
    assert curve.provenance == "exact"
    with pytest.raises(ParameterDomainError):
        RdpCurve(((2.0, 0.1), (1.5, 0.2)), "upper")


def test_lower_2rr_below_clones():
    for n in (10, 100, 200):
        for a in (2.0, 8.0, 100.0):
            assert rdp_lower_2rr(n, 2.0, a) <= rdp_clones(CloneInstance(n, 2.0), a).upper + 1e-12
    assert rdp_lower_2rr(100, 1e-10, 4.0) < 1e-15
    vals = [e for _, e in rdp_lower_2rr_curve(500, 1.0).points]
    assert all(b >= a - 1e-12 for a, b in zip(vals, vals[1:]))


def test_compose():
    curve = RdpCurve(((2.0, 0.1), (4.0, 0.3)), "upper")
    assert rdp_compose(curve, 1) == curve
    assert rdp_compose(curve, 2).points == ((2.0, 0.2), (4.0, 0.6))
    nested = np.array(rdp_compose(rdp_compose(curve, 3), 5).points)
    np.testing.assert_allclose(nested, np.array(rdp_compose(curve, 15).points), rtol=1e-15)


def test_to_dp_penalty():
    curve = RdpCurve(((1000.0, 2.0),), "upper")
    penalty = math.log(1 / (1e-6 * 1000)) / 999 + math.log(0.999)
    assert penalty == pytest.approx(0.00591, abs=1e-5)
    assert rdp_to_dp(curve, 1e-6) == pytest.approx(2.0 + penalty, rel=1e-14)
    with pytest.raises(ParameterDomainError):
        rdp_to_dp(curve, 1.0)


def test_to_dp_finer_grid_helps():
    inst = CloneInstance(200, 2.0)
    coarse = rdp_clones_curve(inst, [2.0, 16.0, 128.0])
    fine = rdp_clones_curve(inst, default_alphas())
    assert rdp_to_dp(fine, 1e-6) <= rdp_to_dp(coarse, 1e-6)


def test_advanced_composition():
    assert advanced_composition(0.3, 1e-8, 1, 1e-6).eps == pytest.approx(0.3)
    res = advanced_composition(0.01, 1e-10, 10**4, 5e-7)
    assert res.eps <= 10**4 * 0.01
    approx = 0.01 * math.sqrt(2 * 10**4 * math.log(1 / 5e-7))
    assert res.eps == pytest.approx(approx + 10**4 * 0.01 * math.tanh(0.005), rel=1e-12)
    assert res.delta == pytest.approx(1 - (1 - 1e-10) ** 10**4 * (1 - 5e-7), rel=1e-9)


@pytest.mark.parametrize("eps0", [1.0, 4.0])
def test_rdp_route_wins_at_many_reps(eps0):
    from shuffle_dp.renyi import compose_advanced_route, compose_rdp_route

    inst = CloneInstance(10**6, eps0)
    assert compose_rdp_route(inst, 1e-6, 100).eps < compose_advanced_route(inst, 1e-6, 100).eps
