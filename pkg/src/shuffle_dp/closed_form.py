"""Analytic amplification bounds and parameter-selection formulas.

All logarithms are natural.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

from .errors import ApplicabilityError, ParameterDomainError

Bound = Literal["upper", "lower", "exact"]


@dataclass(frozen=True)
class LocalPrivacy:
    eps0: float
    delta0: float = 0.0

    def __post_init__(self):
        if not (self.eps0 >= 0.0) or math.isinf(self.eps0):
            raise ParameterDomainError(f"eps0 must be finite and >= 0, got {self.eps0!r}")
        if not (0.0 <= self.delta0 < 1.0):
            raise ParameterDomainError(f"delta0 must lie in [0, 1), got {self.delta0!r}")


@dataclass(frozen=True)
class EpsDelta:
    """A central (eps, delta) claim and whether it bounds from above or below."""

    eps: float
    delta: float
    direction: Bound = "upper"

    def __post_init__(self):
        if not (self.eps >= 0.0):
            raise ParameterDomainError(f"eps must be >= 0, got {self.eps!r}")
        if not (0.0 <= self.delta <= 1.0):
            raise ParameterDomainError(f"delta must lie in [0, 1], got {self.delta!r}")
        if self.direction not in ("upper", "lower", "exact"):
            raise ParameterDomainError(f"unknown direction {self.direction!r}")


def _check_n_delta(n: int, delta: float) -> None:
    if int(n) != n or n < 1:
        raise ParameterDomainError(f"n must be a positive integer, got {n!r}")
    if not (0.0 < delta <= 1.0):
        raise ParameterDomainError(f"delta must lie in (0, 1], got {delta!r}")


def max_eps0(n: int, delta: float) -> float:
    """Largest eps0 for which the eps0-based closed forms apply."""
    _check_n_delta(n, delta)
    return math.log(n / (16.0 * math.log(2.0 / delta)))


def _require_applicable(n: int, eps0: float, delta: float) -> None:
    limit = max_eps0(n, delta)
    if eps0 > limit:
        raise ApplicabilityError(
            f"eps0={eps0:g} exceeds the admissible ln(n/(16 ln(2/delta)))={limit:.6g}",
            max_eps0=limit,
        )


def eps_closed_form(n: int, eps0: float, delta: float) -> float:
    """Central epsilon after shuffling ``n`` reports of an eps0-DP randomizer."""
    _check_n_delta(n, delta)
    if not (eps0 >= 0.0):
        raise ParameterDomainError("eps0 must be >= 0")
    _require_applicable(n, eps0, delta)
    e0 = math.exp(eps0)
    shrink = math.tanh(eps0 / 2.0)  # (e^eps0 - 1)/(e^eps0 + 1)
    body = 8.0 * math.sqrt(e0 * math.log(4.0 / delta)) / math.sqrt(n) + 8.0 * e0 / n
    return math.log1p(shrink * body)


def approx_dp_bound(n: int, lp: LocalPrivacy, delta: float) -> EpsDelta:
    """Shuffled guarantee for (eps0, delta0)-DP local randomizers."""
    eps = eps_closed_form(n, lp.eps0, delta)
    extra = (math.exp(eps) + 1.0) * (1.0 + math.exp(-lp.eps0) / 2.0) * n * lp.delta0
    return EpsDelta(eps, min(1.0, delta + extra), "upper")


def eps_generic_clones(n: int, p: float, q: float, delta: float) -> float:
    """Bound for randomizers that put mass ``p`` on each of the two clone
    components, with ``q`` the mixing weight of the distinguishing part."""
    _check_n_delta(n, delta)
    if not (0.0 < p <= 1.0 / 3.0):
        raise ParameterDomainError(f"p must lie in (0, 1/3], got {p!r}")
    if not (0.0 <= q < 1.0):
        raise ParameterDomainError(f"q must lie in [0, 1), got {q!r}")
    need = 8.0 * math.log(2.0 / delta) / n
    if p < need:
        raise ApplicabilityError(f"p={p:g} below the required 8 ln(2/delta)/n={need:.6g}")
    pn = p * n
    return math.log1p(q * (4.0 * math.sqrt(2.0 * math.log(4.0 / delta)) / math.sqrt(pn) + 4.0 / pn))


def eps_krr(n: int, k: int, eps0: float, delta: float) -> float:
    """Shuffled epsilon of k-ary randomized response."""
    _check_n_delta(n, delta)
    if int(k) != k or k < 2:
        raise ParameterDomainError(f"k must be an integer >= 2, got {k!r}")
    if not (eps0 >= 0.0):
        raise ParameterDomainError("eps0 must be >= 0")
    _require_applicable(n, eps0, delta)
    e0 = math.exp(eps0)
    root = 4.0 * math.sqrt(2.0 * (k + 1) * math.log(4.0 / delta)) / math.sqrt((e0 + k - 1) * k * n)
    return math.log1p(math.expm1(eps0) * (root + 4.0 * (k + 1) / (k * n)))


def eps0_for_frequency(n: int, eps: float, delta: float) -> float:
    """Local epsilon to run the frequency oracle at for a central target ``eps``."""
    if int(n) != n or n < 1:
        raise ParameterDomainError(f"n must be a positive integer, got {n!r}")
    if not (0.0 < eps < 1.0):
        raise ParameterDomainError(f"eps must lie in (0, 1), got {eps!r}")
    if not (0.0 < delta < 1.0):
        raise ParameterDomainError(f"delta must lie in (0, 1), got {delta!r}")
    log_inv = math.log(1.0 / delta)
    if eps <= math.sqrt(log_inv / n):
        return eps * math.sqrt(n) / (16.0 * math.sqrt(log_inv))
    return math.log(eps * eps * n / (100.0 * log_inv))


@dataclass(frozen=True)
class SgdAccounting:
    guarantee: EpsDelta
    sigma: float
    note: str = "delta uses the exact (e^eps+1)(1+e^-eps0/2) n delta0 term"


def gaussian_sigma(eps0: float, delta0: float) -> float:
    """Noise multiplier making one clipped gradient step (eps0, delta0)-DP."""
    if not (eps0 > 0.0):
        raise ParameterDomainError("eps0 must be > 0")
    if not (0.0 < delta0 < 1.0):
        raise ParameterDomainError("delta0 must lie in (0, 1) for Gaussian noise")
    return (1.0 + math.sqrt(2.0 * math.log(1.0 / delta0))) / eps0


def sgd_accounting(n: int, lp: LocalPrivacy, delta: float) -> SgdAccounting:
    """Privacy of one shuffled pass of noisy SGD over ``n`` examples."""
    sigma = gaussian_sigma(lp.eps0, lp.delta0)
    return SgdAccounting(approx_dp_bound(n, lp, delta), sigma)
