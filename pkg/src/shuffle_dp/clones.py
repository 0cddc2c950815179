"""Numerical amplification bound for shuffled eps0-DP reports.

The hockey-stick divergence between the two clone distributions is
accumulated over blocks of C values (``delta_upper``), using the closed
per-C integral from ``stripe_divergence`` and its monotonicity in C to bound
each block by its endpoints. ``eps_upper`` then binary-searches epsilon.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Literal, Sequence

import numpy as np

from .dist import (
    CloneInstance,
    binom_log_tails,
    clone_joint_logpmf_column,
    log_binom_pmf,
    log_binom_range_mass,
)
from .errors import ParameterDomainError

Direction = Literal["+", "-"]

BUDGET_EXCEEDED = "budget-exceeded"
REMAINDER_NEGLIGIBLE = "remainder-negligible"
COMPLETE = "complete"

DEFAULT_ITERATIONS = 40
ORACLE_CAP = 2000


def default_stride(n: int) -> int:
    return max(1, n // 5000)


@dataclass(frozen=True)
class SearchConfig:
    """Knobs for the striding accumulator and the binary search.

    ``stride=None`` picks ``default_stride(n)``. ``remainder_tol`` bounds the
    uncovered C-mass at which the remainder exit may fire.
    """

    iterations: int = DEFAULT_ITERATIONS
    stride: int | None = None
    delta_budget: float = 1.0
    remainder_tol: float = 1e-15

    def __post_init__(self):
        if self.iterations < 0:
            raise ParameterDomainError("iterations must be >= 0")
        if self.stride is not None and self.stride < 1:
            raise ParameterDomainError("stride must be >= 1")
        if not (0.0 <= self.delta_budget <= 1.0):
            raise ParameterDomainError("delta_budget must lie in [0, 1]")
        if self.remainder_tol < 0:
            raise ParameterDomainError("remainder_tol must be >= 0")

    def stride_for(self, n: int) -> int:
        return self.stride if self.stride is not None else default_stride(n)


@dataclass(frozen=True)
class DivergenceEstimate:
    delta_p: float
    delta_q: float
    mass_covered: float
    terminated: str
    value: float


def _log_ratio_threshold(eps: float, q: float, q_comp: float) -> float:
    # ln[(e^eps q - (1-q)) / (q - e^eps (1-q))]
    e = math.exp(eps)
    num = e * q - q_comp
    den = q - e * q_comp
    if den <= 0.0:
        raise ParameterDomainError("stripe divergence requires eps < eps0")
    return math.log(num) - math.log(den)


def stripe_divergence(c: int, eps: float, inst: CloneInstance, direction: Direction = "+") -> float:
    """Divergence of the clone pair conditioned on C = c, in one direction.

    Returns the integral over the count of max{0, P - e^eps Q} (``"+"``) or
    max{0, Q - e^eps P} (``"-"``) given C = c, i.e. before weighting by
    Pr(C = c). Requires ``eps < inst.eps0``.
    """
    if direction not in ("+", "-"):
        raise ParameterDomainError(f"direction must be '+' or '-', got {direction!r}")
    if c < 0:
        raise ParameterDomainError("c must be nonnegative")
    if eps < 0:
        raise ParameterDomainError("eps must be nonnegative")
    if eps >= inst.eps0:
        raise ParameterDomainError("stripe divergence requires eps < eps0")
    q, qc = inst.q, inst.q_comp
    lr = _log_ratio_threshold(eps, q, qc)
    if direction == "+":
        beta = 1.0 / (math.exp(lr) + 1.0) if lr < 700 else 0.0
    else:
        beta = 1.0 / (math.exp(-lr) + 1.0) if lr < 700 else 1.0
    tau = beta * (c + 1)
    e = math.exp(eps)
    log_f, log_u = binom_log_tails(c, 0.5, tau)
    # shifting the cut by one moves exactly the mass at floor(tau)
    at_cut = math.exp(log_binom_pmf(c, 0.5, math.floor(tau))) if tau >= 0 else 0.0
    if direction == "+":
        f_tau = math.exp(log_f)
        f_prev = max(f_tau - at_cut, 0.0)
        gamma_p = q * f_tau + qc * f_prev
        gamma_q = qc * f_tau + q * f_prev
        value = gamma_p - e * gamma_q
    else:
        # upper tails directly, 1 - gamma without cancellation
        u_tau = math.exp(log_u)
        u_prev = min(u_tau + at_cut, 1.0)
        rest_q = qc * u_tau + q * u_prev
        rest_p = q * u_tau + qc * u_prev
        value = rest_q - e * rest_p
    return max(value, 0.0)


def _block_order(n_blocks: int, center: int) -> list[int]:
    order = [center]
    for d in range(1, n_blocks):
        for t in (center - d, center + d):
            if 0 <= t < n_blocks:
                order.append(t)
    return order


def delta_upper(inst: CloneInstance, eps: float, cfg: SearchConfig | None = None) -> DivergenceEstimate:
    """Upper bound on the two-sided hockey-stick divergence at level e^eps.

    Blocks of ``stride`` consecutive C values are visited starting from the
    block holding the mode of C and expanding outward. A return with
    ``terminated == "budget-exceeded"`` carries ``value = delta_budget`` and
    means the divergence is larger than the budget.
    """
    cfg = cfg or SearchConfig()
    if eps < 0:
        raise ParameterDomainError("eps must be nonnegative")
    if eps >= inst.eps0:
        return DivergenceEstimate(0.0, 0.0, 1.0, COMPLETE, 0.0)

    n = inst.n
    stride = cfg.stride_for(n)
    n_c = n  # C ranges over 0..n-1
    n_blocks = (n_c + stride - 1) // stride
    mode = min(math.floor(n * inst.p), n_c - 1)
    order = _block_order(n_blocks, mode // stride)

    delta_p = delta_q = 0.0
    lo_block = hi_block = None
    remainder = 1.0
    covered = []
    for t in order:
        c_min = t * stride
        c_max = min(c_min + stride - 1, n_c - 1)
        mass = math.exp(log_binom_range_mass(n - 1, inst.p, c_min, c_max))
        covered.append(mass)
        if mass > 0.0:
            b_plus = max(stripe_divergence(c_min, eps, inst, "+"), stripe_divergence(c_max, eps, inst, "+"))
            b_minus = max(stripe_divergence(c_min, eps, inst, "-"), stripe_divergence(c_max, eps, inst, "-"))
            delta_p += mass * b_plus
            delta_q += mass * b_minus

        lo_block = t if lo_block is None else min(lo_block, t)
        hi_block = t if hi_block is None else max(hi_block, t)
        remainder = max(1.0 - math.fsum(covered), 0.0)
        if remainder < 1e-6:
            # near the exit thresholds the remainder must not be underestimated
            remainder = _uncovered_mass(inst, lo_block * stride, min((hi_block + 1) * stride - 1, n_c - 1))

        if max(delta_p, delta_q) > cfg.delta_budget:
            return DivergenceEstimate(delta_p, delta_q, 1.0 - remainder, BUDGET_EXCEEDED, cfg.delta_budget)
        if remainder == 0.0:
            break
        top = max(delta_p, delta_q)
        settled = remainder < min(delta_p, delta_q) or top + remainder < cfg.delta_budget
        if settled and remainder <= cfg.remainder_tol:
            value = max(delta_p, delta_q) + remainder
            return DivergenceEstimate(delta_p, delta_q, 1.0 - remainder, REMAINDER_NEGLIGIBLE, value)

    return DivergenceEstimate(delta_p, delta_q, 1.0, COMPLETE, max(delta_p, delta_q))


def _uncovered_mass(inst: CloneInstance, c_lo: int, c_hi: int) -> float:
    below = math.exp(binom_log_tails(inst.n - 1, inst.p, c_lo - 1)[0]) if c_lo > 0 else 0.0
    above = math.exp(binom_log_tails(inst.n - 1, inst.p, c_hi)[1])
    return below + above


def delta_exact_small(inst: CloneInstance, eps: float, cap: int = ORACLE_CAP) -> float:
    """Brute-force hockey-stick divergence over the full (count, C) support.

    Deliberately independent of the stripe/threshold machinery; O(n^2).
    """
    if inst.n > cap:
        raise ParameterDomainError(f"oracle refuses n={inst.n} above cap {cap}")
    if eps < 0:
        raise ParameterDomainError("eps must be nonnegative")
    scale = math.exp(eps)
    fwd, bwd = [], []
    for c in range(inst.n):
        p_col = np.exp(clone_joint_logpmf_column(inst, c, "P"))
        q_col = np.exp(clone_joint_logpmf_column(inst, c, "Q"))
        fwd.append(np.maximum(p_col - scale * q_col, 0.0))
        bwd.append(np.maximum(q_col - scale * p_col, 0.0))
    return max(math.fsum(np.concatenate(fwd)), math.fsum(np.concatenate(bwd)))


def binary_search_eps(
    eps0: float,
    delta: float,
    iterations: int,
    delta_of_eps: Callable[[float], float],
    *,
    lower: bool = False,
) -> float:
    """Bisect [0, eps0] on ``delta_of_eps(eps) < delta``.

    Returns the right endpoint (an upper bound when ``delta_of_eps`` never
    underestimates), or the left endpoint when ``lower`` is set.
    """
    left, right = 0.0, eps0
    for _ in range(iterations):
        mid = 0.5 * (left + right)
        if delta_of_eps(mid) < delta:
            right = mid
        else:
            left = mid
    return left if lower else right


def eps_upper(inst: CloneInstance, delta: float, cfg: SearchConfig | None = None) -> float:
    """Smallest certified epsilon (to bisection resolution) at level ``delta``."""
    if not (0.0 < delta <= 1.0):
        raise ParameterDomainError("delta must lie in (0, 1]")
    cfg = replace(cfg or SearchConfig(), delta_budget=delta)
    return binary_search_eps(inst.eps0, delta, cfg.iterations, lambda e: delta_upper(inst, e, cfg).value)


def monotone_envelope(ns: Sequence[int], eps: Sequence[float]) -> list[float]:
    """Running minimum of eps over increasing n, returned in the input order.

    Valid because the clone pair at n' > n is a post-processing of the pair
    at n, so a bound certified at n also holds at every n' > n.
    """
    order = sorted(range(len(ns)), key=lambda i: ns[i])
    out = list(eps)
    best = math.inf
    for i in order:
        best = min(best, eps[i])
        out[i] = best
    return out
