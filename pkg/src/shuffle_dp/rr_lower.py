"""Exact privacy of shuffled binary randomized response on one neighboring pair.

The pair is all-zeros versus a single one. The shuffled output reduces to
the count of ones: c0 ~ Bin(n, r) and c1 ~ Bin(n-1, r) + Bern(1-r) with
r = 1/(e^eps0 + 1). Their likelihood ratio has the closed form

    c1(c)/c0(c) = [r^2 (n - c) + (1-r)^2 c] / (n r (1-r)),

so every divergence is a single pass over log c0 and this ratio. All
divergences are evaluated in log space; deep tail sweeps reach deltas far
below the double-precision range.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from decimal import Decimal
from functools import cached_property
from typing import Sequence

import numpy as np

from .clones import DEFAULT_ITERATIONS, binary_search_eps
from .dist import binom_log_tails, log_binom_pmf_array
from .errors import ParameterDomainError

# Dense evaluation over the full support below this n; above it the support
# is truncated to a window whose excluded mass is certified via tail sums.
DENSE_LIMIT = 200_000


def _check(n: int, eps0: float) -> None:
    if int(n) != n or n < 1:
        raise ParameterDomainError(f"n must be a positive integer, got {n!r}")
    if not (eps0 >= 0.0) or math.isinf(eps0):
        raise ParameterDomainError(f"eps0 must be finite and >= 0, got {eps0!r}")


@dataclass(frozen=True)
class RrCountPair:
    n: int
    eps0: float

    def __post_init__(self):
        _check(self.n, self.eps0)
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "eps0", float(self.eps0))

    @cached_property
    def flip(self) -> float:
        """Probability that a report is flipped, 1/(e^eps0 + 1)."""
        return 1.0 / (1.0 + math.exp(self.eps0))

    @cached_property
    def keep(self) -> float:
        return 1.0 / (1.0 + math.exp(-self.eps0))

    def log_pmf0(self, c) -> np.ndarray:
        return log_binom_pmf_array(self.n, self.flip, c)

    def log_ratio(self, c) -> np.ndarray:
        """ln c1(c)/c0(c)."""
        c = np.asarray(c, dtype=float)
        r, s, n = self.flip, self.keep, self.n
        return np.log(r * r * (n - c) + s * s * c) - math.log(n * r * s)

    def log_pmf1(self, c) -> np.ndarray:
        return self.log_pmf0(c) + self.log_ratio(c)

    @property
    def support(self) -> np.ndarray:
        return np.arange(self.n + 1)

    @property
    def pmf0(self) -> np.ndarray:
        return np.exp(self.log_pmf0(self.support))

    @property
    def pmf1(self) -> np.ndarray:
        return np.exp(self.log_pmf1(self.support))

    def window(self, log_mass_tol: float) -> tuple[np.ndarray, float]:
        """Counts to evaluate, and an upper bound on the divergence mass left out.

        ``log_mass_tol = -inf`` requests the full support.
        """
        n = self.n
        if log_mass_tol == -math.inf or n <= DENSE_LIMIT:
            return self.support, 0.0
        sd = math.sqrt(n * self.flip * self.keep)
        mean = n * self.flip
        z = math.sqrt(2.0 * (-log_mass_tol + 5.0))
        while True:
            lo = max(0, math.floor(mean - z * sd) - 1)
            hi = min(n, math.ceil(mean + z * sd) + 1)
            # dropping counts outside [lo, hi]: c0 mass and c1 mass bound each direction
            out0 = _logaddexp(
                binom_log_tails(n, self.flip, lo - 1)[0] if lo > 0 else -math.inf,
                binom_log_tails(n, self.flip, hi)[1],
            )
            out1 = _logaddexp(
                binom_log_tails(n - 1, self.flip, lo - 1)[0] if lo > 0 else -math.inf,
                binom_log_tails(n - 1, self.flip, hi - 1)[1],
            )
            slack_log = max(out0, out1)
            if slack_log <= log_mass_tol or (lo == 0 and hi == n):
                return np.arange(lo, hi + 1), math.exp(slack_log)
            z *= 1.5


def _logaddexp(a: float, b: float) -> float:
    return float(np.logaddexp(a, b))


def _log_hockey_stick(pair: RrCountPair, eps: float, counts: np.ndarray) -> float:
    """ln of max over directions of sum max{c_i - e^eps c_j, 0} over ``counts``."""
    lp0 = pair.log_pmf0(counts)
    lr = pair.log_ratio(counts)
    # c0 - e^eps c1 = c0 (1 - e^(eps + lr)),   c1 - e^eps c0 = c0 e^lr (1 - e^(eps - lr))
    fwd_mask = eps + lr < 0
    bwd_mask = lr - eps > 0
    fwd = lp0[fwd_mask] + np.log(-np.expm1(eps + lr[fwd_mask]))
    bwd = lp0[bwd_mask] + lr[bwd_mask] + np.log(-np.expm1(eps - lr[bwd_mask]))
    return max(_lse(fwd), _lse(bwd))


def _lse(values: np.ndarray) -> float:
    values = values[np.isfinite(values)]
    if values.size == 0:
        return -math.inf
    top = float(values.max())
    return top + math.log(float(np.sum(np.exp(values - top))))


def rr_log_delta(n: int, eps0: float, eps: float, log_mass_tol: float = -math.inf) -> tuple[float, float]:
    """(ln of the divergence over the evaluated window, certified slack).

    The first component never exceeds the true log divergence; adding the
    slack (in linear scale) never falls below it.
    """
    if eps < 0:
        raise ParameterDomainError("eps must be nonnegative")
    pair = RrCountPair(n, eps0)
    if eps >= eps0:
        return -math.inf, 0.0
    counts, slack = pair.window(log_mass_tol)
    return _log_hockey_stick(pair, eps, counts), slack


def rr_delta_exact(n: int, eps0: float, eps: float, mass_tol: float = 0.0) -> float:
    """Hockey-stick divergence between the shuffled count distributions.

    With the default ``mass_tol=0`` the full support is used for n up to
    ``DENSE_LIMIT``; otherwise the reported value includes the certified
    slack for truncated counts.
    """
    log_tol = math.log(mass_tol) if mass_tol > 0 else -math.inf
    log_val, slack = rr_log_delta(n, eps0, eps, log_tol)
    return min(1.0, math.exp(log_val) + slack)


def eps_lower_2rr(
    n: int,
    eps0: float,
    delta: float | None = None,
    iterations: int = DEFAULT_ITERATIONS,
    *,
    log_delta: float | None = None,
) -> float:
    """Certified lower bound on the shuffled-2RR epsilon at level delta.

    Pass ``log_delta`` instead of ``delta`` for targets below ~1e-308.
    """
    _check(n, eps0)
    if (delta is None) == (log_delta is None):
        raise ParameterDomainError("pass exactly one of delta and log_delta")
    if log_delta is None:
        if not (0.0 < delta <= 1.0):
            raise ParameterDomainError("delta must lie in (0, 1]")
        log_delta = math.log(delta)
    if log_delta > 0.0:
        raise ParameterDomainError("delta must be <= 1")
    if iterations < 0:
        raise ParameterDomainError("iterations must be >= 0")
    # the windowed sum underestimates the divergence, so the left endpoint stays sound
    log_tol = log_delta - 20.0 * math.log(10.0)
    return binary_search_eps(
        eps0,
        log_delta,
        iterations,
        lambda e: rr_log_delta(n, eps0, e, log_tol)[0],
        lower=True,
    )


@dataclass(frozen=True)
class TailPoint:
    log_delta: float
    eps: float

    @property
    def delta(self) -> float:
        return math.exp(self.log_delta)


def log_delta_grid(delta_max, delta_min, points: int) -> list[float]:
    """Descending, log-spaced natural-log deltas between two bounds.

    Bounds may be floats or decimal strings such as ``"1e-600"``.
    """
    hi, lo = _ln_decimal(delta_max), _ln_decimal(delta_min)
    if points < 1:
        raise ParameterDomainError("points must be >= 1")
    if not (lo <= hi <= 0.0):
        raise ParameterDomainError("need 0 < delta_min <= delta_max <= 1")
    if points == 1:
        return [hi]
    return list(np.linspace(hi, lo, points))


def _ln_decimal(x) -> float:
    d = Decimal(str(x))
    if d <= 0:
        raise ParameterDomainError(f"delta must be positive, got {x!r}")
    return float(d.ln())


def tail_sweep(
    n: int,
    eps0: float,
    delta_grid: Sequence[float] | None = None,
    *,
    log_delta_grid: Sequence[float] | None = None,
    iterations: int = DEFAULT_ITERATIONS,
) -> list[TailPoint]:
    """Lower-bound epsilon for each delta of a descending grid."""
    if (delta_grid is None) == (log_delta_grid is None):
        raise ParameterDomainError("pass exactly one of delta_grid and log_delta_grid")
    if log_delta_grid is None:
        if any(not (0.0 < d < 1.0) for d in delta_grid):
            raise ParameterDomainError("deltas must lie in (0, 1)")
        log_delta_grid = [math.log(d) for d in delta_grid]
    grid = [float(x) for x in log_delta_grid]
    if not grid:
        raise ParameterDomainError("delta grid must be nonempty")
    if len(set(grid)) != len(grid):
        raise ParameterDomainError("delta grid values must be distinct")
    return [TailPoint(ld, eps_lower_2rr(n, eps0, log_delta=ld, iterations=iterations)) for ld in grid]


def tail_transition(points: Sequence[TailPoint], eps0: float, rel_tol: float = 1e-3) -> TailPoint | None:
    """First point (in grid order) at which epsilon reaches (1 - rel_tol) eps0."""
    target = (1.0 - rel_tol) * eps0
    for pt in points:
        if pt.eps >= target:
            return pt
    return None
