"""Log-space binomial primitives and the clone-pair joint pmf.

Binomial masses are evaluated with Loader's saddle-point expansion
(Stirling-error plus deviance terms), which keeps full relative precision
for n up to ~1e9 where naive ``lgamma`` differences lose 8+ digits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Literal

import numpy as np
from scipy.special import gammaln

from .errors import ParameterDomainError

Side = Literal["P", "Q"]

_LN_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)
_LN_2PI = math.log(2.0 * math.pi)

# Terms this many nats below the running maximum are dropped from tail sums;
# log-concavity bounds what is left behind (see _tail_log_sum).
_TAIL_CUT = 50.0


def _check_prob(prob: float) -> None:
    if not (0.0 <= prob <= 1.0) or math.isnan(prob):
        raise ParameterDomainError(f"probability must lie in [0, 1], got {prob!r}")


def _stirlerr(x: np.ndarray) -> np.ndarray:
    """ln(x!) - [(x + 1/2) ln x - x + ln sqrt(2 pi)] for x >= 1."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    small = x <= 15.0
    if np.any(small):
        xs = x[small]
        out[small] = gammaln(xs + 1.0) - (xs + 0.5) * np.log(xs) + xs - _LN_SQRT_2PI
    big = ~small
    if np.any(big):
        xb = x[big]
        nn = xb * xb
        s0, s1, s2, s3, s4 = 1 / 12, 1 / 360, 1 / 1260, 1 / 1680, 1 / 1188
        val = (s0 - s1 / nn) / xb
        for cut, series in (
            (500, lambda v, w: (s0 - (s1 - s2 / w) / w) / v),
            (80, lambda v, w: (s0 - (s1 - (s2 - s3 / w) / w) / w) / v),
            (35, lambda v, w: (s0 - (s1 - (s2 - (s3 - s4 / w) / w) / w) / w) / v),
        ):
            sel = xb <= cut
            if not np.any(sel):
                break
            val[sel] = series(xb[sel], nn[sel])
        out[big] = val
    return out


def _bd0(x: np.ndarray, mu) -> np.ndarray:
    """Deviance term x ln(x/mu) + mu - x, stable when x is close to mu."""
    x = np.asarray(x, dtype=float)
    mu = np.broadcast_to(np.asarray(mu, dtype=float), x.shape)
    v = (x - mu) / (x + mu)
    close = np.abs(v) < 0.05
    with np.errstate(divide="ignore", invalid="ignore"):
        out = x * np.log(x / mu) + mu - x
    if close.any():
        xc, vc = x[close], v[close]
        s = (xc - mu[close]) * vc
        ej = 2.0 * xc * vc
        v2 = vc * vc
        top = float(v2.max())
        # terms shrink by v^2 each step; stop once below double resolution
        steps = 1 if top == 0.0 else min(200, max(1, math.ceil(-40.0 / math.log(top))))
        for j in range(1, steps + 1):
            ej = ej * v2
            s = s + ej / (2 * j + 1)
        out[close] = s
    return out


def _bd0_scalar(x: float, mu: float) -> float:
    v = (x - mu) / (x + mu)
    if abs(v) >= 0.05:
        return x * math.log(x / mu) + mu - x
    s = (x - mu) * v
    ej = 2.0 * x * v
    v2 = v * v
    j = 1
    while True:
        ej *= v2
        s_next = s + ej / (2 * j + 1)
        if s_next == s:
            return s
        s = s_next
        j += 1


def _stirlerr_scalar(x: float) -> float:
    if x <= 15.0:
        return math.lgamma(x + 1.0) - (x + 0.5) * math.log(x) + x - _LN_SQRT_2PI
    nn = x * x
    s0, s1, s2, s3, s4 = 1 / 12, 1 / 360, 1 / 1260, 1 / 1680, 1 / 1188
    if x > 500:
        return (s0 - s1 / nn) / x
    if x > 80:
        return (s0 - (s1 - s2 / nn) / nn) / x
    if x > 35:
        return (s0 - (s1 - (s2 - s3 / nn) / nn) / nn) / x
    return (s0 - (s1 - (s2 - (s3 - s4 / nn) / nn) / nn) / nn) / x


def _log_binom_pmf_scalar(n: int, prob: float, k: int) -> float:
    if k < 0 or k > n:
        return -math.inf
    if n == 0:
        return 0.0
    comp = 1.0 - prob
    if prob == 0.0:
        return 0.0 if k == 0 else -math.inf
    if prob == 1.0:
        return 0.0 if k == n else -math.inf
    nf = float(n)
    if k == 0:
        return -_bd0_scalar(nf, nf * comp) - nf * prob if prob < 0.1 else nf * math.log1p(-prob)
    if k == n:
        return -_bd0_scalar(nf, nf * prob) - nf * comp if comp < 0.1 else nf * math.log(prob)
    x = float(k)
    lc = (
        _stirlerr_scalar(nf)
        - _stirlerr_scalar(x)
        - _stirlerr_scalar(nf - x)
        - _bd0_scalar(x, nf * prob)
        - _bd0_scalar(nf - x, nf * comp)
    )
    lf = _LN_2PI + math.log(x) + math.log1p(-x / nf)
    return lc - 0.5 * lf


def log_binom_pmf_array(n: int, prob: float, k) -> np.ndarray:
    """Vectorised ``log_binom_pmf`` over an array of indices ``k``."""
    _check_prob(prob)
    if n < 0:
        raise ParameterDomainError(f"n must be nonnegative, got {n}")
    k = np.atleast_1d(np.asarray(k, dtype=float))
    out = np.full(k.shape, -np.inf)
    inside = (k >= 0) & (k <= n)
    if not np.any(inside):
        return out
    if n == 0:
        out[inside] = 0.0
        return out
    comp = 1.0 - prob
    if prob == 0.0:
        out[k == 0] = 0.0
        return out
    if prob == 1.0:
        out[k == n] = 0.0
        return out

    nf = float(n)
    lo = inside & (k == 0)
    hi = inside & (k == n)
    mid = inside & ~lo & ~hi
    if lo.any():
        out[lo] = _log_binom_pmf_scalar(n, prob, 0)
    if hi.any():
        out[hi] = _log_binom_pmf_scalar(n, prob, n)
    if mid.any():
        x = k[mid]
        lc = (
            _stirlerr_scalar(nf)
            - _stirlerr(x)
            - _stirlerr(nf - x)
            - _bd0(x, nf * prob)
            - _bd0(nf - x, nf * comp)
        )
        lf = _LN_2PI + np.log(x) + np.log1p(-x / nf)
        out[mid] = lc - 0.5 * lf
    return out


def log_binom_pmf(n: int, prob: float, k: int) -> float:
    """ln Pr(Bin(n, prob) = k); ``-inf`` outside ``0 <= k <= n``."""
    _check_prob(prob)
    if n < 0:
        raise ParameterDomainError(f"n must be nonnegative, got {n}")
    return _log_binom_pmf_scalar(int(n), float(prob), k)


def _logsumexp(values: np.ndarray) -> float:
    if values.size == 0:
        return -math.inf
    top = float(np.max(values))
    if top == -math.inf:
        return -math.inf
    shifted = np.exp(values - top)
    # pairwise summation for long arrays; exact fsum when cheap
    total = math.fsum(shifted) if shifted.size <= 512 else float(np.sum(shifted))
    return top + math.log(total)


def _walk_logs(n: int, prob: float, start: int, idx: np.ndarray, step: int) -> np.ndarray:
    """Log masses along ``idx`` (consecutive, from ``start``) via term ratios.

    One saddle-point evaluation at ``start``; every further term follows from
    pmf(k-1)/pmf(k) = k (1-p) / ((n-k+1) p), so the relative error grows only
    by a few ulps per step.
    """
    k = idx[:-1].astype(float)
    if step < 0:
        ratio = (k / (n - k + 1.0)) * ((1.0 - prob) / prob)
    else:
        ratio = ((n - k) / (k + 1.0)) * (prob / (1.0 - prob))
    with np.errstate(divide="ignore"):
        steps = np.log(ratio)
    out = np.empty(idx.size)
    out[0] = _log_binom_pmf_scalar(n, prob, start)
    np.cumsum(steps, out=out[1:])
    out[1:] += out[0]
    return out


def _tail_log_sum(n: int, prob: float, start: int, step: int) -> float:
    """Log of sum_{j} pmf(start + step*j) over the support, walking away from the mode.

    Requires the walk to be monotone decreasing in pmf (true for the lighter
    tail of a log-concave pmf), so the first term is the largest.
    """
    sd = math.sqrt(n * prob * (1.0 - prob))
    width = max(64, int(11.0 * sd))
    end_limit = -1 if step < 0 else n + 1
    while True:
        if step < 0:
            stop = max(start - width, end_limit)
            idx = np.arange(start, stop, -1)
        else:
            stop = min(start + width, end_limit)
            idx = np.arange(start, stop)
        logs = _walk_logs(n, prob, start, idx, step)
        exhausted = stop == end_limit
        if exhausted or logs.size < 2:
            return _logsumexp(logs)
        head = float(logs[0])
        last, prev = float(logs[-1]), float(logs[-2])
        ratio_log = last - prev
        # log-concave: remaining terms <= last * r / (1 - r) with r = last/prev
        if ratio_log < 0 and last - head < -_TAIL_CUT:
            remainder = last + ratio_log - math.log(-math.expm1(ratio_log))
            if remainder - head < -_TAIL_CUT:
                return _logsumexp(logs)
        width *= 4


def binom_log_tails(n: int, prob: float, k: float) -> tuple[float, float]:
    """(ln Pr(Bin <= floor(k)), ln Pr(Bin > floor(k))).

    The lighter tail is summed term by term in log space; the heavier one
    is its complement.
    """
    _check_prob(prob)
    if math.isnan(k):
        raise ParameterDomainError("threshold must not be NaN")
    if k < 0:
        return -math.inf, 0.0
    m = math.floor(k)
    if m >= n:
        return 0.0, -math.inf
    if prob == 0.0:
        return 0.0, -math.inf
    if prob == 1.0:
        return -math.inf, 0.0
    mode = math.floor((n + 1) * prob)
    if m < mode:
        light = _tail_log_sum(n, prob, m, -1)
        return light, _log1mexp(light)
    light = _tail_log_sum(n, prob, m + 1, +1)
    return _log1mexp(light), light


def _log1mexp(x: float) -> float:
    """ln(1 - e^x) for x <= 0."""
    if x == -math.inf:
        return 0.0
    if x > -0.6931471805599453:
        return math.log(-math.expm1(x))
    return math.log1p(-math.exp(x))


def binom_cdf(n: int, prob: float, k: float) -> float:
    """Pr(Bin(n, prob) <= floor(k))."""
    return math.exp(binom_log_tails(n, prob, k)[0])


def binom_sf(n: int, prob: float, k: float) -> float:
    """Pr(Bin(n, prob) > floor(k))."""
    return math.exp(binom_log_tails(n, prob, k)[1])


def log_binom_range_mass(n: int, prob: float, lo: int, hi: int) -> float:
    """ln Pr(lo <= Bin(n, prob) <= hi) by direct summation of the masses."""
    lo, hi = max(lo, 0), min(hi, n)
    if lo > hi:
        return -math.inf
    return _logsumexp(log_binom_pmf_array(n, prob, np.arange(lo, hi + 1)))


@dataclass(frozen=True)
class CloneInstance:
    """A shuffle deployment of ``n`` reports from an eps0-DP local randomizer.

    Induces the clone pair over (count, C): C ~ Bin(n-1, p) with p = e^-eps0,
    A ~ Bin(C, 1/2), and the count is A or A+1 with bias q = e^eps0/(e^eps0+1).
    """

    n: int
    eps0: float

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ParameterDomainError(f"n must be a positive integer, got {self.n!r}")
        if not (self.eps0 >= 0.0) or math.isinf(self.eps0):
            raise ParameterDomainError(f"eps0 must be finite and >= 0, got {self.eps0!r}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "eps0", float(self.eps0))

    @cached_property
    def p(self) -> float:
        return math.exp(-self.eps0)

    @cached_property
    def q(self) -> float:
        return 1.0 / (1.0 + math.exp(-self.eps0))

    @cached_property
    def q_comp(self) -> float:
        """1 - q, computed without cancellation."""
        return 1.0 / (1.0 + math.exp(self.eps0))


def clone_joint_logpmf_column(inst: CloneInstance, c: int, side: Side = "P") -> np.ndarray:
    """ln of the clone pmf at (a, c) for a = 0..c+1, as an array."""
    if side not in ("P", "Q"):
        raise ParameterDomainError(f"side must be 'P' or 'Q', got {side!r}")
    if c < 0 or c > inst.n - 1:
        return np.full(max(c + 2, 0), -np.inf)
    log_c = log_binom_pmf(inst.n - 1, inst.p, c)
    log_a = log_binom_pmf_array(c, 0.5, np.arange(-1, c + 2))
    same, shifted = log_a[1:], log_a[:-1]
    hi, lo = math.log(inst.q), math.log(inst.q_comp)
    if side == "Q":
        hi, lo = lo, hi
    return log_c + np.logaddexp(hi + same, lo + shifted)


def clone_joint_pmf(inst: CloneInstance, a: int, c: int, side: Side = "P") -> float:
    """ln Pr(count = a, C = c) under side P (or Q, with q and 1-q swapped)."""
    if side not in ("P", "Q"):
        raise ParameterDomainError(f"side must be 'P' or 'Q', got {side!r}")
    if c < 0 or c > inst.n - 1 or a < 0 or a > c + 1:
        return -math.inf
    return float(clone_joint_logpmf_column(inst, c, side)[a])
