"""Renyi-DP accounting for shuffled reports and the composition baselines."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Literal, NamedTuple, Sequence

import numpy as np
from scipy.special import logsumexp

from .clones import SearchConfig, eps_upper
from .closed_form import EpsDelta
from .dist import CloneInstance, binom_log_tails, log_binom_pmf_array, log_binom_range_mass
from .errors import ParameterDomainError
from .rr_lower import RrCountPair

Provenance = Literal["upper", "lower", "exact"]

# Inner sums over the count use the full range up to this many terms; beyond
# it a Hoeffding window whose excluded weight is below e^-_HOEFFDING_NATS.
_FULL_INNER = 4096
_HOEFFDING_NATS = 75.0


def default_alphas() -> list[float]:
    grid = {round(1.0 + k / 10.0, 10) for k in range(1, 41)}
    grid.update(float(a) for a in range(2, 65))
    grid.update(float(2**j) for j in range(7, 13))
    return sorted(grid)


@dataclass(frozen=True)
class RdpCurve:
    points: tuple[tuple[float, float], ...]
    provenance: Provenance = "upper"

    def __post_init__(self):
        pts = tuple((float(a), float(e)) for a, e in self.points)
        alphas = [a for a, _ in pts]
        if any(a <= 1.0 for a in alphas):
            raise ParameterDomainError("Renyi orders must exceed 1")
        if any(b <= a for a, b in zip(alphas, alphas[1:])):
            raise ParameterDomainError("Renyi orders must be strictly increasing")
        if any(e < 0 or math.isnan(e) for _, e in pts):
            raise ParameterDomainError("Renyi epsilons must be >= 0")
        object.__setattr__(self, "points", pts)

    @property
    def alphas(self) -> list[float]:
        return [a for a, _ in self.points]

    @property
    def eps(self) -> list[float]:
        return [e for _, e in self.points]


class RdpValue(NamedTuple):
    value: float
    slack: float

    @property
    def upper(self) -> float:
        return self.value + self.slack


def _as_alphas(alphas) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(alphas, dtype=float))
    if np.any(arr <= 1.0) or np.any(np.isnan(arr)):
        raise ParameterDomainError("Renyi order alpha must exceed 1")
    return arr


def _column_log_moments(inst: CloneInstance, c: int, alphas: np.ndarray) -> tuple[np.ndarray, np.ndarray, float]:
    """ln sum_a P_c^alpha Q_c^(1-alpha) for both directions, given C = c.

    Also returns an upper bound on the (linear) excluded moment mass when the
    count range is windowed.
    """
    if c + 2 <= _FULL_INNER:
        f, b = _window_moments(inst, c, alphas, 0, c + 1, None)
        return f, b, 0.0
    fwd = np.empty(alphas.size)
    bwd = np.empty(alphas.size)
    sd = 0.5 * math.sqrt(c)
    order = np.argsort(alphas)
    # orders sharing a chunk share the widest window of the chunk
    for chunk in np.array_split(order, max(1, alphas.size // 12)):
        sub = alphas[chunk]
        z_max = math.sqrt(2.0 * ((sub.max() - 1.0) * inst.eps0 + _HOEFFDING_NATS))
        lo = max(0, math.floor(c / 2 - z_max * sd) - 2)
        hi = min(c + 1, math.ceil(c / 2 + z_max * sd) + 2)
        fwd[chunk], bwd[chunk] = _window_moments(inst, c, sub, lo, hi, sd)
    return fwd, bwd, 4.0 * math.exp(-_HOEFFDING_NATS)


def _window_moments(inst, c, alphas, lo, hi, sd):
    log_q, log_qc = math.log(inst.q), math.log(inst.q_comp)
    idx = np.arange(lo - 1, hi + 1)
    log_a = log_binom_pmf_array(c, 0.5, idx)
    log_p = np.logaddexp(log_q + log_a[1:], log_qc + log_a[:-1])
    log_qq = np.logaddexp(log_qc + log_a[1:], log_q + log_a[:-1])
    a_col = alphas[:, None]
    fwd_exp = a_col * log_p + (1.0 - a_col) * log_qq
    bwd_exp = a_col * log_qq + (1.0 - a_col) * log_p
    if sd is not None:
        # Hoeffding: A-mass beyond z sd is below 2 e^(-z^2/2), and the
        # moment integrand is at most e^((alpha-1) eps0) times that mass
        z = np.sqrt(2.0 * ((alphas - 1.0) * inst.eps0 + _HOEFFDING_NATS))[:, None]
        outside = np.abs(idx[1:][None, :] - c / 2) > z * sd + 2
        fwd_exp[outside] = -np.inf
        bwd_exp[outside] = -np.inf
    return _lse_rows(fwd_exp), _lse_rows(bwd_exp)


def _lse(values: np.ndarray) -> float:
    if values.size == 0:
        return -math.inf
    top = float(values.max())
    if top == -math.inf:
        return -math.inf
    return top + math.log(float(np.sum(np.exp(values - top))))


def _lse_rows(mat: np.ndarray) -> np.ndarray:
    with np.errstate(invalid="ignore"):
        return logsumexp(mat, axis=1)


def _lower_cut(inst: CloneInstance, log_tol: float) -> int:
    """Largest lo (at or below the mean) with ln Pr(C < lo) <= log_tol."""
    n_c = inst.n - 1
    mean = n_c * inst.p
    sd = math.sqrt(max(n_c * inst.p * (1.0 - inst.p), 1.0))
    z = math.sqrt(2.0 * max(-log_tol, 1.0))
    while True:
        lo = max(0, math.floor(mean - z * sd))
        if lo == 0 or binom_log_tails(n_c, inst.p, lo - 1)[0] <= log_tol:
            return lo
        z *= 1.25


def _upper_cut(inst: CloneInstance, log_tol: float) -> int:
    n_c = inst.n - 1
    mean = n_c * inst.p
    sd = math.sqrt(max(n_c * inst.p * (1.0 - inst.p), 1.0))
    z = math.sqrt(2.0 * max(-log_tol, 1.0))
    while True:
        hi = min(n_c, math.ceil(mean + z * sd))
        if hi == n_c or binom_log_tails(n_c, inst.p, hi)[1] <= log_tol:
            return hi
        z *= 1.25


def _block_starts(inst: CloneInstance, lo: int, hi: int, stride: int | None) -> list[int]:
    if stride is not None:
        return list(range(lo, hi + 1, stride))
    # auto: ~64 blocks across +-10 sd of the mean, ~16 coarse blocks on each side
    n_c = inst.n - 1
    mean = n_c * inst.p
    sd = math.sqrt(max(n_c * inst.p * (1.0 - inst.p), 1.0))
    c_lo = min(max(lo, math.floor(mean - 10 * sd)), hi)
    c_hi = max(min(hi, math.ceil(mean + 10 * sd)), c_lo)
    starts = set(range(lo, c_lo, max(1, (c_lo - lo) // 16)))
    starts.update(range(c_lo, c_hi + 1, max(1, (c_hi - c_lo + 1) // 64)))
    starts.update(range(c_hi + 1, hi + 1, max(1, (hi - c_hi) // 16)))
    return sorted(starts)


def _clone_moments(inst: CloneInstance, alphas: np.ndarray, mass_tol: float, stride: int | None):
    """Log moments per alpha over the kept C window, and certified upper log moments.

    Per-C moments are nonincreasing in C (data processing), so a block of C
    values is bounded by its first member and the omitted tails C < lo and
    C > hi by the moments at c = 0 and c = hi.
    """
    n_c = inst.n - 1
    if mass_tol > 0.0:
        log_tol = math.log(mass_tol)
        lo = _lower_cut(inst, log_tol - (alphas.max() - 1.0) * inst.eps0)
        hi = _upper_cut(inst, log_tol)
    else:
        lo, hi = 0, n_c
    starts = _block_starts(inst, lo, hi, stride)
    inner_excluded = 0.0
    cache: dict[int, tuple[np.ndarray, np.ndarray]] = {}

    def moments(c: int):
        nonlocal inner_excluded
        if c not in cache:
            f, b, ex = _column_log_moments(inst, c, alphas)
            cache[c] = (f, b)
            inner_excluded = max(inner_excluded, ex)
        return cache[c]

    fwd_terms, bwd_terms = [], []
    ends = starts[1:] + [hi + 1]
    for c0, c_next in zip(starts, ends):
        log_mass = log_binom_range_mass(n_c, inst.p, c0, c_next - 1)
        if log_mass == -math.inf:
            continue
        f0, b0 = moments(c0)
        fwd_terms.append(log_mass + f0)
        bwd_terms.append(log_mass + b0)
    fwd = logsumexp(np.array(fwd_terms), axis=0) if fwd_terms else np.zeros(alphas.size)
    bwd = logsumexp(np.array(bwd_terms), axis=0) if bwd_terms else np.zeros(alphas.size)

    fwd_up, bwd_up = fwd.copy(), bwd.copy()
    if lo > 0:
        log_below = binom_log_tails(n_c, inst.p, lo - 1)[0]
        f, b = moments(0)
        fwd_up = np.logaddexp(fwd_up, log_below + f)
        bwd_up = np.logaddexp(bwd_up, log_below + b)
    if hi < n_c:
        log_above = binom_log_tails(n_c, inst.p, hi)[1]
        f, b = moments(hi)
        fwd_up = np.logaddexp(fwd_up, log_above + f)
        bwd_up = np.logaddexp(bwd_up, log_above + b)
    if inner_excluded > 0.0:
        fwd_up = np.logaddexp(fwd_up, math.log(inner_excluded))
        bwd_up = np.logaddexp(bwd_up, math.log(inner_excluded))
    return fwd, bwd, fwd_up, bwd_up


def rdp_clones_many(
    inst: CloneInstance,
    alphas: Iterable[float],
    mass_tol: float = 0.0,
    stride: int | None = 1,
) -> list[RdpValue]:
    """``rdp_clones`` evaluated on many orders with shared per-C work."""
    alphas = _as_alphas(list(alphas))
    if stride is not None and stride < 1:
        raise ParameterDomainError("stride must be >= 1")
    if mass_tol < 0:
        raise ParameterDomainError("mass_tol must be >= 0")
    if inst.eps0 == 0.0:
        return [RdpValue(0.0, 0.0) for _ in alphas]
    fwd, bwd, fwd_up, bwd_up = _clone_moments(inst, alphas, mass_tol, stride)
    out = []
    for alpha, f, b, fu, bu in zip(alphas, fwd, bwd, fwd_up, bwd_up):
        value = min(max(f, b, 0.0) / (alpha - 1.0), inst.eps0)
        upper = min(max(fu, bu, 0.0) / (alpha - 1.0), inst.eps0)
        out.append(RdpValue(float(value), float(max(upper - value, 0.0))))
    return out


def rdp_clones(inst: CloneInstance, alpha: float, mass_tol: float = 0.0, stride: int | None = 1) -> RdpValue:
    """Renyi divergence of order ``alpha`` between the two clone distributions.

    Max over both directions. ``value`` sums over the kept C range only; with
    ``mass_tol > 0`` the range is truncated and ``value + slack`` is a
    certified upper bound. ``stride > 1`` bounds each block of C values by its
    first member, which is sound because the per-C divergence shrinks as C
    grows; ``stride=None`` picks blocks automatically (fine near the mean).
    """
    return rdp_clones_many(inst, [alpha], mass_tol, stride)[0]


def rdp_clones_exact_small(inst: CloneInstance, alphas) -> float | np.ndarray:
    """Full-support enumeration of the clone Renyi divergence (oracle, O(n^2))."""
    from .dist import clone_joint_logpmf_column

    scalar = np.ndim(alphas) == 0
    alphas = _as_alphas(alphas)
    lp = np.concatenate([clone_joint_logpmf_column(inst, c, "P") for c in range(inst.n)])
    lq = np.concatenate([clone_joint_logpmf_column(inst, c, "Q") for c in range(inst.n)])
    out = np.array(
        [max(_lse(a * lp + (1 - a) * lq), _lse(a * lq + (1 - a) * lp), 0.0) / (a - 1.0) for a in alphas]
    )
    return float(out[0]) if scalar else out


def rdp_clones_curve(
    inst: CloneInstance,
    alphas: Sequence[float] | None = None,
    mass_tol: float = 0.0,
    stride: int | None = 1,
) -> RdpCurve:
    alphas = default_alphas() if alphas is None else sorted(alphas)
    vals = rdp_clones_many(inst, alphas, mass_tol, stride)
    eps = _nondecreasing([min(v.upper, inst.eps0) for v in vals])
    exact = stride == 1 and all(v.slack == 0.0 for v in vals)
    return RdpCurve(tuple(zip(alphas, eps)), "exact" if exact else "upper")


def _nondecreasing(eps: list[float]) -> list[float]:
    # the true divergence is nondecreasing in alpha; iron out rounding-level dips
    # by lifting (never lowering) values, which keeps every point an upper bound
    out = list(eps)
    for i in range(1, len(out)):
        out[i] = max(out[i], out[i - 1])
    return out


def rdp_lower_2rr(n: int, eps0: float, alpha) -> float | np.ndarray:
    """Renyi divergence between the shuffled 2RR count distributions (max over directions)."""
    scalar = np.ndim(alpha) == 0
    alphas = _as_alphas(alpha)
    pair = RrCountPair(n, eps0)
    counts = pair.support
    lp0 = pair.log_pmf0(counts)
    lr = pair.log_ratio(counts)
    out = np.empty(alphas.size)
    for i, a in enumerate(alphas):
        # c1 || c0: sum c0 L^a ; c0 || c1: sum c0 L^(1-a)
        f = _lse(lp0 + a * lr)
        b = _lse(lp0 + (1.0 - a) * lr)
        out[i] = min(max(f, b, 0.0) / (a - 1.0), eps0)
    return float(out[0]) if scalar else out


def rdp_lower_2rr_curve(n: int, eps0: float, alphas: Sequence[float] | None = None) -> RdpCurve:
    alphas = default_alphas() if alphas is None else sorted(alphas)
    vals = rdp_lower_2rr(n, eps0, np.asarray(alphas))
    return RdpCurve(tuple(zip(alphas, vals)), "lower")


def rdp_compose(curve: RdpCurve, reps: int) -> RdpCurve:
    """Adaptive composition of ``reps`` mechanisms sharing this curve."""
    if int(reps) != reps or reps < 1:
        raise ParameterDomainError("reps must be a positive integer")
    return RdpCurve(tuple((a, reps * e) for a, e in curve.points), curve.provenance)


def rdp_to_dp(curve: RdpCurve, delta: float) -> float:
    """Convert an RDP curve to an epsilon at level ``delta`` (best order on the grid)."""
    if not (0.0 < delta < 1.0):
        raise ParameterDomainError("delta must lie in (0, 1)")
    if not curve.points:
        raise ParameterDomainError("curve must be nonempty")
    log_delta = math.log(delta)
    best = math.inf
    for a, e in curve.points:
        val = e + math.log1p(-1.0 / a) - (log_delta + math.log(a)) / (a - 1.0)
        best = min(best, val)
    return max(best, 0.0)


def advanced_composition(eps: float, delta_each: float, reps: int, delta_slack: float) -> EpsDelta:
    """Three-way minimum form of advanced composition for ``reps`` (eps, delta_each) mechanisms."""
    if not (eps >= 0.0):
        raise ParameterDomainError("eps must be >= 0")
    if not (0.0 <= delta_each < 1.0):
        raise ParameterDomainError("delta_each must lie in [0, 1)")
    if int(reps) != reps or reps < 1:
        raise ParameterDomainError("reps must be a positive integer")
    if not (0.0 < delta_slack < 1.0):
        raise ParameterDomainError("delta_slack must lie in (0, 1)")
    drift = reps * eps * math.tanh(eps / 2.0)
    total = min(
        reps * eps,
        drift + eps * math.sqrt(2.0 * reps * math.log(1.0 / delta_slack)),
        drift + eps * math.sqrt(2.0 * reps * math.log(math.e + math.sqrt(reps) * eps / delta_slack)),
    )
    delta_total = -math.expm1(reps * math.log1p(-delta_each) + math.log1p(-delta_slack))
    return EpsDelta(total, min(delta_total, 1.0), "upper")


def compose_rdp_route(
    inst: CloneInstance,
    delta: float,
    reps: int,
    alphas: Sequence[float] | None = None,
    mass_tol: float = 1e-20,
    stride: int | None = None,
) -> EpsDelta:
    """Epsilon of ``reps`` adaptive shuffled rounds via RDP composition."""
    curve = clone_rdp_curve(inst, alphas, mass_tol, stride)
    return EpsDelta(rdp_to_dp(rdp_compose(curve, reps), delta), delta, "upper")


def clone_rdp_curve(
    inst: CloneInstance,
    alphas: Sequence[float] | None = None,
    mass_tol: float = 1e-20,
    stride: int | None = None,
) -> RdpCurve:
    """Clone-pair RDP curve with truncation and automatic blocks, for large ``n``."""
    return rdp_clones_curve(inst, alphas, mass_tol, stride)


def compose_advanced_route(
    inst: CloneInstance,
    delta: float,
    reps: int,
    cfg: SearchConfig | None = None,
) -> EpsDelta:
    """Per-round numeric (eps, delta/(2 reps)) bound composed with advanced composition."""
    if not (0.0 < delta < 1.0):
        raise ParameterDomainError("delta must lie in (0, 1)")
    per_round = delta / (2.0 * reps)
    eps = eps_upper(inst, per_round, cfg)
    return advanced_composition(eps, per_round, reps, delta / 2.0)
