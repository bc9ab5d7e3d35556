"""Closed-form space math for chained membership filters.

Everything here is pure double-precision arithmetic: Shannon entropy, the
space lower bound f(eps, lam) for approximate membership at negative/positive
ratio lam, its chain rule, the per-item space of chained constructions, and
the optimal stage parameters.  Logarithms are base 2 throughout; asymptotic
o(1) terms are dropped.

lam (the ratio of negatives to positives) must exceed 1/ln 2 for the chained
forms; below that the constructions degenerate and :class:`DegenerateLambda`
is raised where the contract demands it.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from .errors import DegenerateLambda
from .hashing import floor_log2

_LN2 = math.log(2.0)
INV_LN2 = 1.0 / _LN2


def entropy(p: float) -> float:
    """Binary entropy H(p) in bits, with 0 log 0 := 0."""
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    if p == 0.0 or p == 1.0:
        return 0.0
    return -(p * math.log2(p) + (1.0 - p) * math.log2(1.0 - p))


def _g(x: float) -> float:
    # g(x) = log2(x+1) + x*log2(1 + 1/x) = (x+1) H(1/(x+1)); g(0) = 0.
    # log1p keeps the x*log2(1+1/x) term accurate for large x.
    if x == 0.0:
        return 0.0
    return (math.log1p(x) + x * math.log1p(1.0 / x)) / _LN2


@dataclass(frozen=True)
class ProblemParams:
    """A membership problem: target rate, negative/positive ratio, size."""

    epsilon: float
    lam: float
    n: int | None = None

    def __post_init__(self) -> None:
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError("epsilon must lie in [0, 1]")
        if not self.lam > 0.0:
            raise ValueError("lam must be positive")
        if self.n is not None and self.n < 1:
            raise ValueError("n must be >= 1 when given")


def space_lower_bound(epsilon: float, lam: float) -> float:
    """Minimum bits per positive item for rate ``epsilon`` at ratio ``lam``.

    f(eps, lam) = (lam+1) H(1/(lam+1)) - (eps*lam+1) H(1/(eps*lam+1)).
    """
    ProblemParams(epsilon, lam)
    return max(0.0, _g(lam) - _g(epsilon * lam))


def chain_rule_residual(eps1: float, eps2: float, lam: float) -> float:
    """f(e1*e2, lam) - f(e1, lam) - f(e2, e1*lam); zero in exact arithmetic."""
    return (
        space_lower_bound(eps1 * eps2, lam)
        - space_lower_bound(eps1, lam)
        - space_lower_bound(eps2, eps1 * lam)
    )


def _require_nondegenerate(lam: float) -> None:
    if not lam > INV_LN2:
        raise DegenerateLambda(f"lam={lam} <= 1/ln2; chained form degenerates")


def exact_chain_space(lam: float) -> float:
    """Bits per positive item of the exact chain (constant factor excluded).

    floor(log2 lam) + 1 + lam / 2**floor(log2 lam); within a factor 1.11 of
    space_lower_bound(0, lam).
    """
    _require_nondegenerate(lam)
    k = floor_log2(lam)  # lam > 1/ln2 > 1, so k >= 0
    return k + 1 + lam / (1 << k)


class Strategy(enum.Enum):
    A = "A"
    B = "B"
    DEGENERATE_APPROX = "DEGENERATE_APPROX"
    DEGENERATE_EXACT = "DEGENERATE_EXACT"


@dataclass(frozen=True)
class TwoStageParams:
    """Optimal continuous parameters for a two-stage filter."""

    strategy: Strategy
    alpha: float  # stage-1 fingerprint bits
    beta: float  # stage-2 capacity per positive item
    space_per_item: float  # bits, excluding the build constant


def optimal_two_stage_params(epsilon: float, lam: float) -> TwoStageParams:
    """Pick the cheaper of the two closed-form stage-2 encodings.

    Branch A keeps the unencoded pass rate at 1/2; branch B widens stage-2
    values to pass unencoded items at 1/(beta+1).  Applicability windows are
    open intervals; boundary parameters fall through to the degenerate forms
    (pure exact table below lam = 1/ln2, pure approximate filter when
    neither branch applies above it).
    """
    ProblemParams(epsilon, lam)
    if not lam > INV_LN2:
        # a single exact table over every item: 1 bit per positive + negative
        return TwoStageParams(Strategy.DEGENERATE_EXACT, 0.0, lam, lam + 1.0)

    candidates: list[tuple[float, float, Strategy]] = []
    if epsilon == 0.0 or lam < 1.0 / (2.0 * epsilon * _LN2):
        beta_a = INV_LN2 - 2.0 * lam * epsilon
        f_a = math.log2(2.0 * math.e * lam * _LN2) - 2.0 * lam * epsilon
        candidates.append((f_a, beta_a, Strategy.A))
    if epsilon < _LN2 and lam > 1.0 / (_LN2 - epsilon):
        q = epsilon * lam / (epsilon * lam + 1.0)
        beta_b = INV_LN2 - q
        f_b = math.log2(2.0 * math.e * lam * _LN2 / (epsilon * lam + 1.0)) - q
        candidates.append((f_b, beta_b, Strategy.B))

    if not candidates:
        alpha = math.log2(1.0 / epsilon) if epsilon > 0.0 else math.inf
        return TwoStageParams(Strategy.DEGENERATE_APPROX, alpha, 0.0, alpha)

    # stable min with ties going to the earlier (A) entry
    space, beta, strat = min(candidates, key=lambda t: t[0])
    return TwoStageParams(strat, space - beta - 1.0, beta, space)


@dataclass(frozen=True)
class AndSplit:
    """Stage count and per-stage rates for a chained conjunction."""

    m: int
    eps_list: tuple[float, ...]
    space: float  # implied bits per positive item, excluding the constant

    @property
    def product(self) -> float:
        return math.prod(self.eps_list)


def optimal_and_split(epsilon: float, lam: float) -> AndSplit:
    """Optimal chain split: m-1 half-rate stages plus one closing stage.

    m = floor(log2 lam) + 1, eps_i = 1/2 for i < m, eps_m = 2**(m-1)*epsilon.
    Requires eps_m <= 1/2 (the optimization domain); implied space is
    m + lam/2**(m-1) - 2*epsilon*lam, which meets exact_chain_space(lam)
    at epsilon = 0.
    """
    ProblemParams(epsilon, lam)
    _require_nondegenerate(lam)
    m = floor_log2(lam) + 1
    last = math.ldexp(epsilon, m - 1)
    if last > 0.5:
        raise ValueError(f"eps_m = 2^{m - 1} * {epsilon} exceeds 1/2")
    eps_list = (0.5,) * (m - 1) + (last,)
    space = m + lam / (1 << (m - 1)) - 2.0 * epsilon * lam
    return AndSplit(m, eps_list, space)


def andnot_space(lam: float, delta: float) -> float:
    """Bits per item of the alternating-difference chain at decay ``delta``.

    log2(lam) + ((1+delta)/(1-delta)) * log2(1/delta), build constant
    excluded.  As delta -> 1 this tends to log2(lam) + 2/ln2 = log2(e^2 lam).
    """
    if not lam > 1.0:
        raise ValueError("lam must exceed 1")
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    return math.log2(lam) + (1.0 + delta) / (1.0 - delta) * math.log2(1.0 / delta)


def andnot_practical_bound(lam: float) -> float:
    """Rounded delta = 1/2 space bound: log2(16 * lam)."""
    if not lam > 1.0:
        raise ValueError("lam must exceed 1")
    return math.log2(16.0 * lam)


def cuckoo_negative_ratio(r: float) -> float:
    """Table-1/table-2 occupancy ratio of a never-vacating two-table cuckoo
    hash filled to load ``r`` per table: 1 / (2r/(1-e^(-2r)) - 1)."""
    if not 0.0 < r < 0.5:
        raise ValueError("r must lie in (0, 1/2)")
    return 1.0 / (2.0 * r / -math.expm1(-2.0 * r) - 1.0)


def huffman_overhead_check(avg_len: float, entropy_h: float) -> bool:
    """True iff entropy_h < avg_len < entropy_h + 0.22."""
    if avg_len < 0.0 or entropy_h < 0.0:
        raise ValueError("lengths must be nonnegative")
    return entropy_h < avg_len < entropy_h + 0.22
