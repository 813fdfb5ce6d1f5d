"""Finite-sample sizing for the classwise fail-safe regime.

With ``n`` calibration events, classwise conformal calibration has no finite
event threshold when ``n <= ceil(1/alpha) - 2``. The functions here give the
probability of landing in that regime when the calibration set is drawn
i.i.d. (binomial event count) or without replacement from a finite cohort
(hypergeometric event count), and the smallest calibration size that keeps
that probability under a budget.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Union

from ._validation import check_alpha, guarded_ceil

BINOMIAL_SCAN_LIMIT = 10**6
CONFIRM_AHEAD = 5


@dataclass(frozen=True)
class Binomial:
    pi: float

    def __post_init__(self):
        if not 0.0 <= self.pi <= 1.0:
            raise ValueError(f"pi must lie in [0, 1], got {self.pi!r}")

    name = "binomial"


@dataclass(frozen=True)
class Hypergeometric:
    N: int
    K: int

    def __post_init__(self):
        if not 0 <= self.K <= self.N:
            raise ValueError(f"need 0 <= K <= N, got N={self.N}, K={self.K}")

    name = "hypergeometric"


SamplingModel = Union[Binomial, Hypergeometric]


@dataclass(frozen=True)
class SizingResult:
    alpha: float
    fsrl_threshold: int
    model: SamplingModel
    n_cal: int
    p_fsrl: float
    expected_events: float
    # False when the condition failed again within the next few sizes.
    confirmed: bool = True


class SizingError(ValueError):
    pass


def fsrl_threshold(alpha: float) -> int:
    """Largest calibration event count that forces an infinite threshold."""
    alpha = check_alpha(alpha)
    return guarded_ceil(1.0 / alpha) - 2


def _log_binom_pmf(j: int, n: int, pi: float) -> float:
    return (math.lgamma(n + 1) - math.lgamma(j + 1) - math.lgamma(n - j + 1)
            + j * math.log(pi) + (n - j) * math.log1p(-pi))


def p_fsrl_binomial(n_cal: int, pi: float, alpha: float) -> float:
    """``P(X <= n*)`` for ``X ~ Binomial(n_cal, pi)``."""
    if n_cal < 1:
        raise ValueError("n_cal must be at least 1")
    Binomial(pi)
    n_star = fsrl_threshold(alpha)
    if n_star < 0:
        return 0.0
    if n_star >= n_cal or pi == 0.0:
        return 1.0
    if pi == 1.0:
        return 0.0
    total = math.fsum(math.exp(_log_binom_pmf(j, n_cal, pi)) for j in range(n_star + 1))
    return min(total, 1.0)


def p_fsrl_hypergeometric(N: int, K: int, n_cal: int, alpha: float) -> float:
    """``P(X <= n*)`` for ``X ~ Hypergeometric(N, K, n_cal)``, in exact rational arithmetic."""
    Hypergeometric(N, K)
    if not 1 <= n_cal <= N:
        raise ValueError(f"n_cal must lie in [1, {N}], got {n_cal}")
    n_star = fsrl_threshold(alpha)
    lo, hi = max(0, n_cal - (N - K)), min(K, n_cal)
    num = sum(math.comb(K, j) * math.comb(N - K, n_cal - j) for j in range(lo, min(hi, n_star) + 1))
    return float(Fraction(num, math.comb(N, n_cal)))


def p_fsrl(model: SamplingModel, n_cal: int, alpha: float) -> float:
    if isinstance(model, Binomial):
        return p_fsrl_binomial(n_cal, model.pi, alpha)
    return p_fsrl_hypergeometric(model.N, model.K, n_cal, alpha)


def expected_events(n_cal: int, N: int, K: int) -> float:
    return n_cal * K / N


def coverage_floor(pi: float, alpha: float) -> float:
    """Lower bound on event coverage implied by marginal ``1 - alpha`` coverage."""
    if not 0.0 < pi <= 1.0:
        raise ValueError(f"pi must lie in (0, 1], got {pi!r}")
    alpha = check_alpha(alpha)
    return max(0.0, 1.0 - alpha / pi)


def min_ncal(delta: float, model: SamplingModel, alpha: float) -> SizingResult:
    """Smallest calibration size with fail-safe probability at most ``delta``.

    A linear scan; the hit is confirmed on the next five sizes (within the
    cohort for the hypergeometric model) and ``confirmed`` is cleared if any
    of them breaks the condition again.
    """
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must lie in (0, 1), got {delta!r}")
    alpha = check_alpha(alpha)
    limit = model.N if isinstance(model, Hypergeometric) else BINOMIAL_SCAN_LIMIT
    for n in range(1, limit + 1):
        p = p_fsrl(model, n, alpha)
        if p <= delta:
            ahead = range(n + 1, min(n + CONFIRM_AHEAD, limit) + 1)
            confirmed = all(p_fsrl(model, m, alpha) <= delta for m in ahead)
            if isinstance(model, Hypergeometric):
                exp_ev = expected_events(n, model.N, model.K)
            else:
                exp_ev = n * model.pi
            return SizingResult(alpha, fsrl_threshold(alpha), model, n, p, exp_ev, confirmed)
    raise SizingError(f"no calibration size up to {limit} keeps P(FSRL) <= {delta:g}")
