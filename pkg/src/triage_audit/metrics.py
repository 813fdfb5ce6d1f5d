"""Release-side metrics on a held-out evaluation set, and their aggregation over splits."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .conformal import DEFER, FLAG, RELEASE, TriageRule, action_codes, prediction_sets
from .domain import ScoredSubject

#: Metric fields of :class:`SplitMetrics` that are aggregated across splits.
METRIC_NAMES = (
    "release_rate", "flag_rate", "defer_rate", "empty_rate",
    "hrr", "c_marg", "c_ev", "fn_rel", "p_rel",
)


@dataclass(frozen=True)
class SplitMetrics:
    """Metrics for one rule on one evaluation set.

    ``defer_rate`` counts both the two-label set and the empty set;
    ``empty_rate`` tracks the empty set alone. Undefined ratios are ``None``.
    The integer counts allow exact rational checks of the ratios.
    """

    release_rate: float
    flag_rate: float
    defer_rate: float
    empty_rate: float
    hrr: float
    c_marg: float
    c_ev: float | None
    fn_rel: float | None
    p_rel: float | None
    n_eval: int
    n_eval_events: int
    n_released: int
    n_released_events: int
    n_covered_events: int

    def as_dict(self) -> dict:
        return asdict(self)

    def exact(self, name: str) -> Fraction | None:
        """``c_ev``, ``fn_rel`` or ``p_rel`` as an exact fraction of counts."""
        num, den = {
            "c_ev": (self.n_covered_events, self.n_eval_events),
            "fn_rel": (self.n_released_events, self.n_eval_events),
            "p_rel": (self.n_released_events, self.n_released),
        }[name]
        return Fraction(num, den) if den else None


def _ratio(num: int, den: int) -> float | None:
    return num / den if den else None


def metrics_from_sets(labels: np.ndarray, inc0: np.ndarray, inc1: np.ndarray) -> SplitMetrics:
    labels = np.asarray(labels)
    n = len(labels)
    if n == 0:
        raise ValueError("evaluation set is empty")
    codes = action_codes(inc0, inc1)
    events = labels == 1
    released = codes == RELEASE
    n_rel = int(released.sum())
    n_rel_ev = int((released & events).sum())
    n_ev = int(events.sum())
    covered = np.where(events, inc1, inc0)
    n_cov_ev = int((inc1 & events).sum())
    return SplitMetrics(
        release_rate=n_rel / n,
        flag_rate=int((codes == FLAG).sum()) / n,
        defer_rate=int((codes == DEFER).sum()) / n,
        empty_rate=int((~inc0 & ~inc1).sum()) / n,
        hrr=(n - n_rel) / n,
        c_marg=int(covered.sum()) / n,
        c_ev=_ratio(n_cov_ev, n_ev),
        fn_rel=_ratio(n_rel_ev, n_ev),
        p_rel=_ratio(n_rel_ev, n_rel),
        n_eval=n,
        n_eval_events=n_ev,
        n_released=n_rel,
        n_released_events=n_rel_ev,
        n_covered_events=n_cov_ev,
    )


def evaluate_arrays(scores, labels, rule: TriageRule) -> SplitMetrics:
    inc0, inc1 = prediction_sets(scores, rule)
    return metrics_from_sets(labels, inc0, inc1)


def evaluate_split(eval_subjects: Sequence[ScoredSubject], rule: TriageRule) -> SplitMetrics:
    """Apply ``rule`` to every evaluation subject and summarise the actions.

    HRR counts flags and deferrals (including empty sets) as review.
    FN_rel is the share of events released without review; P_rel is the
    event share among released subjects.
    """
    if not eval_subjects:
        raise ValueError("evaluation set is empty")
    scores = np.array([s.score for s in eval_subjects], dtype=float)
    labels = np.array([s.label for s in eval_subjects], dtype=np.int8)
    return evaluate_arrays(scores, labels, rule)


@dataclass(frozen=True)
class MetricSummary:
    mean: float | None
    std: float | None
    n_defined: int


@dataclass(frozen=True)
class AggregateMetrics:
    summaries: dict[str, MetricSummary] = field(default_factory=dict)
    fn_p95: float = math.nan
    n_splits: int = 0
    n_splits_with_events: int = 0

    def __getitem__(self, name: str) -> MetricSummary:
        return self.summaries[name]

    def mean(self, name: str) -> float | None:
        return self.summaries[name].mean


def nearest_rank(values: Sequence[float], q: int = 95) -> float:
    """Nearest-rank percentile: the ``ceil(q * m / 100)``-th smallest of ``m`` values.

    Integer arithmetic keeps the rank exact (``0.95 * 20`` is not 19 in floating point).
    """
    m = len(values)
    if m == 0:
        raise ValueError("no values")
    rank = max(1, -(-q * m // 100))
    return sorted(values)[rank - 1]


def aggregate(splits: Sequence[SplitMetrics]) -> AggregateMetrics:
    """Mean and population std per metric over the splits where it is defined.

    Raises
    ------
    ValueError
        If ``splits`` is empty or FN_rel is undefined in every split.
    """
    if not splits:
        raise ValueError("no splits to aggregate")
    summaries = {}
    for name in METRIC_NAMES:
        vals = [getattr(s, name) for s in splits if getattr(s, name) is not None]
        if vals:
            arr = np.asarray(vals, dtype=float)
            summaries[name] = MetricSummary(float(arr.mean()), float(arr.std()), len(vals))
        else:
            summaries[name] = MetricSummary(None, None, 0)
    fn = [s.fn_rel for s in splits if s.fn_rel is not None]
    if not fn:
        raise ValueError("fn_rel is undefined in every split (no events in any evaluation set)")
    return AggregateMetrics(
        summaries=summaries,
        fn_p95=float(nearest_rank(fn, 95)),
        n_splits=len(splits),
        n_splits_with_events=sum(1 for s in splits if s.n_eval_events > 0),
    )
