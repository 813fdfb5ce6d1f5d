"""Split-conformal triage rules for binary event scores.

Nonconformity is ``1 - p_y`` with ``p_1 = p`` and ``p_0 = 1 - p``. Pooled
calibration takes one order statistic over all calibration subjects;
classwise calibration takes one per label. When the conformal index exceeds
the sample count the threshold is infinite and the label is always kept.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_alpha, check_labels, check_scores, guarded_ceil
from .correction import LogitShift, apply_correction
from .domain import PredictionSet, ScoredSubject, TriageAction, action_of

INF = math.inf


class CalibrationMode(str, enum.Enum):
    POOLED = "pooled"
    CLASSWISE = "classwise"


class Branch(str, enum.Enum):
    RAW = "raw"
    CORRECTED = "corrected"


class _FailSafe:
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "FailSafe"

    def __bool__(self):
        return False


#: Returned by :func:`conformal_index` when no finite order statistic exists.
FailSafe = _FailSafe()


def nonconformity(p, y):
    """``1 - p`` for events, ``p`` for non-events."""
    p = np.asarray(p, dtype=float)
    y = np.asarray(y)
    out = np.where(y == 1, 1.0 - p, p)
    return float(out) if out.ndim == 0 else out


def conformal_index(n: int, alpha: float):
    """1-based index ``ceil((n + 1)(1 - alpha))``, or ``FailSafe`` if it exceeds ``n``."""
    if n < 0:
        raise ValueError("n must be non-negative")
    alpha = check_alpha(alpha)
    k = guarded_ceil((n + 1) * (1.0 - alpha))
    return FailSafe if k > n else k


def order_statistic_threshold(scores: np.ndarray, alpha: float) -> float:
    k = conformal_index(len(scores), alpha)
    if k is FailSafe:
        return INF
    return float(np.sort(scores, kind="stable")[k - 1])


@dataclass(frozen=True)
class TriageRule:
    """A calibrated conformal triage rule.

    ``pooled_q`` is set in pooled mode; ``classwise_q0`` and ``classwise_q1``
    in classwise mode. ``shift`` is present exactly for the corrected branch.
    """

    mode: CalibrationMode
    branch: Branch
    alpha: float
    pooled_q: float | None = None
    classwise_q0: float | None = None
    classwise_q1: float | None = None
    shift: LogitShift | None = None

    def __post_init__(self):
        check_alpha(self.alpha)
        if (self.branch is Branch.CORRECTED) != (self.shift is not None):
            raise ValueError("a corrected rule needs a shift and a raw rule must not carry one")
        if self.mode is CalibrationMode.POOLED:
            if self.pooled_q is None:
                raise ValueError("pooled rule needs pooled_q")
        elif self.classwise_q0 is None or self.classwise_q1 is None:
            raise ValueError("classwise rule needs classwise_q0 and classwise_q1")

    @property
    def thresholds(self) -> tuple[float, float]:
        """Per-label thresholds ``(q_0, q_1)``."""
        if self.mode is CalibrationMode.POOLED:
            return self.pooled_q, self.pooled_q
        return self.classwise_q0, self.classwise_q1

    def transform_scores(self, p):
        if self.shift is None:
            return p
        return apply_correction(p, self.shift)


def calibrate_arrays(scores, labels, mode, branch, alpha, shift=None) -> TriageRule:
    """Array form of :func:`calibrate`; ``scores`` are raw base scores."""
    mode, branch = CalibrationMode(mode), Branch(branch)
    alpha = check_alpha(alpha)
    if branch is Branch.CORRECTED and shift is None:
        raise ValueError("corrected branch needs a frozen shift")
    if branch is Branch.RAW:
        shift = None
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels)
    if len(scores) == 0:
        raise ValueError("calibration subset is empty")
    p = scores if shift is None else apply_correction(scores, shift)
    s = nonconformity(p, labels)
    s = np.atleast_1d(s)
    if mode is CalibrationMode.POOLED:
        return TriageRule(mode, branch, alpha, pooled_q=order_statistic_threshold(s, alpha),
                          shift=shift)
    q0 = order_statistic_threshold(s[labels == 0], alpha)
    q1 = order_statistic_threshold(s[labels == 1], alpha)
    return TriageRule(mode, branch, alpha, classwise_q0=q0, classwise_q1=q1, shift=shift)


def calibrate(c2: Sequence[ScoredSubject], mode, branch, alpha, shift=None) -> TriageRule:
    """Calibrate a triage rule on the calibration subset.

    In the corrected branch the frozen shift is applied to the calibration
    scores before nonconformity is computed. An empty class in classwise
    mode yields an infinite threshold, not an error.
    """
    if not c2:
        raise ValueError("calibration subset is empty")
    scores = np.array([s.score for s in c2], dtype=float)
    labels = np.array([s.label for s in c2], dtype=np.int8)
    return calibrate_arrays(scores, labels, mode, branch, alpha, shift)


def prediction_sets(p_raw, rule: TriageRule) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized label inclusion: returns boolean arrays ``(includes_0, includes_1)``."""
    p = np.asarray(rule.transform_scores(np.asarray(p_raw, dtype=float)), dtype=float)
    q0, q1 = rule.thresholds
    # An infinite threshold compares true against every finite score.
    inc0 = p <= q0
    inc1 = (1.0 - p) <= q1
    return inc0, inc1


def prediction_set(p_raw: float, rule: TriageRule) -> PredictionSet:
    inc0, inc1 = prediction_sets(np.array([p_raw]), rule)
    return PredictionSet(bool(inc0[0]), bool(inc1[0]))


RELEASE, FLAG, DEFER = 0, 1, 2
_ACTION_CODES = {RELEASE: TriageAction.RELEASE, FLAG: TriageAction.FLAG, DEFER: TriageAction.DEFER}


def action_codes(inc0: np.ndarray, inc1: np.ndarray) -> np.ndarray:
    """Integer action codes (0 release, 1 flag, 2 defer) from inclusion arrays."""
    codes = np.full(inc0.shape, DEFER, dtype=np.int8)
    codes[inc0 & ~inc1] = RELEASE
    codes[inc1 & ~inc0] = FLAG
    return codes


class ConformalTriage(BaseEstimator):
    """Split-conformal triage estimator.

    Parameters
    ----------
    alpha : float, default=0.1
        Miscoverage level.
    mode : {"pooled", "classwise"}, default="pooled"
        One global threshold, or one threshold per label.
    shift : LogitShift or None, default=None
        A frozen prevalence correction fitted elsewhere (on the pilot
        subset). When given, the rule runs on the corrected branch and
        applies the shift to every score it sees.

    Attributes
    ----------
    rule_ : TriageRule
        The calibrated rule.
    thresholds_ : tuple of float
        ``(q_0, q_1)``; ``inf`` marks the fail-safe convention.

    Examples
    --------
    >>> est = ConformalTriage(alpha=0.5).fit([0.1, 0.2, 0.8], [0, 0, 1])
    >>> est.predict([0.05]).tolist()
    ['release']
    """

    def __init__(self, alpha=0.1, mode="pooled", shift=None):
        self.alpha = alpha
        self.mode = mode
        self.shift = shift

    def fit(self, X, y):
        scores = check_scores(X)
        labels = check_labels(y, len(scores))
        branch = Branch.RAW if self.shift is None else Branch.CORRECTED
        self.rule_ = calibrate_arrays(scores, labels, self.mode, branch, self.alpha, self.shift)
        self.thresholds_ = self.rule_.thresholds
        self.classes_ = np.array([0, 1])
        return self

    def predict_set(self, X) -> np.ndarray:
        """Boolean array of shape ``(n_samples, 2)``; column ``y`` marks label ``y``."""
        check_is_fitted(self, "rule_")
        inc0, inc1 = prediction_sets(check_scores(X), self.rule_)
        return np.column_stack([inc0, inc1])

    def predict(self, X) -> np.ndarray:
        """Triage action per sample: ``'release'``, ``'flag'`` or ``'defer'``."""
        sets = self.predict_set(X)
        codes = action_codes(sets[:, 0], sets[:, 1])
        return np.array([_ACTION_CODES[c].value for c in codes.tolist()], dtype=object)


__all__ = [
    "Branch", "CalibrationMode", "ConformalTriage", "FailSafe", "INF", "TriageRule",
    "action_codes", "action_of", "calibrate", "calibrate_arrays", "conformal_index",
    "nonconformity", "prediction_set", "prediction_sets",
]
