"""Labeled-pilot prevalence correction by a monotone logit shift.

The correction maps a frozen event score ``p`` to ``sigmoid(logit(p) + b)``.
The shift ``b`` is chosen on the pilot subset so that the mean corrected
score equals the pilot's observed event rate, and is then frozen.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_labels, check_scores
from .domain import ScoredSubject

FIT_TOL = 1e-10
_BRACKET = 30.0
_MAX_BRACKET = 60.0
_MAX_ITER = 500


class DegeneratePilotError(ValueError):
    """The pilot subset holds only one class, so no finite shift matches it."""


def _logit(p):
    return np.log(p) - np.log1p(-p)


def _sigmoid(z):
    # Two-branch form avoids overflow in exp for large |z|.
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


@dataclass(frozen=True)
class LogitShift:
    """A fitted, frozen logit shift.

    Attributes
    ----------
    b : float
        Shift in logit units.
    fitted_on_prevalence : float
        Event rate of the pilot subset the shift was fitted on.
    residual : float
        ``|mean corrected score - fitted_on_prevalence|`` at convergence.
    """

    b: float
    fitted_on_prevalence: float = float("nan")
    residual: float = 0.0

    def apply(self, p):
        return apply_correction(p, self)


def apply_correction(p, shift: LogitShift | float):
    """Return ``sigmoid(logit(p) + b)``; scalar in, scalar out."""
    b = shift.b if isinstance(shift, LogitShift) else float(shift)
    arr = np.asarray(p, dtype=float)
    out = _sigmoid(_logit(arr) + b)
    if arr.ndim == 0:
        return float(out)
    return out


def _mean_corrected(logits: np.ndarray, b: float) -> float:
    return float(np.mean(_sigmoid(logits + b)))


def solve_shift(scores: np.ndarray, target: float) -> tuple[float, float]:
    """Find ``b`` with ``mean(sigmoid(logit(scores) + b)) == target``.

    Bisection on the bracket [-30, 30], widened to [-60, 60] if the root
    falls outside. Returns ``(b, residual)``.
    """
    if not 0.0 < target < 1.0:
        raise DegeneratePilotError(f"degenerate pilot prevalence {target!r}")
    logits = _logit(scores)
    lo, hi = -_BRACKET, _BRACKET
    while _mean_corrected(logits, lo) > target or _mean_corrected(logits, hi) < target:
        if hi >= _MAX_BRACKET:
            raise DegeneratePilotError(
                f"no shift in [-{_MAX_BRACKET:g}, {_MAX_BRACKET:g}] matches prevalence {target:.6g}")
        lo, hi = 2 * lo, 2 * hi
    b = 0.5 * (lo + hi)
    resid = _mean_corrected(logits, b) - target
    for _ in range(_MAX_ITER):
        if abs(resid) <= FIT_TOL:
            break
        if resid > 0:
            hi = b
        else:
            lo = b
        b = 0.5 * (lo + hi)
        resid = _mean_corrected(logits, b) - target
        if hi - lo < 1e-15:
            break
    return b, abs(resid)


def fit_logit_shift(pilot: Sequence[ScoredSubject]) -> LogitShift:
    """Fit the shift on a labeled pilot subset.

    Raises
    ------
    DegeneratePilotError
        If the pilot holds only events or only non-events.
    """
    if not pilot:
        raise ValueError("pilot subset is empty")
    scores = np.array([s.score for s in pilot], dtype=float)
    labels = np.array([s.label for s in pilot], dtype=float)
    return _fit_arrays(scores, labels)


def _fit_arrays(scores: np.ndarray, labels: np.ndarray) -> LogitShift:
    target = float(labels.mean())
    if target in (0.0, 1.0):
        raise DegeneratePilotError(f"degenerate pilot prevalence {target:g}")
    b, resid = solve_shift(scores, target)
    return LogitShift(b=b, fitted_on_prevalence=target, residual=resid)


class LogitShiftCorrector(TransformerMixin, BaseEstimator):
    """Transformer wrapper around the pilot logit-shift correction.

    ``fit`` reads labels from the pilot subset only; ``transform`` applies
    the frozen shift to any scores.

    Examples
    --------
    >>> corr = LogitShiftCorrector().fit([0.5, 0.5, 0.5, 0.5], [1, 0, 0, 0])
    >>> round(corr.b_, 4)
    -1.0986
    """

    def fit(self, X, y):
        scores = check_scores(X)
        labels = check_labels(y, len(scores))
        if len(scores) == 0:
            raise ValueError("pilot subset is empty")
        self.shift_ = _fit_arrays(scores, labels.astype(float))
        self.b_ = self.shift_.b
        return self

    def transform(self, X):
        check_is_fitted(self, "shift_")
        return apply_correction(check_scores(X), self.shift_)

    def inverse_transform(self, X):
        check_is_fitted(self, "shift_")
        return apply_correction(check_scores(X), -self.shift_.b)

