"""Input validation helpers used by the estimators and the functional API."""

from __future__ import annotations

import math

EPS = 1e-9

_INT_TOL = 1e-9


class InputError(ValueError):
    """A score file or flag value failed validation."""


def check_alpha(alpha: float, name: str = "alpha") -> float:
    alpha = float(alpha)
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"{name} must lie in (0, 1), got {alpha!r}")
    return alpha


def check_scores(X, *, clamp: bool = True):
    """Return ``X`` as a 1-D float array of event scores.

    Accepts a 1-D vector or a single-column 2-D array. Values outside
    ``[0, 1]`` are rejected; values on the boundary are clamped.
    """
    import numpy as np
    from sklearn.utils import column_or_1d
    from sklearn.utils.validation import check_array

    X = np.asarray(X, dtype=float)
    if X.ndim == 2:
        X = check_array(X, ensure_2d=True, ensure_min_samples=0, dtype=float)
        if X.shape[1] != 1:
            raise ValueError(f"expected a single score column, got shape {X.shape}")
        X = X[:, 0]
    X = column_or_1d(X)
    if not np.all(np.isfinite(X)):
        raise ValueError("scores must be finite")
    if np.any((X < 0.0) | (X > 1.0)):
        raise ValueError("scores must lie in [0, 1]")
    return np.clip(X, EPS, 1.0 - EPS) if clamp else X


def check_labels(y, n: int | None = None):
    import numpy as np
    from sklearn.utils import column_or_1d

    y = column_or_1d(np.asarray(y))
    if n is not None and len(y) != n:
        raise ValueError(f"found {len(y)} labels for {n} scores")
    if not np.all((y == 0) | (y == 1)):
        raise ValueError("labels must be 0 or 1")
    return y.astype(np.int8)


def guarded_ceil(x: float) -> int:
    """Ceiling that treats values within 1e-9 of an integer as that integer.

    ``(n + 1) * 0.9`` and ``1 / 0.1`` carry binary rounding error that would
    otherwise push the ceiling up by one.
    """
    r = round(x)
    if abs(x - r) <= _INT_TOL:
        return int(r)
    return math.ceil(x)
