"""Core data types shared across the audit: subjects, cohorts, splits, sets, actions."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

# Scores are clamped into [EPS, 1 - EPS] so that every logit is finite.
from ._validation import EPS


def clamp_score(p: float) -> float:
    return min(max(float(p), EPS), 1.0 - EPS)


@dataclass(frozen=True)
class ScoredSubject:
    """One target subject with a binary event label and a frozen event score."""

    id: str
    label: int
    score: float

    def __post_init__(self):
        if self.label not in (0, 1) or isinstance(self.label, bool):
            raise ValueError(f"label must be 0 or 1, got {self.label!r}")
        score = float(self.score)
        if not 0.0 <= score <= 1.0:
            raise ValueError(f"score for {self.id!r} must lie in [0, 1], got {score!r}")
        object.__setattr__(self, "label", int(self.label))
        object.__setattr__(self, "score", clamp_score(score))


@dataclass(frozen=True)
class Cohort:
    """An ordered, immutable collection of scored subjects.

    Subject order is the order of the input file; every index set in a
    :class:`SplitAllocation` refers to positions in this order.
    """

    subjects: tuple[ScoredSubject, ...]
    labels: np.ndarray = field(init=False, repr=False, compare=False)
    scores: np.ndarray = field(init=False, repr=False, compare=False)
    ids: tuple[str, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        subjects = tuple(self.subjects)
        object.__setattr__(self, "subjects", subjects)
        ids = tuple(s.id for s in subjects)
        if len(set(ids)) != len(ids):
            seen: set[str] = set()
            dup = next(i for i in ids if i in seen or seen.add(i))
            raise ValueError(f"duplicate subject id {dup!r}")
        labels = np.fromiter((s.label for s in subjects), dtype=np.int8, count=len(subjects))
        scores = np.fromiter((s.score for s in subjects), dtype=float, count=len(subjects))
        labels.setflags(write=False)
        scores.setflags(write=False)
        object.__setattr__(self, "ids", ids)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "scores", scores)

    @classmethod
    def from_arrays(cls, labels: Iterable[int], scores: Iterable[float],
                    ids: Sequence[str] | None = None) -> "Cohort":
        labels = [int(v) for v in labels]
        scores = [float(v) for v in scores]
        if len(labels) != len(scores):
            raise ValueError("labels and scores differ in length")
        if ids is None:
            ids = [f"s{i:05d}" for i in range(len(labels))]
        return cls(tuple(ScoredSubject(str(i), y, p) for i, y, p in zip(ids, labels, scores)))

    def __len__(self) -> int:
        return len(self.subjects)

    @property
    def n(self) -> int:
        return len(self.subjects)

    @property
    def k(self) -> int:
        return int(self.labels.sum())

    @property
    def prevalence(self) -> float:
        return self.k / self.n if self.n else float("nan")

    def subset(self, indices: Sequence[int]) -> list[ScoredSubject]:
        return [self.subjects[i] for i in indices]


@dataclass(frozen=True)
class SplitAllocation:
    """Disjoint C1/C2/T index sets covering a cohort of size ``n``.

    ``c1`` is the correction pilot, ``c2`` the conformal calibration set and
    ``t`` the held-out evaluation set.
    """

    c1: tuple[int, ...]
    c2: tuple[int, ...]
    t: tuple[int, ...]
    n: int

    def __post_init__(self):
        for name in ("c1", "c2", "t"):
            object.__setattr__(self, name, tuple(int(i) for i in getattr(self, name)))
        self.validate()

    def validate(self) -> None:
        parts = {"c1": self.c1, "c2": self.c2, "t": self.t}
        for name, part in parts.items():
            if not part:
                raise ValueError(f"split part {name} is empty")
            if len(set(part)) != len(part):
                raise ValueError(f"split part {name} repeats an index")
        a, b, c = (set(p) for p in parts.values())
        if a & b or a & c or b & c:
            raise ValueError("split parts overlap")
        if a | b | c != set(range(self.n)):
            raise ValueError("split parts do not cover the cohort")


@dataclass(frozen=True)
class PredictionSet:
    includes_0: bool
    includes_1: bool

    @property
    def labels(self) -> frozenset[int]:
        return frozenset(y for y, inc in ((0, self.includes_0), (1, self.includes_1)) if inc)

    def __contains__(self, y: int) -> bool:
        return self.includes_1 if y == 1 else self.includes_0 if y == 0 else False


class TriageAction(str, enum.Enum):
    RELEASE = "release"
    FLAG = "flag"
    DEFER = "defer"


def action_of(pset: PredictionSet) -> TriageAction:
    """Map a binary prediction set to a triage action.

    ``{0}`` releases, ``{1}`` flags, and both ``{0, 1}`` and the empty set
    defer to standard review.
    """
    if pset.includes_0 and not pset.includes_1:
        return TriageAction.RELEASE
    if pset.includes_1 and not pset.includes_0:
        return TriageAction.FLAG
    return TriageAction.DEFER
