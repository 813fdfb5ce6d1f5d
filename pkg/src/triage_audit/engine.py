"""Leakage-aware audit protocol over repeated random C1/C2/T splits.

Each split runs three phases on disjoint subsets: the prevalence shift is
fitted on C1 (corrected branches only), thresholds are calibrated on C2,
and metrics are computed on T. Every phase receives only its own subset,
and the ids it was handed are written to a :class:`LabelLedger` that is
checked for pairwise disjointness before the report is assembled.

Splits come from numpy's PCG64 generator seeded with
``SeedSequence(seed, spawn_key=(split_index,))``, so each split's stream
depends only on the seed and its index and results do not depend on the
worker count.
"""

from __future__ import annotations

import enum
import hashlib
import logging
from dataclasses import dataclass, field
from decimal import Decimal
from typing import Iterable, Sequence

import numpy as np

from ._validation import check_alpha
from .conformal import Branch, CalibrationMode, TriageRule, calibrate_arrays
from .correction import DegeneratePilotError, LogitShift, _fit_arrays
from .domain import Cohort, SplitAllocation
from .metrics import AggregateMetrics, SplitMetrics, aggregate, evaluate_arrays

logger = logging.getLogger(__name__)


class Method(str, enum.Enum):
    POOLED_RAW = "pooled-raw"
    POOLED_CORRECTED = "pooled-corrected"
    CLASSWISE_RAW = "classwise-raw"
    CLASSWISE_CORRECTED = "classwise-corrected"

    @property
    def mode(self) -> CalibrationMode:
        return CalibrationMode.POOLED if self.value.startswith("pooled") else CalibrationMode.CLASSWISE

    @property
    def branch(self) -> Branch:
        return Branch.CORRECTED if self.value.endswith("corrected") else Branch.RAW


ALL_METHODS = tuple(Method)


def alpha_range(lo: float, hi: float, step: float) -> tuple[float, ...]:
    """Inclusive decimal range, e.g. ``alpha_range(0.01, 0.30, 0.01)`` has 30 points."""
    dlo, dhi, dstep = (Decimal(str(v)) for v in (lo, hi, step))
    if dstep <= 0:
        raise ValueError("alpha grid step must be positive")
    out = []
    v = dlo
    while v <= dhi:
        out.append(float(v))
        v += dstep
    return tuple(out)


DEFAULT_ALPHA_GRID = alpha_range(0.01, 0.30, 0.01)


class AuditError(RuntimeError):
    """The audit could not produce a usable result (e.g. every split failed)."""


@dataclass(frozen=True)
class AuditConfig:
    alpha: float = 0.10
    n_c1: int = 31
    n_c2: int = 31
    n_splits: int = 200
    seed: int = 0
    stratified: bool = False
    methods: tuple[Method, ...] = ALL_METHODS
    alpha_grid: tuple[float, ...] = DEFAULT_ALPHA_GRID

    def __post_init__(self):
        check_alpha(self.alpha)
        object.__setattr__(self, "methods", tuple(Method(m) for m in self.methods))
        object.__setattr__(self, "alpha_grid", tuple(float(a) for a in self.alpha_grid))
        if not self.methods:
            raise ValueError("at least one method is required")
        if len(set(self.methods)) != len(self.methods):
            raise ValueError("methods repeat")
        for a in self.alpha_grid:
            check_alpha(a, "alpha grid value")
        if any(b <= a for a, b in zip(self.alpha_grid, self.alpha_grid[1:])):
            raise ValueError("alpha grid must be strictly increasing")
        if self.n_c1 < 1 or self.n_c2 < 1:
            raise ValueError("split sizes must be at least 1")
        if self.n_splits < 1:
            raise ValueError("n_splits must be at least 1")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")

    def check_cohort(self, n: int) -> None:
        if self.n_c1 + self.n_c2 >= n:
            raise ValueError(
                f"split sizes exceed cohort: n_c1 + n_c2 = {self.n_c1 + self.n_c2} leaves no "
                f"evaluation subjects out of {n}")

    @property
    def alphas(self) -> tuple[float, ...]:
        """Every level evaluated: the primary alpha plus the CTOC grid."""
        return tuple(sorted(set(self.alpha_grid) | {self.alpha}))

    def as_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "n_c1": self.n_c1,
            "n_c2": self.n_c2,
            "n_splits": self.n_splits,
            "seed": self.seed,
            "stratified": self.stratified,
            "methods": [m.value for m in self.methods],
            "alpha_grid": list(self.alpha_grid),
        }


def split_rng(seed: int, split_index: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(split_index,))))


def largest_remainder(total: int, sizes: Sequence[int]) -> list[int]:
    """Apportion ``total`` in proportion to ``sizes``; ties go to the earlier part."""
    n = sum(sizes)
    quotas = [Decimal(total * s) / Decimal(n) for s in sizes]
    base = [int(q) for q in quotas]
    left = total - sum(base)
    order = sorted(range(len(sizes)), key=lambda i: (-(quotas[i] - base[i]), i))
    for i in order[:left]:
        base[i] += 1
    return base


def generate_split(cohort: Cohort, config: AuditConfig, split_index: int) -> SplitAllocation:
    """Deterministic C1/C2/T allocation for ``(config.seed, split_index)``."""
    n = cohort.n
    config.check_cohort(n)
    n_t = n - config.n_c1 - config.n_c2
    rng = split_rng(config.seed, split_index)
    if not config.stratified:
        perm = rng.permutation(n)
        c1 = perm[:config.n_c1]
        c2 = perm[config.n_c1:config.n_c1 + config.n_c2]
        t = perm[config.n_c1 + config.n_c2:]
        return SplitAllocation(tuple(sorted(c1)), tuple(sorted(c2)), tuple(sorted(t)), n)

    sizes = (config.n_c1, config.n_c2, n_t)
    event_idx = np.flatnonzero(cohort.labels == 1)
    nonevent_idx = np.flatnonzero(cohort.labels == 0)
    ev_alloc = largest_remainder(len(event_idx), sizes)
    ne_alloc = [s - e for s, e in zip(sizes, ev_alloc)]
    if any(v < 0 for v in ne_alloc) or sum(ne_alloc) > len(nonevent_idx):
        raise ValueError("stratified allocation demands more subjects of a class than exist")
    ev = rng.permutation(event_idx)
    ne = rng.permutation(nonevent_idx)
    parts = []
    e0 = n0 = 0
    for e_cnt, n_cnt in zip(ev_alloc, ne_alloc):
        parts.append(tuple(sorted(np.concatenate([ev[e0:e0 + e_cnt], ne[n0:n0 + n_cnt]]).tolist())))
        e0 += e_cnt
        n0 += n_cnt
    return SplitAllocation(parts[0], parts[1], parts[2], n)


PHASES = ("fit", "calibrate", "evaluate")


@dataclass
class LabelLedger:
    """Subject ids whose labels each phase was given, for one split."""

    split_index: int
    access: dict[str, set[str]] = field(default_factory=lambda: {p: set() for p in PHASES})

    def record(self, phase: str, ids: Iterable[str]) -> None:
        self.access[phase].update(ids)

    def is_disjoint(self) -> bool:
        f, c, e = (self.access[p] for p in PHASES)
        return not (f & c or f & e or c & e)

    def check(self) -> None:
        if not self.is_disjoint():
            raise AuditError(f"label leakage between audit phases in split {self.split_index}")


@dataclass(frozen=True)
class BranchResult:
    split_index: int
    method: Method
    alpha: float
    metrics: SplitMetrics | None
    rule: TriageRule | None
    shift: LogitShift | None
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.metrics is not None


class _Phase:
    """A subset's ids, labels and scores, handed to exactly one phase."""

    def __init__(self, cohort: Cohort, indices: Sequence[int]):
        idx = np.asarray(indices, dtype=np.intp)
        self.ids = [cohort.ids[i] for i in idx]
        self.labels = cohort.labels[idx]
        self.scores = cohort.scores[idx]


def _fit_phase(c1: _Phase, ledger: LabelLedger) -> LogitShift:
    ledger.record("fit", c1.ids)
    return _fit_arrays(c1.scores, c1.labels.astype(float))


def _calibrate_phase(c2: _Phase, method: Method, alpha: float, shift, ledger) -> TriageRule:
    ledger.record("calibrate", c2.ids)
    return calibrate_arrays(c2.scores, c2.labels, method.mode, method.branch, alpha, shift)


def _evaluate_phase(t: _Phase, rule: TriageRule, ledger: LabelLedger) -> SplitMetrics:
    ledger.record("evaluate", t.ids)
    return evaluate_arrays(t.scores, t.labels, rule)


def _run_split(cohort: Cohort, allocation: SplitAllocation, split_index: int,
               methods: Sequence[Method], alphas: Sequence[float]):
    ledger = LabelLedger(split_index)
    c2 = _Phase(cohort, allocation.c2)
    t = _Phase(cohort, allocation.t)
    shift = None
    fit_error = None
    if any(m.branch is Branch.CORRECTED for m in methods):
        try:
            # Fitted once per split and frozen for every method and alpha.
            shift = _fit_phase(_Phase(cohort, allocation.c1), ledger)
        except DegeneratePilotError as exc:
            fit_error = str(exc)
    results = []
    for alpha in alphas:
        for method in methods:
            if method.branch is Branch.CORRECTED and shift is None:
                results.append(BranchResult(split_index, method, alpha, None, None, None, fit_error))
                continue
            m_shift = shift if method.branch is Branch.CORRECTED else None
            rule = _calibrate_phase(c2, method, alpha, m_shift, ledger)
            metrics = _evaluate_phase(t, rule, ledger)
            results.append(BranchResult(split_index, method, alpha, metrics, rule, m_shift))
    ledger.check()
    return results, ledger


def run_branch(cohort: Cohort, allocation: SplitAllocation, method: Method | str,
               alpha: float, split_index: int = 0) -> BranchResult:
    """Run one method on one split. Raw branches never touch C1.

    Raises
    ------
    DegeneratePilotError
        If a corrected branch meets a single-class pilot subset.
    """
    method = Method(method)
    alpha = check_alpha(alpha)
    if allocation.n != cohort.n:
        raise ValueError("allocation does not match cohort size")
    (result,), _ = _run_split(cohort, allocation, split_index, [method], [alpha])
    if not result.ok:
        raise DegeneratePilotError(result.error)
    return result


@dataclass(frozen=True)
class CtocPoint:
    alpha: float
    mean_hrr: float | None
    mean_fn_rel: float | None
    n_ok: int


@dataclass
class AuditReport:
    config: AuditConfig
    allocations: list[SplitAllocation]
    results: list[BranchResult]
    ledgers: list[LabelLedger]
    aggregates: dict[Method, AggregateMetrics]
    ctoc: dict[Method, list[CtocPoint]]
    failed_splits: dict[Method, int]
    provenance: dict[str, str | int]

    def rows(self, method: Method | str | None = None, alpha: float | None = None):
        for r in self.results:
            if method is not None and r.method is not Method(method):
                continue
            if alpha is not None and r.alpha != alpha:
                continue
            yield r

    def split_metrics(self, method: Method | str, alpha: float | None = None) -> list[SplitMetrics]:
        a = self.config.alpha if alpha is None else alpha
        return [r.metrics for r in self.rows(method, a) if r.ok]

    def validate(self) -> None:
        """Re-check split disjointness and the phase ledger for every split."""
        for alloc, ledger in zip(self.allocations, self.ledgers):
            alloc.validate()
            ledger.check()


def _mean_defined(values) -> float | None:
    vals = [v for v in values if v is not None]
    return float(np.mean(vals)) if vals else None


def input_digest(data: bytes) -> str:
    return "sha256:" + hashlib.sha256(data).hexdigest()


def run_audit(cohort: Cohort, config: AuditConfig, *, n_jobs: int | None = None,
              input_sha256: str | None = None) -> AuditReport:
    """Run every split and method at the primary alpha and across the CTOC grid.

    The same allocations are reused for every alpha. Splits whose pilot
    subset is single-class are recorded as failed for the corrected methods
    and excluded from their aggregates.

    Raises
    ------
    AuditError
        If some method has no successful split, or no evaluation set holds
        an event.
    """
    from . import __version__

    config.check_cohort(cohort.n)
    allocations = [generate_split(cohort, config, i) for i in range(config.n_splits)]
    alphas = config.alphas

    if n_jobs is not None and n_jobs != 1:
        from joblib import Parallel, delayed
        outputs = Parallel(n_jobs=n_jobs)(
            delayed(_run_split)(cohort, a, i, config.methods, alphas)
            for i, a in enumerate(allocations))
    else:
        outputs = [_run_split(cohort, a, i, config.methods, alphas)
                   for i, a in enumerate(allocations)]
    outputs = sorted(outputs, key=lambda o: o[1].split_index)
    results = [r for res, _ in outputs for r in res]
    ledgers = [led for _, led in outputs]

    aggregates: dict[Method, AggregateMetrics] = {}
    failed: dict[Method, int] = {}
    ctoc: dict[Method, list[CtocPoint]] = {}
    by_key: dict[tuple[Method, float], list[BranchResult]] = {}
    for r in results:
        by_key.setdefault((r.method, r.alpha), []).append(r)

    for method in config.methods:
        primary = by_key[(method, config.alpha)]
        ok = [r.metrics for r in primary if r.ok]
        failed[method] = len(primary) - len(ok)
        if failed[method]:
            logger.warning("%s: %d of %d splits failed", method.value, failed[method], len(primary))
        if not ok:
            raise AuditError(f"every split failed for {method.value}")
        try:
            aggregates[method] = aggregate(ok)
        except ValueError as exc:
            raise AuditError(f"{method.value}: {exc}") from None
        points = []
        for a in config.alpha_grid:
            ms = [r.metrics for r in by_key[(method, a)] if r.ok]
            points.append(CtocPoint(a, _mean_defined(m.hrr for m in ms),
                                    _mean_defined(m.fn_rel for m in ms), len(ms)))
        ctoc[method] = points

    provenance = {
        "artifact_version": __version__,
        "input_digest": input_sha256 or "",
        "seed": config.seed,
        "rng": "numpy.random.PCG64 via SeedSequence(seed, spawn_key=(split_index,))",
        "alpha_grid_reuses_splits": "true",
    }
    report = AuditReport(config, allocations, results, ledgers, aggregates, ctoc, failed, provenance)
    report.validate()
    return report
