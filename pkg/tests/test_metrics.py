import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from triage_audit.conformal import Branch, CalibrationMode, TriageRule, calibrate_arrays
from triage_audit.domain import PredictionSet, ScoredSubject, TriageAction, action_of
from triage_audit.metrics import (
    SplitMetrics, aggregate, evaluate_arrays, evaluate_split, metrics_from_sets, nearest_rank,
)


def brute_force_metrics(labels, sets):
    """Per-subject enumeration straight from the metric definitions."""
    n = len(labels)
    acts = [action_of(s) for s in sets]
    ev = [i for i in range(n) if labels[i] == 1]
    rel = [i for i in range(n) if acts[i] is TriageAction.RELEASE]
    return {
        "release_rate": len(rel) / n,
        "hrr": 1 - len(rel) / n,
        "c_marg": sum(labels[i] in sets[i].labels for i in range(n)) / n,
        "c_ev": sum(1 in sets[i].labels for i in ev) / len(ev) if ev else None,
        "fn_rel": sum(sets[i].labels == {0} for i in ev) / len(ev) if ev else None,
        "p_rel": sum(labels[i] for i in rel) / len(rel) if rel else None,
    }


def as_arrays(sets):
    return (np.array([s.includes_0 for s in sets]), np.array([s.includes_1 for s in sets]))


def test_four_subject_example():
    labels = np.array([1, 1, 0, 0])
    sets = [PredictionSet(True, False), PredictionSet(True, True),
            PredictionSet(True, False), PredictionSet(False, True)]
    m = metrics_from_sets(labels, *as_arrays(sets))
    assert (m.release_rate, m.hrr, m.c_marg, m.c_ev, m.fn_rel, m.p_rel) == (0.5,) * 6
    assert m.flag_rate == 0.25 and m.defer_rate == 0.25 and m.empty_rate == 0.0


def test_infinite_event_threshold_gives_zero_event_release():
    rule = TriageRule(CalibrationMode.CLASSWISE, Branch.RAW, 0.1, classwise_q0=0.4, classwise_q1=math.inf)
    subs = [ScoredSubject(f"t{i}", int(i % 3 == 0), p)
            for i, p in enumerate(np.linspace(0.01, 0.99, 30))]
    m = evaluate_split(subs, rule)
    assert m.fn_rel == 0.0 and m.c_ev == 1.0


def test_all_deferred():
    rule = TriageRule(CalibrationMode.POOLED, Branch.RAW, 0.1, pooled_q=1.0)
    subs = [ScoredSubject(f"t{i}", i % 2, 0.3) for i in range(10)]
    m = evaluate_split(subs, rule)
    assert m.hrr == 1.0 and m.p_rel is None and m.n_released == 0


def test_no_events_leaves_event_metrics_undefined():
    rule = TriageRule(CalibrationMode.POOLED, Branch.RAW, 0.1, pooled_q=0.5)
    m = evaluate_split([ScoredSubject("a", 0, 0.2), ScoredSubject("b", 0, 0.3)], rule)
    assert m.c_ev is None and m.fn_rel is None and m.n_eval_events == 0


def test_empty_evaluation_rejected():
    rule = TriageRule(CalibrationMode.POOLED, Branch.RAW, 0.1, pooled_q=0.5)
    with pytest.raises(ValueError):
        evaluate_split([], rule)


set_strategy = st.tuples(st.booleans(), st.booleans()).map(lambda t: PredictionSet(*t))


@settings(max_examples=200)
@given(st.lists(st.tuples(st.integers(0, 1), set_strategy), min_size=1, max_size=40))
def test_vectorized_matches_brute_force_and_invariants(rows):
    labels = np.array([y for y, _ in rows])
    sets = [s for _, s in rows]
    m = metrics_from_sets(labels, *as_arrays(sets))
    ref = brute_force_metrics(labels.tolist(), sets)
    for k, v in ref.items():
        assert getattr(m, k) == (pytest.approx(v) if v is not None else None)
    n = m.n_eval
    # exact count identities
    strict_defer = sum(s.labels == {0, 1} for s in sets)
    empty = sum(not s.labels for s in sets)
    assert m.n_released + round(m.flag_rate * n) + strict_defer + empty == n
    assert round(m.defer_rate * n) == strict_defer + empty
    assert m.hrr + m.release_rate == 1.0
    n_cov_ev = sum(1 in s.labels for y, s in rows if y == 1)
    assert m.n_covered_events == n_cov_ev
    if m.fn_rel is not None:
        # event-release is a subset of event-miscoverage; checked in exact rationals
        assert m.exact("fn_rel") <= 1 - m.exact("c_ev")
        assert m.n_released_events <= m.n_eval_events - n_cov_ev
        assert float(m.exact("fn_rel")) == m.fn_rel
    if m.p_rel is not None:
        assert m.exact("p_rel") * m.n_released == m.n_released_events
    else:
        assert m.n_released == 0


def test_alpha_decrease_never_lowers_coverage():
    rng = np.random.default_rng(3)
    cal = rng.uniform(size=40)
    lab = (rng.random(40) < 0.3).astype(int)
    test = rng.uniform(size=200)
    tlab = (rng.random(200) < 0.3).astype(int)
    prev = None
    for alpha in (0.3, 0.25, 0.2, 0.15, 0.1, 0.05, 0.02):
        m = evaluate_arrays(test, tlab, calibrate_arrays(cal, lab, "pooled", "raw", alpha))
        if prev is not None:
            assert m.c_marg >= prev.c_marg and m.c_ev >= prev.c_ev
        prev = m


def _sm(fn_rel, hrr=0.5, n_ev=3):
    return SplitMetrics(1 - hrr, 0.0, hrr, 0.0, hrr, 0.9, None if fn_rel is None else 1 - fn_rel,
                        fn_rel, None, 10, n_ev if fn_rel is not None else 0, 5, 0, 0)


def test_nearest_rank_brute_force():
    rng = np.random.default_rng(0)
    for m in range(1, 60):
        vals = rng.uniform(size=m).tolist()
        # smallest value v such that at least 95% of values are <= v
        ref = min(v for v in vals if sum(w <= v for w in vals) * 100 >= 95 * m)
        assert nearest_rank(vals, 95) == ref


def test_fn_p95_golden_twenty_splits():
    # rank ceil(0.95 * 20) = 19 picks the 19th sorted value, which is 0.0
    agg = aggregate([_sm(0.0)] * 19 + [_sm(1.0)])
    assert agg.fn_p95 == 0.0
    agg = aggregate([_sm(0.0)] * 18 + [_sm(1.0)] * 2)
    assert agg.fn_p95 == 1.0


def test_aggregate_singleton():
    agg = aggregate([_sm(0.25, hrr=0.4)])
    assert agg["hrr"].mean == 0.4 and agg["hrr"].std == 0.0
    assert agg.fn_p95 == 0.25 and agg.n_splits == 1


def test_aggregate_population_std_and_undefined_exclusion():
    agg = aggregate([_sm(0.0, hrr=0.2), _sm(None, hrr=0.4), _sm(0.5, hrr=0.6)])
    assert agg["hrr"].mean == pytest.approx(0.4)
    assert agg["hrr"].std == pytest.approx(np.std([0.2, 0.4, 0.6]))
    assert agg["fn_rel"].n_defined == 2 and agg["fn_rel"].mean == 0.25
    assert agg["p_rel"].mean is None and agg["p_rel"].n_defined == 0
    assert agg.n_splits == 3 and agg.n_splits_with_events == 2


def test_aggregate_errors():
    with pytest.raises(ValueError):
        aggregate([])
    with pytest.raises(ValueError, match="fn_rel"):
        aggregate([_sm(None), _sm(None)])
