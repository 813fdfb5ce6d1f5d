import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from triage_audit.correction import (
    FIT_TOL, DegeneratePilotError, LogitShift, LogitShiftCorrector, apply_correction,
    fit_logit_shift, solve_shift,
)
from triage_audit.domain import ScoredSubject


def pilot(labels, scores):
    return [ScoredSubject(f"p{i}", y, p) for i, (y, p) in enumerate(zip(labels, scores))]


def test_identity_shift_when_mean_matches():
    # mean score 0.25 equals pilot prevalence 1/4
    shift = fit_logit_shift(pilot([1, 0, 0, 0], [0.1, 0.2, 0.3, 0.4]))
    assert abs(shift.b) < 1e-8


def test_constant_half_scores_closed_form():
    shift = fit_logit_shift(pilot([1, 0, 0, 0], [0.5] * 4))
    assert shift.b == pytest.approx(math.log(0.25 / 0.75), abs=1e-8)
    assert shift.b == pytest.approx(-1.0986, abs=1e-4)
    # direct evaluation of the corrected score
    assert 1 / (1 + math.exp(-shift.b)) == pytest.approx(0.25, abs=1e-10)


def test_sign_matches_brute_force_scan():
    rng = np.random.default_rng(3)
    scores = rng.uniform(0.3, 0.9, size=40)
    labels = [1] * 6 + [0] * 34  # prevalence 0.15, far below mean score
    grid = np.linspace(-10, 10, 20001)
    means = [np.mean(1 / (1 + np.exp(-(np.log(scores / (1 - scores)) + b)))) for b in grid]
    b_scan = grid[int(np.argmin(np.abs(np.array(means) - 0.15)))]
    shift = fit_logit_shift(pilot(labels, scores))
    assert shift.b < 0
    assert shift.b == pytest.approx(b_scan, abs=2e-3)


def test_residual_within_tolerance():
    rng = np.random.default_rng(0)
    scores = rng.beta(2, 3, size=31)
    labels = (rng.random(31) < 0.3).astype(int)
    labels[0], labels[1] = 1, 0
    shift = fit_logit_shift(pilot(labels, scores))
    corrected = apply_correction(scores, shift)
    assert abs(corrected.mean() - labels.mean()) <= FIT_TOL
    assert shift.residual <= FIT_TOL
    assert shift.fitted_on_prevalence == labels.mean()


@pytest.mark.parametrize("labels", [[0, 0, 0], [1, 1, 1]])
def test_degenerate_pilot(labels):
    with pytest.raises(DegeneratePilotError, match="degenerate pilot prevalence"):
        fit_logit_shift(pilot(labels, [0.2, 0.5, 0.7]))


def test_empty_pilot():
    with pytest.raises(ValueError):
        fit_logit_shift([])


def test_root_outside_initial_bracket():
    # logit(1e-15) is about -34.5, so matching 0.5 needs b of about +34.5
    b, resid = solve_shift(np.full(5, 1e-15), 0.5)
    assert b == pytest.approx(-math.log(1e-15 / (1 - 1e-15)), abs=1e-6)
    assert resid <= FIT_TOL


def test_root_beyond_widest_bracket():
    with pytest.raises(DegeneratePilotError):
        solve_shift(np.full(5, 1e-30), 0.5)


def test_apply_identity_and_scalar():
    assert apply_correction(0.5, LogitShift(0.0)) == 0.5
    assert isinstance(apply_correction(0.3, 1.2), float)


@given(p=st.floats(1e-6, 1 - 1e-6), b=st.floats(-8, 8))
def test_round_trip(p, b):
    assert apply_correction(apply_correction(p, b), -b) == pytest.approx(p, abs=1e-12)


@given(p1=st.floats(1e-6, 1 - 1e-6), p2=st.floats(1e-6, 1 - 1e-6), b=st.floats(-3, 3))
def test_strictly_increasing(p1, p2, b):
    if p1 == p2:
        return
    lo, hi = sorted((p1, p2))
    if hi - lo < 1e-9:
        return  # below float resolution of the logit
    assert apply_correction(lo, b) < apply_correction(hi, b)


@settings(max_examples=50)
@given(st.lists(st.floats(0.01, 0.99), min_size=4, max_size=60), st.data())
def test_fit_objective_increasing_in_b(scores, data):
    scores = np.array(scores)
    b1 = data.draw(st.floats(-5, 5))
    b2 = data.draw(st.floats(-5, 5))
    if abs(b1 - b2) < 1e-6:
        return
    lo, hi = sorted((b1, b2))
    assert apply_correction(scores, lo).mean() < apply_correction(scores, hi).mean()


def test_corrector_estimator():
    corr = LogitShiftCorrector().fit(np.full(4, 0.5), [1, 0, 0, 0])
    assert corr.b_ == pytest.approx(-1.0986, abs=1e-4)
    out = corr.transform([0.5, 0.9])
    assert out[0] == pytest.approx(0.25)
    back = corr.inverse_transform(out)
    np.testing.assert_allclose(back, [0.5, 0.9], atol=1e-12)
    assert corr.get_params() == {}
