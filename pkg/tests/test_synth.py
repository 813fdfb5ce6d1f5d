import numpy as np
import pytest

from triage_audit.synth import BetaDist, LabelMode, SynthSpec, generate, scenario


def test_deterministic():
    spec = scenario("separable-low-prevalence").with_(seed=3)
    a, b = generate(spec), generate(spec)
    assert a == b
    np.testing.assert_array_equal(a.scores, b.scores)


def test_fixed_count_events():
    c = generate(scenario("separable-low-prevalence"))
    assert (c.n, c.k) == (123, 28)
    assert np.all((c.scores > 0) & (c.scores < 1))


def test_different_seeds_differ():
    base = scenario("separable-low-prevalence")
    a, b = generate(base.with_(seed=1)), generate(base.with_(seed=2))
    assert a.n == b.n and a.k == b.k
    assert not np.array_equal(a.scores, b.scores)


def test_bernoulli_labels():
    c = generate(SynthSpec(5000, 0.3, BetaDist(2, 2), BetaDist(2, 2), seed=1,
                           label_mode=LabelMode.BERNOULLI))
    assert abs(c.prevalence - 0.3) < 0.03


def _auc(pos, neg):
    # Mann-Whitney statistic by rank sums
    allv = np.concatenate([pos, neg])
    ranks = allv.argsort().argsort() + 1
    return (ranks[:len(pos)].sum() - len(pos) * (len(pos) + 1) / 2) / (len(pos) * len(neg))


def test_identical_distributions_give_chance_auc():
    aucs = []
    for seed in range(200):
        c = generate(SynthSpec(123, 0.228, BetaDist(3, 3), BetaDist(3, 3), seed=seed))
        aucs.append(_auc(c.scores[c.labels == 1], c.scores[c.labels == 0]))
    assert abs(np.mean(aucs) - 0.5) < 0.02


def test_presets():
    assert scenario("iid-coverage-check").n == 20_000
    assert scenario("separable-low-prevalence").pi == 0.228
    assert scenario("overlapping-low-prevalence") == scenario("overlapping-low-prevalence")
    with pytest.raises(ValueError, match="unknown scenario"):
        scenario("nope")


def test_spec_validation():
    with pytest.raises(ValueError):
        BetaDist(0, 1)
    with pytest.raises(ValueError):
        SynthSpec(0, 0.2, BetaDist(1, 1), BetaDist(1, 1))
