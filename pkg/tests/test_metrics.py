import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import brute_force_auc

from synthsteal import metrics
from synthsteal.exceptions import ConfigError, InputError, ShapeError
from synthsteal.metrics import HistogramSpec

scores = st.lists(st.integers(0, 6).map(float), min_size=1, max_size=8)


def test_agreement_examples():
    assert metrics.agreement([0, 1, 2], [0, 1, 2]) == 1.0
    assert metrics.agreement([0, 1, 1, 0], [1, 0, 0, 1]) == 0.0
    assert metrics.agreement([0, 1, 1, 0], [0, 1, 0, 0]) == 0.75


def test_length_mismatch():
    with pytest.raises(InputError):
        metrics.accuracy([0, 1], [0])


def test_f1_examples():
    assert metrics.f1([1, 0, 1], [1, 0, 1]) == 1.0
    assert metrics.f1([0, 0, 0], [1, 0, 1]) == 0.0
    # TP=2, FP=1, FN=1
    assert np.isclose(metrics.f1([1, 1, 1, 0, 0], [1, 1, 0, 1, 0]), 2 / 3)


def test_auc_examples():
    assert metrics.roc_auc([0.9, 0.8], [0.7, 0.1]) == 1.0
    assert metrics.roc_auc([0.3, 0.5, 0.5], [0.5, 0.3, 0.5]) == 0.5
    assert metrics.roc_auc([0.9, 0.6], [0.7, 0.1]) == 0.75


def test_auc_empty_side():
    with pytest.raises(InputError):
        metrics.roc_auc([], [0.1])


@settings(max_examples=300, deadline=None)
@given(scores, scores)
def test_auc_matches_brute_force(pos, neg):
    assert metrics.roc_auc(pos, neg) == brute_force_auc(pos, neg)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=1, max_size=20, unique=True),
       st.lists(st.floats(-5, 5), min_size=1, max_size=20, unique=True))
def test_auc_complement(pos, neg):
    if set(pos) & set(neg):
        return
    assert np.isclose(metrics.roc_auc(pos, neg) + metrics.roc_auc(neg, pos), 1.0)


def test_tpr_full_separation():
    for level in (0.01, 0.1, 0.5):
        assert metrics.tpr_at_fpr([5, 6, 7], [1, 2, 3], level) == 1.0


def test_tpr_equal_distributions_monte_carlo():
    rng = np.random.default_rng(0)
    tpr = metrics.tpr_at_fpr(rng.normal(size=10_000), rng.normal(size=10_000), 0.01)
    assert abs(tpr - 0.01) <= 0.005


def test_tpr_conservative_rule():
    neg = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0]
    # one false positive allowed: threshold must sit above 0.9
    assert metrics.tpr_at_fpr([0.95, 0.85, 0.92], neg, 0.1) == pytest.approx(2 / 3)
    # fewer than one allowed: above every negative
    assert metrics.tpr_at_fpr([0.95, 1.5], neg, 0.05) == 0.5


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=1, max_size=30), st.lists(st.floats(0, 1), min_size=1, max_size=30))
def test_tpr_monotone_in_level(pos, neg):
    levels = np.linspace(0.01, 0.99, 25)
    vals = [metrics.tpr_at_fpr(pos, neg, lv) for lv in levels]
    assert all(a <= b for a, b in zip(vals, vals[1:]))


def test_mse_examples():
    x = np.random.default_rng(0).normal(size=(4, 3))
    assert metrics.mse(x, x) == 0.0
    assert np.isclose(metrics.mse(x, x + 1), 1.0)
    assert metrics.mse([[0.0], [2.0]], [[1.0], [2.0]]) == 0.5
    with pytest.raises(ShapeError):
        metrics.mse(x, x[:2])


def test_kl_identical_sets_near_zero():
    x = np.random.default_rng(0).random((500, 3))
    assert metrics.histogram_kl(x, x) == 0.0


def test_kl_gaussian_closed_form():
    rng = np.random.default_rng(0)
    p, q = rng.normal(0, 1, 100_000), rng.normal(1, 1, 100_000)
    spec = HistogramSpec(bins_per_dim=50, low=-5.0, high=6.0)
    kl_pq = metrics.histogram_kl(p, q, spec)
    assert abs(kl_pq - 0.5) <= 0.1
    skew = rng.gamma(2.0, 1.0, 100_000) - 1
    assert not np.isclose(metrics.histogram_kl(p, skew, spec), metrics.histogram_kl(skew, p, spec))


def test_kl_sparse_matches_dense_enumeration():
    rng = np.random.default_rng(1)
    p, q = rng.random((50, 2)), rng.random((70, 2)) ** 2
    spec = HistogramSpec(bins_per_dim=4, alpha=0.5)
    hp = np.histogramdd(p, bins=4, range=[(0, 1)] * 2)[0].ravel() + 0.5
    hq = np.histogramdd(q, bins=4, range=[(0, 1)] * 2)[0].ravel() + 0.5
    hp, hq = hp / hp.sum(), hq / hq.sum()
    assert np.isclose(metrics.histogram_kl(p, q, spec), np.sum(hp * np.log(hp / hq)))


def test_kl_nonnegative_and_high_dim_sparse():
    rng = np.random.default_rng(2)
    p = rng.dirichlet(np.ones(10), 300)
    q = rng.dirichlet(np.ones(10) * 0.3, 300)
    assert metrics.histogram_kl(p, q) >= 0  # 10^10 cells, stored sparsely


def test_kl_cell_overflow_is_config_error():
    with pytest.raises(ConfigError):
        metrics.histogram_kl(np.zeros((2, 70)), np.zeros((2, 70)))
