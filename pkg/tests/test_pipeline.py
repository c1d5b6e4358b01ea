import numpy as np
import pytest
from oracles import constant_target, linear_target

from synthsteal.data import Dataset, circle_means
from synthsteal.exceptions import CapabilityError, ClassStarvationError, ConfigError
from synthsteal.generator import ConditionalGaussianGenerator, ShiftKnobs
from synthsteal.mlp import MLPClassifier
from synthsteal.pipeline import (
    PipelineConfig,
    augment,
    inter_class_filter,
    sample_shell,
    sigma_outliers,
    step1_generate,
)
from synthsteal.target import FunctionTarget, LocalTarget


def one_anchor(x):
    """Class-0 anchor at ``x`` plus a far-away class-1 anchor so both classes exist."""
    return Dataset(np.array([x, [50.0, 0.0]], dtype=float), np.array([0, 1]), 2)


def test_constant_classifier_gives_n_times_rounds_per_anchor():
    D_a = Dataset(np.random.default_rng(0).normal(size=(6, 3)), np.zeros(6, dtype=int), 1)
    cfg = PipelineConfig(shell_samples=3, max_rounds=4, anchors_per_class=2, seed=1)
    D_aux, rep = augment(constant_target(1, 3, c=0), D_a, cfg)
    assert rep.rounds_kept == [[4, 4]]
    assert len(D_aux) - len(D_a) == 2 * 12


def test_large_delta0_halts_in_first_round():
    target = linear_target([1.0, 0.0], 0.0)  # class 1 iff x0 > 0
    cfg = PipelineConfig(delta0=1.0, step=0.2, shell_samples=100, seed=0)
    D_aux, rep = augment(target, one_anchor([-0.1, 0.0]), cfg)
    assert rep.rounds_kept[0] == [0]
    assert len(D_aux.of_class(0)) == 1


def test_rounds_match_distance_to_hyperplane():
    target = linear_target([1.0, 0.0], 0.0)
    for seed in range(5):
        cfg = PipelineConfig(delta0=0.2, step=0.2, shell_samples=50, seed=seed)
        _, rep = augment(target, one_anchor([-1.0, 0.0]), cfg)
        # rounds with outer radius <= 1.0 cannot cross: r_0..r_4
        assert abs(rep.rounds_kept[0][0] - (np.floor((1.0 - 0.2) / 0.2) + 1)) <= 1


def test_augmented_points_keep_label_and_stay_in_bound():
    rng = np.random.default_rng(0)
    X = np.vstack([rng.normal(-2, 0.5, (10, 2)), rng.normal(2, 0.5, (10, 2))])
    y = np.repeat([0, 1], 10)
    target = linear_target([1.0, 0.0], 0.0)
    cfg = PipelineConfig(delta0=0.1, step=0.1, shell_samples=4, max_rounds=30, anchors_per_class=3, seed=2)
    D_a = Dataset(X, y, 2)
    D_aux, _ = augment(target, D_a, cfg)
    new = D_aux.subset(np.arange(len(D_a), len(D_aux)))
    assert np.array_equal(target.query_label(new.X), new.y)
    bound = cfg.delta0 + cfg.max_rounds * cfg.step
    dists = np.min(np.linalg.norm(new.X[:, None, :] - X[None, :, :], axis=2), axis=1)
    assert np.all(dists <= bound + 1e-12)


def test_per_class_streams_independent_of_other_classes():
    rng = np.random.default_rng(3)
    X = rng.normal(size=(8, 2))
    a = Dataset(X, np.array([0, 0, 0, 0, 1, 1, 1, 1]), 2)
    b = Dataset(np.vstack([X[:4], X[4:] + 5]), a.y, 2)
    target = constant_target(2, 2, c=0)
    cfg = PipelineConfig(shell_samples=2, max_rounds=3, anchors_per_class=2, seed=9)
    out_a, _ = augment(target, a, cfg)
    out_b, _ = augment(target, b, cfg)
    assert np.array_equal(out_a.of_class(0).X, out_b.of_class(0).X)


@pytest.mark.parametrize("p", [1, 2, np.inf])
def test_shell_radii_within_bounds(p):
    pts = sample_shell(np.zeros(5), 0.3, 0.5, 2000, p, np.random.default_rng(0))
    r = np.linalg.norm(pts, ord=p, axis=1)
    assert np.all((r > 0.3 - 1e-12) & (r <= 0.5 + 1e-12))


def test_config_rejects_zero_shell_samples():
    with pytest.raises(ConfigError):
        PipelineConfig(shell_samples=0)


@pytest.fixture(scope="module")
def benchmark_target():
    means = circle_means(4, 8, 3.0)
    rng = np.random.default_rng(0)
    y = np.repeat(np.arange(4), 100)
    X = means[y] + rng.normal(size=(400, 8))
    return LocalTarget(MLPClassifier(n_classes=4, epochs=100).fit(X, y)), means


def test_step1_zero_shift_survival(benchmark_target):
    target, means = benchmark_target
    gen = ConditionalGaussianGenerator(means, 1.0, ShiftKnobs(1.0, 0.0), seed=0)
    D_a, rep = step1_generate(target, gen, PipelineConfig(per_class_n=20))
    assert rep.kept == [20] * 4
    assert all(k / (k + d) >= 0.9 for k, d in zip(rep.kept, rep.discarded))
    assert np.array_equal(target.query_label(D_a.X), D_a.y)


def test_step1_adversarial_generator_starves(benchmark_target):
    target, means = benchmark_target
    gen = ConditionalGaussianGenerator(np.roll(means, -1, axis=0), 1.0, ShiftKnobs(0.05, 0.0), seed=0)
    with pytest.raises(ClassStarvationError) as err:
        step1_generate(target, gen, PipelineConfig(per_class_n=10))
    assert err.value.class_id == 0


def test_step1_zero_count(benchmark_target):
    target, means = benchmark_target
    D_a, _ = step1_generate(target, ConditionalGaussianGenerator(means), PipelineConfig(per_class_n=0))
    assert len(D_a) == 0


def test_sigma_outliers_hand_computed():
    d = np.array([1.0] * 99 + [100.0])
    assert np.isclose(d.mean(), 1.99)
    assert np.isclose(d.std(), 9.85, atol=0.005)
    assert list(np.flatnonzero(sigma_outliers(d))) == [99]


def table_target(outputs):
    """Target whose output for row ``x`` is ``outputs[int(x[0])]``."""
    outputs = np.asarray(outputs, dtype=float)
    return FunctionTarget(lambda X: outputs[X[:, 0].astype(int)], outputs.shape[1], 1)


def test_filter_removes_exactly_the_outlier():
    # class 0: a single point at [0, 0]; class 1: 99 points at distance 1, one at distance 100
    outputs = [[0.0, 0.0]] + [[1.0, 0.0]] * 99 + [[100.0, 0.0]]
    D = Dataset(np.arange(101.0)[:, None], np.array([0] + [1] * 100), 2)
    kept, rep = inter_class_filter(table_target(outputs), D)
    assert rep.removed == [100]
    assert rep.kept_counts == [1, 99]
    pair = next(p for p in rep.pairs if p["i"] == 0 and p["k"] == 1)
    assert np.isclose(pair["mean"], 1.99)


def test_filter_identical_outputs_remove_nothing():
    target = constant_target(3, 2)
    D = Dataset(np.random.default_rng(0).normal(size=(30, 2)), np.repeat([0, 1, 2], 10), 3)
    kept, rep = inter_class_filter(target, D)
    assert kept.equals(D) and rep.removed == []


def test_filter_single_class_is_identity():
    D = Dataset(np.zeros((5, 2)), np.zeros(5, dtype=int), 1)
    kept, rep = inter_class_filter(constant_target(1, 2), D)
    assert kept.equals(D) and rep.pairs == []


def test_filter_needs_confidence():
    D = Dataset(np.zeros((2, 2)), np.array([0, 1]), 2)
    with pytest.raises(CapabilityError):
        inter_class_filter(constant_target(2, 2, mode="label"), D)


def test_filter_subset_and_monotone_in_sigma(benchmark_target):
    target, means = benchmark_target
    gen = ConditionalGaussianGenerator(means, 1.0, ShiftKnobs(0.5, 0.5), seed=1)
    D_a, _ = step1_generate(target, gen, PipelineConfig(per_class_n=30))
    D_aux, _ = augment(target, D_a, PipelineConfig(shell_samples=5, anchors_per_class=10))
    _, r3 = inter_class_filter(target, D_aux, 3.0)
    _, r2 = inter_class_filter(target, D_aux, 2.0)
    assert set(r3.removed) <= set(r2.removed)
    assert len(r2.removed) > len(r3.removed)
    assert set(r3.removed) <= set(range(len(D_aux)))
