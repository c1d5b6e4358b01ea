import numpy as np
import pytest
from oracles import constant_target

from synthsteal.data import UNLABELED, circle_means
from synthsteal.exceptions import InputError
from synthsteal.generator import (
    ConditionalGaussianGenerator,
    RandomNoiseGenerator,
    ShiftKnobs,
    random_noise_baseline,
)

PROTOS = circle_means(4, 8, 3.0)


def test_zero_shift_matches_true_class():
    gen = ConditionalGaussianGenerator(PROTOS, 1.0, ShiftKnobs(1.0, 0.0), seed=0)
    X = gen.generate(2, 20_000).X
    assert np.allclose(X.mean(axis=0), PROTOS[2], atol=0.05)
    assert np.allclose(X.std(axis=0), 1.0, rtol=0.03)


def test_shifted_std_within_three_percent():
    gen = ConditionalGaussianGenerator(PROTOS, 1.0, ShiftKnobs(0.5, 0.5, offset_seed=1), seed=0)
    X = gen.generate(0, 10_000).X
    assert np.all(np.abs(X.std(axis=0) - 0.5) <= 0.03 * 0.5)


def test_offsets_are_unit_and_fixed():
    gen = ConditionalGaussianGenerator(PROTOS, 2.0, ShiftKnobs(0.5, 0.5, offset_seed=4), seed=0)
    assert np.allclose(np.linalg.norm(gen.offsets, axis=1), 1.0)
    assert np.allclose(gen.means - PROTOS, 0.5 * 2.0 * gen.offsets)
    a = gen.generate(1, 5000).X.mean(axis=0)
    b = gen.generate(1, 5000).X.mean(axis=0)
    assert np.allclose(a, b, atol=0.05)


def test_labels_faithful_and_empty_request():
    gen = ConditionalGaussianGenerator(PROTOS, seed=0)
    assert set(gen.generate(3, 7).y) == {3}
    assert len(gen.generate(0, 0)) == 0


def test_unknown_class_rejected():
    gen = ConditionalGaussianGenerator(PROTOS, seed=0)
    with pytest.raises(InputError):
        gen.generate(4, 1)


def test_seeded_determinism():
    a = ConditionalGaussianGenerator(PROTOS, seed=11).generate(0, 4).X
    b = ConditionalGaussianGenerator(PROTOS, seed=11).generate(0, 4).X
    assert np.array_equal(a, b)


def test_variance_ratio_must_be_positive():
    with pytest.raises(InputError):
        ShiftKnobs(variance_ratio=0.0)


def test_noise_baseline_mean_and_box():
    gen = RandomNoiseGenerator(8, 4, -1.0, 1.0, seed=0)
    ds = random_noise_baseline(gen, 10_000)
    assert np.all(np.abs(ds.X.mean(axis=0)) <= 0.05)
    assert ds.X.min() >= -1 and ds.X.max() <= 1
    assert np.all(ds.y == UNLABELED)


def test_noise_baseline_empty_and_reproducible():
    assert len(random_noise_baseline(RandomNoiseGenerator(3, 2, seed=0), 0)) == 0
    a = random_noise_baseline(RandomNoiseGenerator(3, 2, seed=5), 6).X
    b = random_noise_baseline(RandomNoiseGenerator(3, 2, seed=5), 6).X
    assert np.array_equal(a, b)


def test_noise_baseline_labels_from_target():
    target = constant_target(3, 2, c=2)
    ds = random_noise_baseline(RandomNoiseGenerator(2, 3, seed=0), 9, target)
    assert np.all(ds.y == 2)
    assert target.query_count == 9
