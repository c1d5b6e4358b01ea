import numpy as np
import pytest
from oracles import constant_target, linear_target
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.dummy import DummyRegressor

from synthsteal import attacks
from synthsteal.data import Dataset, ProblemSpec, make_problem
from synthsteal.exceptions import CapabilityError, InputError
from synthsteal.mlp import MLPClassifier, MLPRegressor
from synthsteal.target import FunctionTarget, LocalTarget

FINE = attacks.ProbeConfig(delta0=0.02, step=0.02, n_probes=200, max_rounds=40, seed=0)


class Frozen(ClassifierMixin, BaseEstimator):
    """Classifier whose ``fit`` ignores data and predicts with a fixed function."""

    def __init__(self, fn=None):
        self.fn = fn

    def fit(self, X, y):
        return self

    def predict(self, X):
        return self.fn(X)


def argmax_target(C):
    return FunctionTarget(lambda X: np.eye(C)[np.argmax(X, axis=1)], C, C)


def test_extract_identity_copy():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(300, 5))
    target = argmax_target(5)
    aux = Dataset(X, np.argmax(X, axis=1), 5)
    ev = aux.subset(np.arange(200))
    res = attacks.extract(target, aux, Frozen(lambda Z: np.argmax(Z, axis=1)), ev)
    assert res.report.agreement == 1.0
    assert res.report.stolen_accuracy == res.report.target_accuracy


def test_extract_untrained_model_agrees_at_chance():
    rng = np.random.default_rng(1)
    target = argmax_target(10)
    X = rng.normal(size=(1000, 10))
    ev = Dataset(X, np.argmax(X, axis=1), 10)
    aux = Dataset(rng.normal(size=(50, 10)), np.arange(50) % 10, 10)
    res = attacks.extract(target, aux, MLPClassifier(n_classes=10, epochs=0, random_state=3), ev)
    assert abs(res.report.agreement - 0.1) <= 3 * np.sqrt(0.09 / 1000)


def test_extract_empty_aux():
    with pytest.raises(InputError):
        attacks.extract(constant_target(2, 2), Dataset.empty(2, 2), Frozen(), Dataset.empty(2, 2))


def test_mi_feature_dim():
    f = attacks.mi_features(np.array([[0.1, 0.6, 0.2, 0.1]]), [2], 4)
    assert f.shape == (1, 8)
    assert list(f[0]) == [0.6, 0.2, 0.1, 0.1, 0, 0, 1, 0]


class Lookup:
    """Shadow whose confidence depends only on the first feature (1 = member)."""

    def predict_proba(self, X):
        member = X[:, 0] > 0.5
        return np.where(member[:, None], np.array([1.0, 0.0, 0.0]), np.full(3, 1 / 3))


def test_attack_model_learns_separable_shadow():
    rng = np.random.default_rng(0)
    inside = Dataset(np.column_stack([np.ones(60), rng.normal(size=60)]), rng.integers(0, 3, 60), 3)
    outside = Dataset(np.column_stack([np.zeros(60), rng.normal(size=60)]), rng.integers(0, 3, 60), 3)
    A = attacks.mi_train_attack(Lookup(), inside, outside)
    feats = np.vstack([attacks.mi_features(Lookup().predict_proba(d.X), d.y, 3) for d in (inside, outside)])
    truth = np.repeat([1, 0], 60)
    assert np.mean(A.predict(feats) == truth) >= 0.99


def test_mi_same_points_both_roles_is_coin_flip():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(40, 3))
    ds = Dataset(X, np.argmax(X, axis=1), 3)
    A = attacks.mi_train_attack(Lookup(), ds.subset(np.arange(20)), ds.subset(np.arange(20, 40)))
    rep = attacks.mi_evaluate(A, argmax_target(3), ds, ds)
    assert rep.accuracy == 0.5
    assert rep.auc == 0.5


def test_membership_report_perfect_separation():
    rep = attacks.membership_report([0.9, 0.8], [0.1, 0.2])
    assert rep.f1 == 1.0 and rep.accuracy == 1.0 and rep.auc == 1.0


def test_mi_needs_nonempty_splits():
    with pytest.raises(InputError):
        attacks.mi_train_attack(Lookup(), Dataset.empty(3, 3), Dataset(np.zeros((1, 3)), [0], 3))


def test_flip_radius_on_boundary_is_at_most_delta0():
    t = linear_target([1.0, 0.0], 0.0, mode="label")
    assert attacks.flip_radius(t, [0.0, 0.3], FINE) <= FINE.delta0


def test_flip_radius_constant_classifier_hits_bound():
    cfg = attacks.ProbeConfig(delta0=0.1, step=0.1, n_probes=5, max_rounds=7)
    assert attacks.flip_radius(constant_target(2, 3), np.zeros(3), cfg) == pytest.approx(0.8)


def test_flip_radius_matches_hyperplane_distance():
    rng = np.random.default_rng(0)
    w = rng.normal(size=3)
    w /= np.linalg.norm(w)
    t = linear_target(w, 0.2)
    x = rng.normal(size=3)
    x = x - (x @ w + 0.2 - 0.3) * w  # signed distance 0.3
    assert 0.28 <= attacks.flip_radius(t, x, FINE) <= 0.34


def test_flip_radius_monotone_under_nested_regions():
    x = np.array([0.5, 0.0])
    narrow = linear_target([1.0, 0.0], 0.0)
    wide = linear_target([1.0, 0.0], 0.3)  # class-1 region x0 > -0.3 contains x0 > 0
    assert attacks.flip_radius(wide, x, FINE) >= attacks.flip_radius(narrow, x, FINE)


def test_label_only_thresholds():
    t = constant_target(2, 2, mode="label")
    cfg = attacks.ProbeConfig(n_probes=3, max_rounds=3)
    assert attacks.mi_label_only(linear_target([1.0, 0.0], 0.0), [0.05, 0.0], 0.0, cfg)
    assert not attacks.mi_label_only(t, [0.0, 0.0], cfg.bound + 1, cfg)


def test_flip_radius_estimator_api():
    t = linear_target([1.0, 0.0], 0.0, mode="label")
    est = attacks.FlipRadiusMembership(t, attacks.ProbeConfig(n_probes=20, max_rounds=30))
    assert set(est.get_params()) == {"target", "probe", "threshold", "quantile"}
    ref = np.column_stack([np.linspace(0.05, 0.5, 11), np.zeros(11)])
    est.fit(ref)
    pred = est.predict(np.array([[0.01, 0.0], [0.55, 0.0]]))
    assert list(pred) == [0, 1]


@pytest.fixture(scope="module")
def square_problem():
    spec = ProblemSpec(n_classes=4, dim=4, train_size=400, member_eval_size=10, nonmember_eval_size=400, seed=0)
    train, _, nonmembers = make_problem(spec)
    model = MLPClassifier(n_classes=4, hidden_layer_sizes=(), epochs=100).fit(train.X, train.y)
    return LocalTarget(model), train, nonmembers, spec


def test_inversion_beats_class_mean_variance(square_problem):
    target, train, nonmembers, spec = square_problem
    I = attacks.inversion_train(target, train, MLPRegressor(hidden_layer_sizes=(32,), epochs=200))
    rep = attacks.inversion_evaluate(I, target, nonmembers)
    assert rep.mse < np.var(spec.means, axis=0).mean()


def test_inversion_mean_predictor_gives_per_dim_variance(square_problem):
    target, _, nonmembers, _ = square_problem
    I = DummyRegressor(strategy="constant", constant=nonmembers.X.mean(axis=0)).fit(np.zeros((1, 4)), np.zeros((1, 4)))
    rep = attacks.inversion_evaluate(I, target, nonmembers)
    assert np.isclose(rep.mse, nonmembers.X.var(axis=0).mean())


def test_inversion_mse_invariant_under_permutation(square_problem):
    target, train, nonmembers, _ = square_problem
    I = attacks.inversion_train(target, train, MLPRegressor(hidden_layer_sizes=(8,), epochs=20))
    perm = np.random.default_rng(0).permutation(len(nonmembers))
    a = attacks.inversion_evaluate(I, target, nonmembers).mse
    b = attacks.inversion_evaluate(I, target, nonmembers.subset(perm)).mse
    assert np.isclose(a, b)


def test_inversion_memorizes_single_pair(square_problem):
    target, train, _, _ = square_problem
    one = train.subset([0])
    I = attacks.inversion_train(target, one, MLPRegressor(hidden_layer_sizes=(16,), epochs=2000, learning_rate=0.01))
    assert attacks.inversion_evaluate(I, target, one).mse < 1e-3
    assert I.spec_.layer_widths[0] == 4 and I.spec_.layer_widths[-1] == 4


def test_perfect_inverse_recovers_originals():
    # target softmax(x) on 3 dims; the inverse of softmax up to a constant is log
    t = FunctionTarget(lambda X: np.exp(X) / np.exp(X).sum(axis=1, keepdims=True), 3, 3)

    class LogInverse:
        def predict(self, P):
            L = np.log(P)
            return L - L.mean(axis=1, keepdims=True)

    X = np.random.default_rng(0).normal(size=(50, 3))
    X -= X.mean(axis=1, keepdims=True)
    rep = attacks.inversion_evaluate(LogInverse(), t, Dataset(X, np.argmax(X, axis=1), 3))
    assert rep.mse < 1e-20 and rep.accuracy == 1.0


def test_inversion_refuses_label_only():
    with pytest.raises(CapabilityError):
        attacks.inversion_train(constant_target(2, 2, mode="label"), Dataset(np.zeros((1, 2)), [0], 2),
                                MLPRegressor())


def test_mirror_architecture():
    m = attacks.mirror_inversion_model((8, 64, 16, 4))
    assert m.hidden_layer_sizes == (16, 64)


def test_label_only_invert():
    aux = Dataset(np.array([[0.0, 1.0], [2.0, 3.0], [4.0, 5.0]]), np.array([0, 1, 1]), 2)
    assert np.array_equal(attacks.label_only_invert(aux, 0, seed=3), [0.0, 1.0])
    assert np.array_equal(attacks.label_only_invert(aux, 1, seed=5), attacks.label_only_invert(aux, 1, seed=5))
    with pytest.raises(InputError):
        attacks.label_only_invert(Dataset(aux.X, np.array([0, 0, 0]), 2), 1)
