"""Model extraction, membership inference and model inversion.

Each attack consumes the filtered auxiliary dataset and a :class:`Target`.
Attack models follow the scikit-learn estimator API so they can be swapped for
any classifier/regressor with ``fit``/``predict_proba``/``predict``.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, clone
from sklearn.utils.validation import check_is_fitted

from . import metrics
from .data import Dataset, split
from .exceptions import CapabilityError, InputError
from .mlp import MLPClassifier, MLPRegressor
from .pipeline import sample_shell
from .target import CONFIDENCE, Target

# ---------------------------------------------------------------- extraction


@dataclass
class ExtractionReport:
    target_accuracy: float
    stolen_accuracy: float
    agreement: float
    query_count: int
    train_size: int
    test_size: int
    stolen_test_agreement: float | None = None

    def to_dict(self):
        return asdict(self)


@dataclass
class ExtractionResult:
    stolen: MLPClassifier
    report: ExtractionReport
    aux_train: Dataset
    aux_test: Dataset


def extract(
    target: Target,
    aux: Dataset,
    stolen,
    eval_set: Dataset,
    split_ratio: float = 0.8,
    seed: int = 0,
) -> ExtractionResult:
    """Train ``stolen`` (an unfitted classifier) on a split of ``aux``.

    The report compares target and stolen model on ``eval_set``, which the
    experiment harness draws from the true data distribution. The stolen
    model's agreement with the auxiliary labels on the held-out split is
    recorded as ``stolen_test_agreement``; this is all a real adversary can
    measure.
    """
    if len(aux) == 0:
        raise InputError("cannot extract from an empty auxiliary dataset")
    aux_train, aux_test = split(aux, split_ratio, seed)
    stolen = clone(stolen).fit(aux_train.X, aux_train.y)
    target_pred = target.query_label(eval_set.X)
    stolen_pred = stolen.predict(eval_set.X)
    report = ExtractionReport(
        target_accuracy=metrics.accuracy(target_pred, eval_set.y),
        stolen_accuracy=metrics.accuracy(stolen_pred, eval_set.y),
        agreement=metrics.agreement(target_pred, stolen_pred),
        query_count=target.query_count,
        train_size=len(aux_train),
        test_size=len(aux_test),
        stolen_test_agreement=(
            metrics.agreement(stolen.predict(aux_test.X), aux_test.y) if len(aux_test) else None
        ),
    )
    return ExtractionResult(stolen, report, aux_train, aux_test)


# ---------------------------------------------------------------- membership inference


def mi_features(confidences, labels, n_classes: int, sort: bool = True) -> np.ndarray:
    """Attack-model input: confidence vector (sorted descending) then one-hot label."""
    conf = np.asarray(confidences, dtype=float)
    if sort:
        conf = -np.sort(-conf, axis=1)
    onehot = np.eye(n_classes)[np.asarray(labels, dtype=int)]
    return np.hstack([conf, onehot])


def default_attack_model(random_state=0) -> MLPClassifier:
    return MLPClassifier(
        n_classes=2, hidden_layer_sizes=(32,), loss="binary_cross_entropy",
        learning_rate=0.005, epochs=300, batch_size=32, random_state=random_state,
    )


def mi_train_attack(shadow, aux_train: Dataset, aux_test: Dataset, attack_model=None,
                    sort: bool = True):
    """Fit a member/non-member classifier on the shadow model's outputs.

    ``aux_train`` rows are members of the shadow's training set and
    ``aux_test`` rows are not. The attack sees ``mi_features`` of the shadow's
    confidence vector and the true label.
    """
    if len(aux_train) == 0 or len(aux_test) == 0:
        raise InputError("both shadow splits must be nonempty")
    C = aux_train.n_classes
    feats = np.vstack([
        mi_features(shadow.predict_proba(aux_train.X), aux_train.y, C, sort),
        mi_features(shadow.predict_proba(aux_test.X), aux_test.y, C, sort),
    ])
    member = np.concatenate([np.ones(len(aux_train), dtype=int), np.zeros(len(aux_test), dtype=int)])
    model = default_attack_model() if attack_model is None else clone(attack_model)
    return model.fit(feats, member)


@dataclass
class MIReport:
    accuracy: float
    f1: float
    auc: float
    tpr_at_fpr: dict[str, float] = field(default_factory=dict)
    threshold: float = 0.5

    def to_dict(self):
        return asdict(self)


def membership_report(member_scores, nonmember_scores, threshold=0.5,
                      fpr_levels=(0.01, 0.1)) -> MIReport:
    pos = np.asarray(member_scores, dtype=float)
    neg = np.asarray(nonmember_scores, dtype=float)
    truth = np.concatenate([np.ones(len(pos), dtype=int), np.zeros(len(neg), dtype=int)])
    pred = (np.concatenate([pos, neg]) >= threshold).astype(int)
    return MIReport(
        accuracy=metrics.accuracy(pred, truth),
        f1=metrics.f1(pred, truth, positive_class=1),
        auc=metrics.roc_auc(pos, neg),
        tpr_at_fpr={str(lvl): metrics.tpr_at_fpr(pos, neg, lvl) for lvl in fpr_levels},
        threshold=float(threshold),
    )


def mi_evaluate(attack_model, target: Target, members: Dataset, nonmembers: Dataset,
                sort: bool = True) -> MIReport:
    """Apply the attack model to the target's confidence vectors."""
    if len(members) == 0 or len(nonmembers) == 0:
        raise InputError("member and non-member evaluation sets must be nonempty")
    C = target.n_classes
    scores = []
    for ds in (members, nonmembers):
        feats = mi_features(target.query_confidence(ds.X), ds.y, C, sort)
        scores.append(attack_model.predict_proba(feats)[:, 1])
    return membership_report(scores[0], scores[1])


@dataclass(frozen=True)
class ProbeConfig:
    """Shell-probing schedule used to measure flip radii."""

    delta0: float = 0.02
    step: float = 0.02
    n_probes: int = 200
    max_rounds: int = 100
    norm_order: float = 2
    seed: int = 0

    def __post_init__(self):
        if not self.delta0 > 0 or not self.step > 0:
            raise InputError("delta0 and step must be > 0")
        if self.n_probes < 1 or self.max_rounds < 1:
            raise InputError("n_probes and max_rounds must be >= 1")

    @property
    def bound(self) -> float:
        return self.delta0 + self.max_rounds * self.step


def flip_radii(target: Target, X, cfg: ProbeConfig = ProbeConfig(), rng=None) -> np.ndarray:
    """Smallest probing radius at which any probe changes the target's label.

    Round ``i`` probes the shell ``(r_{i-1}, r_i]`` with ``r_i = delta0 + i * step``
    and ``r_{-1} = 0``. Points that never flip get ``cfg.bound``. All active
    points are probed in one batched query per round.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    n = X.shape[0]
    radii = np.full(n, cfg.bound)
    if n == 0:
        return radii
    base = target.query_label(X)
    active = np.arange(n)
    for i in range(cfg.max_rounds):
        if active.size == 0:
            break
        lo = 0.0 if i == 0 else cfg.delta0 + (i - 1) * cfg.step
        hi = cfg.delta0 + i * cfg.step
        probes = np.vstack([sample_shell(X[j], lo, hi, cfg.n_probes, cfg.norm_order, rng)
                            for j in active])
        labels = target.query_label(probes).reshape(active.size, cfg.n_probes)
        flipped = np.any(labels != base[active, None], axis=1)
        radii[active[flipped]] = hi
        active = active[~flipped]
    return radii


def flip_radius(target: Target, x, cfg: ProbeConfig = ProbeConfig()) -> float:
    return float(flip_radii(target, np.asarray(x, dtype=float)[None, :], cfg)[0])


def mi_label_only(target: Target, x, tau: float, cfg: ProbeConfig = ProbeConfig()) -> bool:
    """Member iff the flip radius of ``x`` is at least ``tau``."""
    return flip_radius(target, x, cfg) >= tau


class FlipRadiusMembership(ClassifierMixin, BaseEstimator):
    """Label-only membership classifier thresholding the flip radius.

    ``fit`` takes reference points assumed to be non-members (the attacker's
    own generated data) and sets ``threshold_`` to the ``quantile`` of their
    flip radii unless ``threshold`` is given explicitly.
    """

    def __init__(self, target=None, probe=ProbeConfig(), threshold=None, quantile=0.5):
        self.target = target
        self.probe = probe
        self.threshold = threshold
        self.quantile = quantile

    def fit(self, X, y=None):
        if self.threshold is not None:
            self.threshold_ = float(self.threshold)
        else:
            self.threshold_ = float(np.quantile(flip_radii(self.target, X, self.probe), self.quantile))
        self.classes_ = np.array([0, 1])
        return self

    def decision_function(self, X):
        return flip_radii(self.target, X, self.probe)

    def predict(self, X):
        check_is_fitted(self, "threshold_")
        return (self.decision_function(X) >= self.threshold_).astype(int)


def mi_label_only_evaluate(target: Target, members: Dataset, nonmembers: Dataset, reference,
                           cfg: ProbeConfig = ProbeConfig(), tau: float | None = None) -> MIReport:
    """Label-only membership inference scored by flip radius.

    ``reference`` points (fresh generated data) set the default threshold.
    """
    if len(members) == 0 or len(nonmembers) == 0:
        raise InputError("member and non-member evaluation sets must be nonempty")
    rng = np.random.default_rng(cfg.seed)
    if tau is None:
        tau = float(np.median(flip_radii(target, reference, cfg, rng)))
    pos = flip_radii(target, members.X, cfg, rng)
    neg = flip_radii(target, nonmembers.X, cfg, rng)
    return membership_report(pos, neg, threshold=tau)


# ---------------------------------------------------------------- inversion


def mirror_inversion_model(target_widths, random_state=0, **kwargs) -> MLPRegressor:
    """Decoder whose hidden widths mirror the target's, reversed."""
    hidden = tuple(reversed(tuple(target_widths)[1:-1])) or (64,)
    params = dict(learning_rate=0.005, epochs=300, batch_size=32)
    params.update(kwargs)
    return MLPRegressor(hidden_layer_sizes=hidden, random_state=random_state, **params)


def inversion_train(target: Target, aux: Dataset, inversion_model):
    """Fit ``inversion_model`` on ``(target confidence, input)`` pairs."""
    if target.mode != CONFIDENCE:
        raise CapabilityError("inversion needs confidence vectors")
    if len(aux) == 0:
        raise InputError("cannot train an inversion model on an empty dataset")
    conf = target.query_confidence(aux.X)
    return clone(inversion_model).fit(conf, aux.X)


@dataclass
class InversionReport:
    mse: float
    accuracy: float

    def to_dict(self):
        return asdict(self)


def inversion_evaluate(inversion_model, target: Target, originals: Dataset,
                       return_reconstructions: bool = False):
    """Reconstruct every original from its confidence vector.

    ``accuracy`` is the fraction of reconstructions the target assigns to the
    original's class.
    """
    if len(originals) == 0:
        raise InputError("need at least one original sample")
    recon = np.asarray(inversion_model.predict(target.query_confidence(originals.X)), dtype=float)
    recon = recon.reshape(originals.X.shape)
    report = InversionReport(
        mse=metrics.mse(originals.X, recon),
        accuracy=metrics.accuracy(target.query_label(recon), originals.y),
    )
    if return_reconstructions:
        return report, recon
    return report


def label_only_invert(aux: Dataset, c: int, seed: int = 0) -> np.ndarray:
    """A uniformly random auxiliary sample of class ``c`` as its representative."""
    idx = np.flatnonzero(aux.y == c)
    if idx.size == 0:
        raise InputError(f"class {c} has no auxiliary samples")
    return aux.X[np.random.default_rng(seed).choice(idx)].copy()
