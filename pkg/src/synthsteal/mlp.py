"""scikit-learn compatible wrappers around :mod:`synthsteal.numcore`."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted

from . import numcore
from .exceptions import InputError
from .numcore import MlpParams, MlpSpec, TrainConfig


class _BaseMLP(BaseEstimator):
    _head = "softmax"

    def __init__(
        self,
        hidden_layer_sizes=(64,),
        activation="relu",
        learning_rate=0.01,
        epochs=200,
        batch_size=32,
        optimizer="adam",
        weight_decay=0.0,
        random_state=0,
    ):
        self.hidden_layer_sizes = hidden_layer_sizes
        self.activation = activation
        self.learning_rate = learning_rate
        self.epochs = epochs
        self.batch_size = batch_size
        self.optimizer = optimizer
        self.weight_decay = weight_decay
        self.random_state = random_state

    def _train_config(self, loss):
        return TrainConfig(
            learning_rate=self.learning_rate,
            epochs=self.epochs,
            batch_size=self.batch_size,
            optimizer=self.optimizer,
            weight_decay=self.weight_decay,
            seed=int(self.random_state),
            loss=loss,
        )

    def _fit(self, X, targets, n_out, loss, head):
        spec = MlpSpec(
            (X.shape[1], *self.hidden_layer_sizes, n_out),
            hidden_activation=self.activation,
            output_head=head,
        )
        self.spec_, self.n_features_in_ = spec, X.shape[1]
        self.params_, self.loss_curve_ = numcore.train(X, targets, spec, self._train_config(loss))
        return self

    def _raw(self, X):
        check_is_fitted(self, "params_")
        X = check_array(X, ensure_min_samples=0)
        return numcore.forward(self.params_, self.spec_, X)

    def checkpoint(self) -> dict:
        check_is_fitted(self, "params_")
        return numcore.params_to_dict(self.spec_, self.params_)


class MLPClassifier(ClassifierMixin, _BaseMLP):
    """Softmax classifier over ``n_classes`` integer labels ``0..n_classes-1``.

    ``n_classes`` is fixed up front because attack datasets routinely miss a
    class after filtering while the stolen model must still cover all of them.
    With ``loss="binary_cross_entropy"`` the network has one logit and
    ``n_classes`` must be 2.
    """

    def __init__(
        self,
        n_classes=None,
        hidden_layer_sizes=(64,),
        activation="relu",
        learning_rate=0.01,
        epochs=200,
        batch_size=32,
        optimizer="adam",
        weight_decay=0.0,
        random_state=0,
        loss="cross_entropy",
    ):
        super().__init__(
            hidden_layer_sizes=hidden_layer_sizes,
            activation=activation,
            learning_rate=learning_rate,
            epochs=epochs,
            batch_size=batch_size,
            optimizer=optimizer,
            weight_decay=weight_decay,
            random_state=random_state,
        )
        self.n_classes = n_classes
        self.loss = loss

    def fit(self, X, y):
        X = check_array(X)
        y = np.asarray(y).astype(int)
        if y.shape[0] != X.shape[0]:
            raise InputError("X and y have different numbers of rows")
        if y.min() < 0:
            raise InputError("labels must be non-negative class ids")
        n_classes = self.n_classes if self.n_classes is not None else int(y.max()) + 1
        if y.max() >= n_classes:
            raise InputError(f"label {y.max()} out of range for {n_classes} classes")
        self.classes_ = np.arange(n_classes)
        if self.loss == "binary_cross_entropy":
            if n_classes != 2:
                raise InputError("binary_cross_entropy requires exactly 2 classes")
            return self._fit(X, y.astype(float), 1, self.loss, "linear")
        return self._fit(X, y, n_classes, self.loss, "softmax")

    def predict_proba(self, X):
        out = self._raw(X)
        if self.spec_.output_head == "linear":
            p = numcore.sigmoid(out[:, 0])
            return np.column_stack([1.0 - p, p])
        return out

    def predict(self, X):
        # argmax breaks ties toward the lowest class id
        return np.argmax(self.predict_proba(X), axis=1)

    @classmethod
    def from_params(cls, spec: MlpSpec, params: MlpParams, **kwargs) -> MLPClassifier:
        """Wrap existing weights (e.g. a loaded checkpoint) as a fitted classifier."""
        params.check(spec)
        if spec.output_head == "linear" and spec.n_outputs == 1:
            kwargs.setdefault("loss", "binary_cross_entropy")
            n_classes = 2
        else:
            n_classes = spec.n_outputs
        est = cls(
            n_classes=n_classes,
            hidden_layer_sizes=tuple(spec.layer_widths[1:-1]),
            activation=spec.hidden_activation,
            **kwargs,
        )
        est.spec_, est.params_, est.loss_curve_ = spec, params.copy(), []
        est.classes_ = np.arange(n_classes)
        est.n_features_in_ = spec.n_inputs
        return est


class MLPRegressor(RegressorMixin, _BaseMLP):
    """Linear-head MLP trained with squared error; supports vector targets."""

    def fit(self, X, y):
        X = check_array(X)
        Y = np.asarray(y, dtype=float)
        self._vector_target = Y.ndim == 2
        if Y.ndim == 1:
            Y = Y[:, None]
        if Y.shape[0] != X.shape[0]:
            raise InputError("X and y have different numbers of rows")
        return self._fit(X, Y, Y.shape[1], "mse", "linear")

    def predict(self, X):
        out = self._raw(X)
        if not getattr(self, "_vector_target", True):
            return out[:, 0]
        return out

    @classmethod
    def from_params(cls, spec: MlpSpec, params: MlpParams, **kwargs) -> MLPRegressor:
        params.check(spec)
        est = cls(
            hidden_layer_sizes=tuple(spec.layer_widths[1:-1]),
            activation=spec.hidden_activation,
            **kwargs,
        )
        est.spec_, est.params_, est.loss_curve_ = spec, params.copy(), []
        est.n_features_in_ = spec.n_inputs
        est._vector_target = True
        return est
