"""Dense multilayer perceptron: forward pass, backprop, optimizers, training.

Every model in the package (target, stolen copy, membership attack model,
inversion decoder) is a small MLP built on these functions. Weights are stored
as ``(fan_in, fan_out)`` matrices so a layer computes ``h @ W + b``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .exceptions import InputError, NumericError, ParseError, ShapeError

ACTIVATIONS = ("relu", "tanh")
HEADS = ("softmax", "linear")
LOSSES = ("cross_entropy", "mse", "binary_cross_entropy")
OPTIMIZERS = ("sgd", "adam")

CHECKPOINT_FORMAT = "synthsteal-mlp"
CHECKPOINT_VERSION = 1

_PROB_FLOOR = 1e-12


@dataclass(frozen=True)
class MlpSpec:
    """Architecture: ``layer_widths[0]`` is the input dim, ``[-1]`` the output dim."""

    layer_widths: tuple[int, ...]
    hidden_activation: str = "relu"
    output_head: str = "softmax"

    def __post_init__(self):
        widths = tuple(int(w) for w in self.layer_widths)
        object.__setattr__(self, "layer_widths", widths)
        if len(widths) < 2:
            raise InputError("an MLP needs at least an input and an output layer")
        if min(widths) < 1:
            raise InputError(f"layer widths must be >= 1, got {widths}")
        if self.hidden_activation not in ACTIVATIONS:
            raise InputError(f"unknown activation {self.hidden_activation!r}")
        if self.output_head not in HEADS:
            raise InputError(f"unknown output head {self.output_head!r}")

    @property
    def n_inputs(self) -> int:
        return self.layer_widths[0]

    @property
    def n_outputs(self) -> int:
        return self.layer_widths[-1]

    def to_dict(self) -> dict:
        return {
            "layer_widths": list(self.layer_widths),
            "hidden_activation": self.hidden_activation,
            "output_head": self.output_head,
        }

    @classmethod
    def from_dict(cls, d: dict) -> MlpSpec:
        return cls(tuple(d["layer_widths"]), d["hidden_activation"], d["output_head"])


@dataclass
class MlpParams:
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def copy(self) -> MlpParams:
        return MlpParams([w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def flat(self) -> np.ndarray:
        parts = []
        for w, b in zip(self.weights, self.biases):
            parts.append(w.ravel())
            parts.append(b.ravel())
        return np.concatenate(parts)

    def check(self, spec: MlpSpec) -> None:
        widths = spec.layer_widths
        if len(self.weights) != len(widths) - 1 or len(self.biases) != len(widths) - 1:
            raise ShapeError("parameter count does not match the layer spec")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape != (widths[i], widths[i + 1]) or b.shape != (widths[i + 1],):
                raise ShapeError(
                    f"layer {i}: expected W{(widths[i], widths[i + 1])} b({widths[i + 1]},), "
                    f"got W{w.shape} b{b.shape}"
                )
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise NumericError(f"layer {i} has non-finite parameters")


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.01
    epochs: int = 100
    batch_size: int = 32
    optimizer: str = "adam"
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.0
    seed: int = 0
    loss: str = "cross_entropy"

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise InputError("learning_rate must be > 0")
        if self.batch_size < 1:
            raise InputError("batch_size must be >= 1")
        if self.epochs < 0:
            raise InputError("epochs must be >= 0")
        if self.weight_decay < 0:
            raise InputError("weight_decay must be >= 0")
        if self.optimizer not in OPTIMIZERS:
            raise InputError(f"unknown optimizer {self.optimizer!r}")
        if self.loss not in LOSSES:
            raise InputError(f"unknown loss {self.loss!r}")


def init_params(spec: MlpSpec, rng: np.random.Generator) -> MlpParams:
    """Glorot-uniform weights, zero biases."""
    weights, biases = [], []
    for fan_in, fan_out in zip(spec.layer_widths[:-1], spec.layer_widths[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return MlpParams(weights, biases)


def softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def sigmoid(z: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def _activate(z, name):
    if name == "relu":
        return np.maximum(z, 0.0)
    return np.tanh(z)


def _activate_grad(z, a, name):
    if name == "relu":
        return (z > 0).astype(z.dtype)
    return 1.0 - a * a


def _as_batch(batch, spec: MlpSpec) -> np.ndarray:
    X = np.asarray(batch, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != spec.n_inputs:
        raise ShapeError(f"expected batch with {spec.n_inputs} columns, got shape {X.shape}")
    return X


def _forward_trace(params, spec, X):
    pre, post = [], [X]
    h = X
    last = len(params.weights) - 1
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        with np.errstate(over="ignore", invalid="ignore"):  # callers check finiteness
            z = h @ w + b
        pre.append(z)
        h = _activate(z, spec.hidden_activation) if i < last else z
        post.append(h)
    logits = pre[-1]
    out = softmax(logits) if spec.output_head == "softmax" else logits
    return pre, post, out


def forward(params: MlpParams, spec: MlpSpec, batch) -> np.ndarray:
    """Network outputs for a batch of rows.

    With a softmax head every output row is a probability vector.
    """
    X = _as_batch(batch, spec)
    return _forward_trace(params, spec, X)[2]


def _loss_and_output_grad(out, logits, y, spec, loss):
    """Mean batch loss and its gradient w.r.t. the final pre-activation."""
    n = out.shape[0]
    if loss == "cross_entropy":
        y = np.asarray(y)
        if y.ndim != 1 or y.shape[0] != n:
            raise ShapeError("cross_entropy expects one class id per row")
        y = y.astype(int)
        if y.min() < 0 or y.max() >= spec.n_outputs:
            raise InputError("class id out of range for the output layer")
        p = out if spec.output_head == "softmax" else softmax(logits)
        value = -np.mean(np.log(np.maximum(p[np.arange(n), y], _PROB_FLOOR)))
        g = p.copy()
        g[np.arange(n), y] -= 1.0
        return value, g / n
    if loss == "mse":
        Y = np.asarray(y, dtype=float)
        if Y.ndim == 1:
            Y = Y[:, None]
        if Y.shape != out.shape:
            raise ShapeError(f"mse targets shape {Y.shape} != output shape {out.shape}")
        diff = out - Y
        value = np.mean(np.sum(diff * diff, axis=1))
        g = 2.0 * diff / n
        if spec.output_head == "softmax":
            g = out * (g - np.sum(g * out, axis=1, keepdims=True))
        return value, g
    # binary_cross_entropy on a single logit
    if spec.n_outputs != 1 or spec.output_head != "linear":
        raise InputError("binary_cross_entropy needs a single linear output unit")
    t = np.asarray(y, dtype=float).reshape(-1, 1)
    if t.shape[0] != n:
        raise ShapeError("binary_cross_entropy expects one target per row")
    z = logits
    # log(1 + e^z) - t z, computed stably
    value = np.mean(np.logaddexp(0.0, z) - t * z)
    return value, (sigmoid(z) - t) / n


def loss_value(params: MlpParams, spec: MlpSpec, batch, labels, loss: str) -> float:
    X = _as_batch(batch, spec)
    pre, _, out = _forward_trace(params, spec, X)
    return float(_loss_and_output_grad(out, pre[-1], labels, spec, loss)[0])


def _backprop(params, spec, X, y, loss):
    pre, post, out = _forward_trace(params, spec, X)
    if not np.all(np.isfinite(out)):
        raise NumericError("non-finite values in forward pass")
    value, delta = _loss_and_output_grad(out, pre[-1], y, spec, loss)
    n_layers = len(params.weights)
    gw = [None] * n_layers
    gb = [None] * n_layers
    for i in range(n_layers - 1, -1, -1):
        gw[i] = post[i].T @ delta
        gb[i] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ params.weights[i].T) * _activate_grad(
                pre[i - 1], post[i], spec.hidden_activation
            )
    return float(value), MlpParams(gw, gb)


def gradients(params: MlpParams, spec: MlpSpec, batch, labels, loss: str) -> MlpParams:
    """Gradient of the mean batch loss with respect to every weight and bias."""
    X = _as_batch(batch, spec)
    return _backprop(params, spec, X, labels, loss)[1]


class _Adam:
    def __init__(self, params, cfg):
        self.cfg = cfg
        self.t = 0
        self.m = [np.zeros_like(a) for a in params.weights + params.biases]
        self.v = [np.zeros_like(a) for a in params.weights + params.biases]

    def step(self, arrays, grads):
        cfg = self.cfg
        self.t += 1
        c1 = 1.0 - cfg.beta1**self.t
        c2 = 1.0 - cfg.beta2**self.t
        for a, g, m, v in zip(arrays, grads, self.m, self.v):
            m *= cfg.beta1
            m += (1.0 - cfg.beta1) * g
            v *= cfg.beta2
            v += (1.0 - cfg.beta2) * g * g
            a -= cfg.learning_rate * (m / c1) / (np.sqrt(v / c2) + cfg.eps)


class _Sgd:
    def __init__(self, params, cfg):
        self.cfg = cfg

    def step(self, arrays, grads):
        for a, g in zip(arrays, grads):
            a -= self.cfg.learning_rate * g


def train(
    X,
    y,
    spec: MlpSpec,
    config: TrainConfig,
    init: MlpParams | None = None,
) -> tuple[MlpParams, list[float]]:
    """Minibatch training; returns final params and per-epoch mean loss.

    Bit-for-bit deterministic given ``config.seed``. Each epoch shuffles with
    the training RNG and keeps the last partial batch.
    """
    X = _as_batch(X, spec)
    if X.shape[0] == 0:
        raise InputError("cannot train on an empty dataset")
    y = np.asarray(y)
    if y.shape[0] != X.shape[0]:
        raise ShapeError("X and y have different numbers of rows")
    rng = np.random.default_rng(config.seed)
    params = init_params(spec, rng) if init is None else init.copy()
    params.check(spec)
    opt = (_Adam if config.optimizer == "adam" else _Sgd)(params, config)
    arrays = params.weights + params.biases
    n = X.shape[0]
    history = []
    for _ in range(config.epochs):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, config.batch_size):
            idx = order[start : start + config.batch_size]
            value, g = _backprop(params, spec, X[idx], y[idx], config.loss)
            grads = g.weights + g.biases
            if config.weight_decay:
                for k in range(len(g.weights)):
                    grads[k] = grads[k] + config.weight_decay * params.weights[k]
            opt.step(arrays, grads)
            total += value * len(idx)
        history.append(total / n)
    return params, history


def params_to_dict(spec: MlpSpec, params: MlpParams) -> dict:
    return {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "spec": spec.to_dict(),
        "weights": [w.tolist() for w in params.weights],
        "biases": [b.tolist() for b in params.biases],
    }


def params_from_dict(doc: dict) -> tuple[MlpSpec, MlpParams]:
    if doc.get("format") != CHECKPOINT_FORMAT:
        raise ParseError(f"not a {CHECKPOINT_FORMAT} checkpoint")
    if doc.get("version") != CHECKPOINT_VERSION:
        raise ParseError(f"unsupported checkpoint version {doc.get('version')!r}")
    spec = MlpSpec.from_dict(doc["spec"])
    params = MlpParams(
        [np.asarray(w, dtype=float).reshape(a, b) for w, a, b in
         zip(doc["weights"], spec.layer_widths[:-1], spec.layer_widths[1:])],
        [np.asarray(b, dtype=float).reshape(-1) for b in doc["biases"]],
    )
    params.check(spec)
    return spec, params


def save_checkpoint(path, spec: MlpSpec, params: MlpParams) -> None:
    """Write a JSON checkpoint. Floats are serialized with ``repr`` precision."""
    Path(path).write_text(json.dumps(params_to_dict(spec, params)) + "\n", encoding="utf-8")


def load_checkpoint(path) -> tuple[MlpSpec, MlpParams]:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(str(exc), line=exc.lineno) from exc
    return params_from_dict(doc)

