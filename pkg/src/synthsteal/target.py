"""Black-box access to a victim classifier.

A :class:`Target` answers batched queries with confidence vectors or hard
labels and counts every row it is asked about. Attacks only ever see a
``Target``; whether it is an in-process model, a noisy defended wrapper or a
model served over HTTP is invisible to them.
"""

from __future__ import annotations

import abc
import json
import threading
import time
import urllib.error
import urllib.request
from dataclasses import dataclass

import numpy as np

from .exceptions import CapabilityError, InputError, ShapeError, TransportError
from .mlp import MLPClassifier
from .numcore import load_checkpoint

CONFIDENCE = "confidence"
LABEL = "label"
MODES = (CONFIDENCE, LABEL)


class Target(abc.ABC):
    """Query interface shared by every target kind.

    Subclasses implement :meth:`_confidence`; label queries default to the
    argmax of that vector with ties going to the lowest class id.
    """

    def __init__(self, n_classes: int, n_features: int, mode: str = CONFIDENCE):
        if mode not in MODES:
            raise InputError(f"mode must be one of {MODES}, got {mode!r}")
        self.n_classes = int(n_classes)
        self.n_features = int(n_features)
        self._mode = mode
        self._count = 0
        self._count_lock = threading.Lock()

    @property
    def mode(self) -> str:
        return self._mode

    @property
    def query_count(self) -> int:
        return self._count

    def _check(self, X):
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[None, :]
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ShapeError(f"target expects {self.n_features} features, got shape {X.shape}")
        with self._count_lock:
            self._count += X.shape[0]
        return X

    def query_confidence(self, X) -> np.ndarray:
        if self._mode != CONFIDENCE:
            raise CapabilityError("label-only target does not expose confidence vectors")
        X = self._check(X)
        if X.shape[0] == 0:
            return np.empty((0, self.n_classes))
        return self._confidence(X)

    def query_label(self, X) -> np.ndarray:
        X = self._check(X)
        if X.shape[0] == 0:
            return np.empty(0, dtype=int)
        return self._labels(X)

    @abc.abstractmethod
    def _confidence(self, X: np.ndarray) -> np.ndarray:
        ...

    def _labels(self, X: np.ndarray) -> np.ndarray:
        return np.argmax(self._confidence(X), axis=1)

    def meta(self) -> dict:
        return {"classes": self.n_classes, "dim": self.n_features,
                "mode": CONFIDENCE if self._mode == CONFIDENCE else LABEL}


class LocalTarget(Target):
    """In-process target backed by a fitted classifier with ``predict_proba``."""

    def __init__(self, model, mode: str = CONFIDENCE):
        n_classes = len(model.classes_)
        super().__init__(n_classes, model.n_features_in_, mode)
        self.model = model

    @classmethod
    def from_checkpoint(cls, path, mode: str = CONFIDENCE) -> LocalTarget:
        spec, params = load_checkpoint(path)
        return cls(MLPClassifier.from_params(spec, params), mode)

    def _confidence(self, X):
        return self.model.predict_proba(X)


class FunctionTarget(Target):
    """Target defined by a plain function mapping a batch to score rows."""

    def __init__(self, fn, n_classes: int, n_features: int, mode: str = CONFIDENCE):
        super().__init__(n_classes, n_features, mode)
        self.fn = fn

    def _confidence(self, X):
        return np.asarray(self.fn(X), dtype=float).reshape(X.shape[0], self.n_classes)


@dataclass(frozen=True)
class DefenseConfig:
    noise_mean: float = 0.0
    noise_variance: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.noise_variance < 0:
            raise InputError("noise_variance must be >= 0")


class DefendedTarget(Target):
    """Adds i.i.d. Gaussian noise to every confidence score of ``inner``.

    Scores are not renormalized. Label queries return the argmax of the
    perturbed vector. Noise draws are serialized through one RNG, so results
    are deterministic for a given query sequence.
    """

    def __init__(self, inner: Target, cfg: DefenseConfig, mode: str | None = None):
        if inner.mode != CONFIDENCE:
            raise CapabilityError("defense needs a target that exposes confidence vectors")
        super().__init__(inner.n_classes, inner.n_features, mode or inner.mode)
        self.inner = inner
        self.cfg = cfg
        self._rng = np.random.default_rng(cfg.seed)
        self._rng_lock = threading.Lock()

    def _confidence(self, X):
        scores = self.inner.query_confidence(X)
        if self.cfg.noise_variance == 0 and self.cfg.noise_mean == 0:
            return scores
        with self._rng_lock:
            noise = self._rng.normal(self.cfg.noise_mean, np.sqrt(self.cfg.noise_variance),
                                     size=scores.shape)
        return scores + noise


def wrap_with_defense(target: Target, cfg: DefenseConfig, mode: str | None = None) -> DefendedTarget:
    return DefendedTarget(target, cfg, mode)


def _post_json(url, payload, timeout):
    data = json.dumps(payload).encode("utf-8")
    req = urllib.request.Request(url, data=data, headers={"Content-Type": "application/json"})
    with urllib.request.urlopen(req, timeout=timeout) as resp:
        return json.loads(resp.read().decode("utf-8"))


def _get_json(url, timeout):
    with urllib.request.urlopen(url, timeout=timeout) as resp:
        return json.loads(resp.read().decode("utf-8"))


class HttpClient:
    """Minimal JSON-over-HTTP client with retry on connection failures."""

    def __init__(self, base_url: str, timeout: float = 30.0, retries: int = 2, backoff: float = 0.2):
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout
        self.retries = retries
        self.backoff = backoff

    def call(self, path, payload=None):
        url = self.base_url + path
        for attempt in range(self.retries + 1):
            try:
                if payload is None:
                    return _get_json(url, self.timeout)
                return _post_json(url, payload, self.timeout)
            except urllib.error.HTTPError as exc:
                body = exc.read().decode("utf-8", "replace")
                if exc.code == 403:
                    raise CapabilityError(body) from exc
                # 4xx is the caller's fault; retrying will not help
                if exc.code < 500 or attempt == self.retries:
                    raise TransportError(f"{url}: HTTP {exc.code}: {body}", attempt, exc.code) from exc
            except (urllib.error.URLError, OSError, json.JSONDecodeError) as exc:
                if attempt == self.retries:
                    raise TransportError(f"{url}: {exc}", attempt) from exc
            time.sleep(self.backoff * (attempt + 1))
        raise AssertionError("unreachable")


class RemoteTarget(Target):
    """Target reached through the JSON wire protocol served by ``synthsteal serve``."""

    def __init__(self, base_url: str, timeout: float = 30.0, retries: int = 2):
        self.client = HttpClient(base_url, timeout, retries)
        meta = self.client.call("/v1/meta")
        mode = CONFIDENCE if meta["mode"] == CONFIDENCE else LABEL
        super().__init__(meta["classes"], meta["dim"], mode)

    def _confidence(self, X):
        doc = self.client.call("/v1/query", {"inputs": X.tolist(), "kind": CONFIDENCE})
        return np.asarray(doc["outputs"], dtype=float).reshape(X.shape[0], self.n_classes)

    def _labels(self, X):
        doc = self.client.call("/v1/query", {"inputs": X.tolist(), "kind": LABEL})
        return np.asarray(doc["labels"], dtype=int)

    def remote_stats(self) -> dict:
        return self.client.call("/v1/stats")
