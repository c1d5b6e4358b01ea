"""Stand-ins for the generative model that produces per-class samples.

:class:`ConditionalGaussianGenerator` mimics a generator whose output is
systematically "too clean": samples are drawn around a shifted class prototype
with shrunken spread. The shift is controlled by :class:`ShiftKnobs`.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass

import numpy as np

from .data import UNLABELED, Dataset
from .exceptions import InputError
from .target import HttpClient


@dataclass(frozen=True)
class ShiftKnobs:
    """``variance_ratio`` scales the class std; ``mean_offset_scale`` moves the mean."""

    variance_ratio: float = 0.5
    mean_offset_scale: float = 0.5
    offset_seed: int = 0

    def __post_init__(self):
        if not self.variance_ratio > 0:
            raise InputError("variance_ratio must be > 0")
        if self.mean_offset_scale < 0:
            raise InputError("mean_offset_scale must be >= 0")


class Generator:
    """Common surface: ``generate(c, n)`` returns ``n`` samples labeled ``c``.

    A generator owns one RNG; share a handle between threads only behind a lock
    (the built-in generators take one internally).
    """

    n_classes: int
    dim: int

    def generate(self, c: int, n: int) -> Dataset:
        raise NotImplementedError

    def _check_request(self, c, n):
        if not 0 <= c < self.n_classes:
            raise InputError(f"unknown class {c} (generator knows {self.n_classes})")
        if n < 0:
            raise InputError("sample count must be >= 0")


class ConditionalGaussianGenerator(Generator):
    """Draws class ``c`` from ``N(m_c + eta * s * u_c, (rho * s)^2 I)``.

    ``m_c`` are the prototypes given at construction, ``s`` the true class std
    and ``u_c`` a unit offset per class fixed by ``knobs.offset_seed``.
    """

    def __init__(self, prototypes, class_std: float = 1.0, knobs: ShiftKnobs = ShiftKnobs(),
                 seed: int = 0):
        self.prototypes = np.asarray(prototypes, dtype=float)
        if self.prototypes.ndim != 2:
            raise InputError("prototypes must be a (n_classes, dim) array")
        self.n_classes, self.dim = self.prototypes.shape
        self.class_std = float(class_std)
        self.knobs = knobs
        offsets = np.random.default_rng(knobs.offset_seed).standard_normal(self.prototypes.shape)
        self.offsets = offsets / np.linalg.norm(offsets, axis=1, keepdims=True)
        self.means = self.prototypes + knobs.mean_offset_scale * self.class_std * self.offsets
        self.std = knobs.variance_ratio * self.class_std
        self._rng = np.random.default_rng(seed)
        self._lock = threading.Lock()

    def generate(self, c: int, n: int) -> Dataset:
        self._check_request(c, n)
        with self._lock:
            noise = self._rng.standard_normal((n, self.dim))
        return Dataset(self.means[c] + self.std * noise, np.full(n, c), self.n_classes)


class RandomNoiseGenerator(Generator):
    """Uniform samples from the box ``[low, high]^dim``, ignoring the class."""

    def __init__(self, dim: int, n_classes: int, low: float = -1.0, high: float = 1.0, seed: int = 0):
        if not high > low:
            raise InputError("box must satisfy high > low")
        self.dim, self.n_classes = int(dim), int(n_classes)
        self.low, self.high = float(low), float(high)
        self._rng = np.random.default_rng(seed)
        self._lock = threading.Lock()

    def sample(self, n: int) -> np.ndarray:
        if n < 0:
            raise InputError("sample count must be >= 0")
        with self._lock:
            return self._rng.uniform(self.low, self.high, size=(n, self.dim))

    def generate(self, c: int, n: int) -> Dataset:
        self._check_request(c, n)
        return Dataset(self.sample(n), np.full(n, c), self.n_classes)


def random_noise_baseline(gen: RandomNoiseGenerator, n: int, target=None) -> Dataset:
    """Unlabeled noise batch; if ``target`` is given, label it by querying."""
    X = gen.sample(n)
    if target is None:
        return Dataset(X, np.full(n, UNLABELED), gen.n_classes)
    return Dataset(X, target.query_label(X), gen.n_classes)


class RemoteGenerator(Generator):
    """Generator behind ``POST /v1/generate {"class": c, "count": n}``."""

    def __init__(self, base_url: str, n_classes: int, dim: int, timeout: float = 30.0, retries: int = 2):
        self.client = HttpClient(base_url, timeout, retries)
        self.n_classes, self.dim = int(n_classes), int(dim)

    def generate(self, c: int, n: int) -> Dataset:
        self._check_request(c, n)
        doc = self.client.call("/v1/generate", {"class": int(c), "count": int(n)})
        X = np.asarray(doc["samples"], dtype=float).reshape(n, self.dim)
        return Dataset(X, np.full(n, c), self.n_classes)
