"""Datasets, the Gaussian-cluster benchmark problem, splitting and CSV I/O."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .exceptions import InputError, ParseError, ShapeError

log = logging.getLogger(__name__)

UNLABELED = -1


@dataclass
class Dataset:
    """Feature matrix ``X`` (n, d) with integer labels ``y``.

    Unlabeled rows carry ``UNLABELED`` (-1) in ``y``.
    """

    X: np.ndarray
    y: np.ndarray
    n_classes: int

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)
        if self.X.ndim == 1:
            self.X = self.X.reshape(0, 0) if self.X.size == 0 else self.X[None, :]
        self.y = np.asarray(self.y, dtype=int).reshape(-1)
        if self.X.ndim != 2 or self.X.shape[0] != self.y.shape[0]:
            raise ShapeError(f"X shape {self.X.shape} does not match {self.y.shape[0]} labels")
        if not np.all(np.isfinite(self.X)):
            raise InputError("features must be finite")
        if self.y.size and (self.y.min() < UNLABELED or self.y.max() >= self.n_classes):
            raise InputError(f"labels must lie in [0, {self.n_classes}) or be unlabeled")

    @classmethod
    def empty(cls, dim: int, n_classes: int) -> Dataset:
        return cls(np.empty((0, dim)), np.empty(0, dtype=int), n_classes)

    def __len__(self) -> int:
        return self.X.shape[0]

    @property
    def dim(self) -> int:
        return self.X.shape[1]

    def subset(self, idx) -> Dataset:
        idx = np.asarray(idx, dtype=int)
        return Dataset(self.X[idx].reshape(len(idx), self.dim), self.y[idx], self.n_classes)

    def of_class(self, c: int) -> Dataset:
        return self.subset(np.flatnonzero(self.y == c))

    def class_counts(self) -> list[int]:
        return [int(np.sum(self.y == c)) for c in range(self.n_classes)]

    def concat(self, other: Dataset) -> Dataset:
        if other.dim != self.dim or other.n_classes != self.n_classes:
            raise ShapeError("cannot concatenate datasets of different dim or class count")
        return Dataset(np.vstack([self.X, other.X]), np.concatenate([self.y, other.y]), self.n_classes)

    def equals(self, other: Dataset) -> bool:
        return (
            self.n_classes == other.n_classes
            and self.X.shape == other.X.shape
            and np.array_equal(self.X, other.X)
            and np.array_equal(self.y, other.y)
        )


def circle_means(n_classes: int, dim: int, radius: float = 3.0) -> np.ndarray:
    """Class centres evenly spaced on a circle in the first two coordinates."""
    angles = 2 * np.pi * np.arange(n_classes) / n_classes
    means = np.zeros((n_classes, dim))
    means[:, 0] = radius * np.cos(angles)
    means[:, 1] = radius * np.sin(angles)
    return means


@dataclass
class ProblemSpec:
    n_classes: int = 4
    dim: int = 8
    class_means: np.ndarray | None = None
    radius: float = 3.0
    class_std: float = 1.0
    train_size: int = 400
    member_eval_size: int = 100
    nonmember_eval_size: int = 1000
    seed: int = 0
    _means: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.n_classes < 2:
            raise InputError("need at least 2 classes")
        if self.dim < 2:
            raise InputError("need at least 2 feature dimensions")
        if not self.class_std > 0:
            raise InputError("class_std must be > 0")
        if min(self.train_size, self.member_eval_size, self.nonmember_eval_size) < 1:
            raise InputError("dataset sizes must be >= 1")
        if self.member_eval_size > self.train_size:
            raise InputError("member_eval_size cannot exceed train_size")
        if self.class_means is None:
            self._means = circle_means(self.n_classes, self.dim, self.radius)
        else:
            self._means = np.asarray(self.class_means, dtype=float)
            if self._means.shape != (self.n_classes, self.dim):
                raise ShapeError("class_means must have shape (n_classes, dim)")

    @property
    def means(self) -> np.ndarray:
        return self._means


def _stratified_counts(total, n_classes):
    base, extra = divmod(total, n_classes)
    return [base + (1 if c < extra else 0) for c in range(n_classes)]


def _draw(spec, rng, total):
    y = np.repeat(np.arange(spec.n_classes), _stratified_counts(total, spec.n_classes))
    rng.shuffle(y)
    X = spec.means[y] + spec.class_std * rng.standard_normal((total, spec.dim))
    return Dataset(X, y, spec.n_classes)


def make_problem(spec: ProblemSpec) -> tuple[Dataset, Dataset, Dataset]:
    """Draw ``(train, member_eval, nonmember_eval)`` from the Gaussian mixture.

    ``member_eval`` is a stratified subset of ``train``; ``nonmember_eval`` is
    a fresh draw with no row equal to any training row.
    """
    rng = np.random.default_rng(spec.seed)
    train = _draw(spec, rng, spec.train_size)
    member_idx = []
    for c, k in enumerate(_stratified_counts(spec.member_eval_size, spec.n_classes)):
        pool = np.flatnonzero(train.y == c)
        member_idx.extend(rng.choice(pool, size=min(k, len(pool)), replace=False))
    member_eval = train.subset(np.sort(member_idx))
    nonmember = _draw(spec, rng, spec.nonmember_eval_size)
    seen = {row.tobytes() for row in train.X}
    clash = np.array([row.tobytes() in seen for row in nonmember.X])
    if clash.any():
        nonmember = nonmember.subset(np.flatnonzero(~clash))
    return train, member_eval, nonmember


def split(dataset: Dataset, ratio: float, seed: int) -> tuple[Dataset, Dataset]:
    """Stratified split into a ``ratio`` share and the remainder.

    Groups with fewer than two rows cannot be split; they go whole to the
    larger side and a warning is logged.
    """
    if not 0 < ratio < 1:
        raise InputError("ratio must lie strictly between 0 and 1")
    rng = np.random.default_rng(seed)
    first, second = [], []
    for label in np.unique(dataset.y):
        idx = np.flatnonzero(dataset.y == label)
        idx = idx[rng.permutation(len(idx))]
        n = len(idx)
        if n < 2:
            log.warning("degenerate split: label %d has %d sample(s)", label, n)
            (first if ratio >= 0.5 else second).extend(idx)
            continue
        k = min(max(math.floor(ratio * n + 0.5), 1), n - 1)
        first.extend(idx[:k])
        second.extend(idx[k:])
    return dataset.subset(np.sort(first)), dataset.subset(np.sort(second))


def save_csv(dataset: Dataset, path) -> None:
    """Write ``label,f0,...`` rows; unlabeled rows get an empty label field."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["label"] + [f"f{i}" for i in range(dataset.dim)])
        for x, y in zip(dataset.X, dataset.y):
            w.writerow(["" if y == UNLABELED else str(int(y))] + [repr(float(v)) for v in x])


def load_csv(path, n_classes: int | None = None) -> Dataset:
    """Read a dataset written by :func:`save_csv`.

    ``n_classes`` defaults to one past the largest label present.
    """
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ParseError("missing header row", line=1)
    header = rows[0]
    if not header or header[0] != "label":
        raise ParseError("header must start with 'label'", line=1)
    dim = len(header) - 1
    X = np.empty((len(rows) - 1, dim))
    y = np.empty(len(rows) - 1, dtype=int)
    for i, row in enumerate(rows[1:]):
        lineno = i + 2
        if len(row) != dim + 1:
            raise ParseError(f"expected {dim + 1} fields, got {len(row)}", line=lineno)
        try:
            y[i] = UNLABELED if row[0] == "" else int(row[0])
            X[i] = [float(v) for v in row[1:]]
        except ValueError as exc:
            raise ParseError(str(exc), line=lineno) from exc
        if not np.all(np.isfinite(X[i])):
            raise ParseError("non-finite feature", line=lineno)
    if n_classes is None:
        n_classes = int(y.max()) + 1 if y.size and y.max() >= 0 else 1
    return Dataset(X, y, n_classes)
