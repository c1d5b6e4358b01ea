"""Evaluation metrics: classification, ranking, reconstruction and KL estimates."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigError, InputError, ShapeError

# bins_per_dim ** n_dims above this cannot be indexed with int64 cell ids
MAX_CELLS = 2**62


def _paired(a, b):
    a, b = np.asarray(a), np.asarray(b)
    if a.shape != b.shape:
        raise InputError(f"length mismatch: {a.shape} vs {b.shape}")
    if a.size == 0:
        raise InputError("need at least one prediction")
    return a, b


def accuracy(predictions, labels) -> float:
    p, y = _paired(predictions, labels)
    return float(np.mean(p == y))


def agreement(preds_a, preds_b) -> float:
    """Fraction of positions where two models predict the same class."""
    return accuracy(preds_a, preds_b)


def f1(predictions, labels, positive_class=1) -> float:
    p, y = _paired(predictions, labels)
    tp = np.sum((p == positive_class) & (y == positive_class))
    fp = np.sum((p == positive_class) & (y != positive_class))
    fn = np.sum((p != positive_class) & (y == positive_class))
    if tp == 0:
        return 0.0
    precision = tp / (tp + fp)
    recall = tp / (tp + fn)
    return float(2 * precision * recall / (precision + recall))


def _scores(pos, neg):
    pos = np.asarray(pos, dtype=float).ravel()
    neg = np.asarray(neg, dtype=float).ravel()
    if pos.size == 0 or neg.size == 0:
        raise InputError("ranking metrics need at least one positive and one negative score")
    if not (np.all(np.isfinite(pos)) and np.all(np.isfinite(neg))):
        raise InputError("scores must be finite")
    return pos, neg


def roc_auc(pos_scores, neg_scores) -> float:
    """Mann-Whitney AUC: P(pos > neg) + 0.5 P(pos == neg)."""
    pos, neg = _scores(pos_scores, neg_scores)
    neg = np.sort(neg)
    below = np.searchsorted(neg, pos, side="left")
    not_above = np.searchsorted(neg, pos, side="right")
    wins = below.sum() + 0.5 * (not_above - below).sum()
    return float(wins / (pos.size * neg.size))


def tpr_at_fpr(pos_scores, neg_scores, fpr_level: float) -> float:
    """TPR at the lowest threshold whose empirical FPR does not exceed ``fpr_level``.

    Scores at or above the threshold count as positive. No interpolation
    between ROC points.
    """
    if not 0 < fpr_level < 1:
        raise InputError("fpr_level must lie in (0, 1)")
    pos, neg = _scores(pos_scores, neg_scores)
    allowed = math.floor(fpr_level * neg.size + 1e-9)
    if allowed >= neg.size:
        return 1.0
    # any threshold strictly above the (allowed+1)-th largest negative is admissible
    cut = np.sort(neg)[::-1][allowed]
    return float(np.mean(pos > cut))


def mse(originals, reconstructions) -> float:
    """Mean over samples of the per-dimension averaged squared error."""
    a = np.asarray(originals, dtype=float)
    b = np.asarray(reconstructions, dtype=float)
    if a.shape != b.shape:
        raise ShapeError(f"shape mismatch: {a.shape} vs {b.shape}")
    if a.size == 0:
        raise InputError("need at least one sample")
    if a.ndim == 1:
        a, b = a[:, None], b[:, None]
    return float(np.mean(np.mean((a - b) ** 2, axis=1)))


@dataclass(frozen=True)
class HistogramSpec:
    """Grid for histogram KL. ``alpha`` is a pseudo-count added to every cell."""

    bins_per_dim: int = 10
    low: float = 0.0
    high: float = 1.0
    alpha: float = 1e-3

    def __post_init__(self):
        if self.bins_per_dim < 2:
            raise ConfigError("bins_per_dim must be >= 2")
        if not self.alpha > 0:
            raise ConfigError("alpha must be > 0")
        if not self.high > self.low:
            raise ConfigError("histogram range must satisfy high > low")


def _cells(points, spec):
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    scaled = (pts - spec.low) / (spec.high - spec.low) * spec.bins_per_dim
    # out-of-range values fall into the edge bins
    idx = np.clip(np.floor(scaled), 0, spec.bins_per_dim - 1).astype(np.int64)
    weights = spec.bins_per_dim ** np.arange(pts.shape[1], dtype=np.int64)
    return idx @ weights


def histogram_kl(samples_p, samples_q, spec: HistogramSpec = HistogramSpec()) -> float:
    """KL(P || Q) between smoothed histograms of two point sets.

    Only occupied cells are stored. Each cell gets pseudo-count ``alpha``, so
    cells empty in both sets contribute a closed-form term instead of being
    enumerated.
    """
    p = np.asarray(samples_p, dtype=float)
    q = np.asarray(samples_q, dtype=float)
    p = p[:, None] if p.ndim == 1 else p
    q = q[:, None] if q.ndim == 1 else q
    if len(p) == 0 or len(q) == 0:
        raise InputError("both sample sets must be nonempty")
    if p.shape[1] != q.shape[1]:
        raise ShapeError("sample sets have different dimensions")
    n_cells = spec.bins_per_dim ** p.shape[1]
    if n_cells > MAX_CELLS:
        raise ConfigError(
            f"{spec.bins_per_dim}^{p.shape[1]} cells exceed the sparse index range; "
            "reduce bins_per_dim or project the outputs first"
        )
    cp, kp = np.unique(_cells(p, spec), return_counts=True)
    cq, kq = np.unique(_cells(q, spec), return_counts=True)
    cells = np.union1d(cp, cq)
    count_p = np.zeros(cells.size)
    count_q = np.zeros(cells.size)
    count_p[np.searchsorted(cells, cp)] = kp
    count_q[np.searchsorted(cells, cq)] = kq
    a = spec.alpha
    zp = len(p) + a * n_cells
    zq = len(q) + a * n_cells
    pp = (count_p + a) / zp
    qq = (count_q + a) / zq
    kl = float(np.sum(pp * np.log(pp / qq)))
    empty = n_cells - cells.size
    if empty:
        pe, qe = a / zp, a / zq
        kl += empty * pe * math.log(pe / qe)
    return max(kl, 0.0)


def kl_histogram(samples_p, samples_q, target=None, spec: HistogramSpec = HistogramSpec()) -> float:
    """Histogram KL measured in the target's output space.

    Both sample sets are mapped through ``target.query_confidence`` first. With
    ``target=None`` the samples are used as given.
    """
    if target is not None:
        samples_p = target.query_confidence(samples_p)
        samples_q = target.query_confidence(samples_q)
    return histogram_kl(samples_p, samples_q, spec)
