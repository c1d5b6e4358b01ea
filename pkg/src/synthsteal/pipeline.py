"""Auxiliary-data construction: generate and validate, boundary-probing
augmentation, then inter-class three-sigma filtering."""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from .data import Dataset
from .exceptions import CapabilityError, ClassStarvationError, ConfigError, InputError
from .target import CONFIDENCE, Target

log = logging.getLogger(__name__)

NORM_ORDERS = (1, 2, np.inf)


@dataclass(frozen=True)
class PipelineConfig:
    per_class_n: int = 50
    delta0: float = 0.2
    step: float = 0.2
    shell_samples: int = 20
    norm_order: float = 2
    max_rounds: int = 64
    anchors_per_class: int = 1
    max_generate_attempts: int = 5
    seed: int = 0
    filter_sigma: float = 3.0
    filter_one_sided: bool = False

    def __post_init__(self):
        if self.per_class_n < 0:
            raise ConfigError("per_class_n must be >= 0")
        if not self.delta0 > 0 or not self.step > 0:
            raise ConfigError("delta0 and step must be > 0")
        if self.shell_samples < 1:
            raise ConfigError("shell_samples must be >= 1")
        if self.max_rounds < 1:
            raise ConfigError("max_rounds must be >= 1")
        if self.anchors_per_class < 1:
            raise ConfigError("anchors_per_class must be >= 1")
        if self.max_generate_attempts < 1:
            raise ConfigError("max_generate_attempts must be >= 1")
        if self.norm_order not in NORM_ORDERS:
            raise ConfigError(f"norm_order must be one of 1, 2, inf; got {self.norm_order}")

    def radius(self, i: int) -> float:
        """Outer radius of probing round ``i``; round -1 has radius 0."""
        return 0.0 if i < 0 else self.delta0 + i * self.step


def _class_rngs(seed, n_classes):
    # one independent stream per class so classes can be processed in any order
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n_classes)]


# ---------------------------------------------------------------- step 1


@dataclass
class GenerationReport:
    kept: list[int]
    discarded: list[int]

    def to_dict(self):
        return asdict(self)


def step1_generate(target: Target, generator, cfg: PipelineConfig) -> tuple[Dataset, GenerationReport]:
    """Generate ``per_class_n`` samples per class that the target labels correctly.

    Misclassified samples are discarded. Drawing stops after
    ``max_generate_attempts * per_class_n`` samples for a class.
    """
    if generator.dim != target.n_features or generator.n_classes != target.n_classes:
        raise InputError("generator and target disagree on dimension or class count")
    C = target.n_classes
    parts, kept, discarded = [], [], []
    budget = cfg.max_generate_attempts * cfg.per_class_n
    for c in range(C):
        have, drawn, pieces = 0, 0, []
        while have < cfg.per_class_n and drawn < budget:
            batch = generator.generate(c, min(cfg.per_class_n - have, budget - drawn))
            drawn += len(batch)
            ok = target.query_label(batch.X) == c
            pieces.append(batch.subset(np.flatnonzero(ok)))
            have += int(ok.sum())
        if cfg.per_class_n > 0 and have == 0:
            raise ClassStarvationError(c, drawn)
        if have < cfg.per_class_n:
            log.warning("class %d: only %d of %d samples validated", c, have, cfg.per_class_n)
        parts.extend(pieces)
        kept.append(have)
        discarded.append(drawn - have)
    D_a = Dataset(
        np.vstack([np.empty((0, target.n_features))] + [p.X for p in parts]),
        np.concatenate([np.empty(0, dtype=int)] + [p.y for p in parts]),
        C,
    )
    return D_a, GenerationReport(kept, discarded)


# ---------------------------------------------------------------- step 2


def sample_shell(center, lo, hi, n, norm_order, rng) -> np.ndarray:
    """``n`` points around ``center`` at norm-``p`` distance uniform in ``(lo, hi]``.

    Directions are normalized Gaussians; radii are uniform, not volume-uniform.
    """
    d = center.shape[0]
    g = rng.standard_normal((n, d))
    norms = np.linalg.norm(g, ord=norm_order, axis=1, keepdims=True)
    # uniform on (lo, hi]: 1 - U maps [0, 1) onto (0, 1]
    r = lo + (hi - lo) * (1.0 - rng.random((n, 1)))
    return center + r * g / norms


@dataclass
class AugmentReport:
    """Per class, one entry per anchor: number of rounds whose points were kept."""

    rounds_kept: list[list[int]] = field(default_factory=list)
    points_added: list[int] = field(default_factory=list)

    def to_dict(self):
        return asdict(self)


def augment(target: Target, D_a: Dataset, cfg: PipelineConfig) -> tuple[Dataset, AugmentReport]:
    """Grow each class by probing outward from random anchors until the label flips.

    Round ``i`` draws ``shell_samples`` points in the shell between radius
    ``cfg.radius(i - 1)`` and ``cfg.radius(i)``. If the target labels all of
    them as the anchor's class they are kept and the next round starts;
    otherwise the round's points are dropped and the anchor is finished.
    """
    C = D_a.n_classes
    counts = D_a.class_counts()
    missing = [c for c in range(C) if counts[c] == 0]
    if missing:
        raise InputError(f"classes {missing} have no samples to augment")
    rngs = _class_rngs(cfg.seed, C)
    new_X, new_y = [np.empty((0, D_a.dim))], [np.empty(0, dtype=int)]
    report = AugmentReport()
    for c in range(C):
        rng = rngs[c]
        members = D_a.of_class(c)
        m = min(cfg.anchors_per_class, len(members))
        anchors = members.X[rng.choice(len(members), size=m, replace=False)]
        per_anchor, n_added = [], 0
        for x in anchors:
            kept_rounds = 0
            for i in range(cfg.max_rounds):
                pts = sample_shell(x, cfg.radius(i - 1), cfg.radius(i), cfg.shell_samples,
                                   cfg.norm_order, rng)
                if np.any(target.query_label(pts) != c):
                    break
                new_X.append(pts)
                new_y.append(np.full(len(pts), c))
                kept_rounds += 1
                n_added += len(pts)
            per_anchor.append(kept_rounds)
        report.rounds_kept.append(per_anchor)
        report.points_added.append(n_added)
    return D_a.concat(Dataset(np.vstack(new_X), np.concatenate(new_y), C)), report


# ---------------------------------------------------------------- step 3


def sigma_outliers(distances, n_sigma: float = 3.0, one_sided: bool = False) -> np.ndarray:
    """Boolean mask of values farther than ``n_sigma`` population stds from the mean.

    Returns all-False when fewer than two values or zero spread.
    """
    d = np.asarray(distances, dtype=float)
    if d.size < 2:
        return np.zeros(d.shape, dtype=bool)
    mu, sd = d.mean(), d.std()
    if sd == 0:
        return np.zeros(d.shape, dtype=bool)
    dev = d - mu if one_sided else np.abs(d - mu)
    return dev > n_sigma * sd


@dataclass
class FilterReport:
    pairs: list[dict] = field(default_factory=list)
    removed: list[int] = field(default_factory=list)
    kept_counts: list[int] = field(default_factory=list)

    def to_dict(self):
        return asdict(self)


def inter_class_filter(
    target: Target,
    D_aux: Dataset,
    n_sigma: float = 3.0,
    one_sided: bool = False,
    outputs: np.ndarray | None = None,
) -> tuple[Dataset, FilterReport]:
    """Drop samples whose output vectors are outliers relative to other classes' centroids.

    For each class ``i`` the centroid of its target outputs is computed; then,
    for every other class ``k``, the L2 distances from that centroid to class
    ``k``'s outputs are tested with :func:`sigma_outliers`. A sample flagged by
    any pair is removed. Statistics are computed once on the unfiltered data.
    ``removed`` in the report holds row indices into ``D_aux``.
    """
    if target.mode != CONFIDENCE:
        raise CapabilityError("inter-class filtering needs confidence vectors")
    if outputs is None:
        outputs = target.query_confidence(D_aux.X)
    present = [c for c in range(D_aux.n_classes) if np.any(D_aux.y == c)]
    flagged = np.zeros(len(D_aux), dtype=bool)
    report = FilterReport()
    for i in present:
        centroid = outputs[D_aux.y == i].mean(axis=0)
        for k in present:
            if k == i:
                continue
            idx = np.flatnonzero(D_aux.y == k)
            dist = np.linalg.norm(outputs[idx] - centroid, axis=1)
            mask = sigma_outliers(dist, n_sigma, one_sided)
            flagged[idx[mask]] = True
            report.pairs.append({
                "i": i, "k": k, "mean": float(dist.mean()), "std": float(dist.std()),
                "flagged": int(mask.sum()),
            })
    report.removed = [int(j) for j in np.flatnonzero(flagged)]
    kept = D_aux.subset(np.flatnonzero(~flagged))
    report.kept_counts = kept.class_counts()
    return kept, report

