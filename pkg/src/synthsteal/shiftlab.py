"""Toy diffusion with an exact noise predictor, plus the filtering KL experiment.

For Gaussian data ``x0 ~ N(m, s^2 I)`` the minimum-MSE noise predictor has a
closed form, so the reverse chain can be run without any learned network and
the effect of the per-step random term is isolated.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from .exceptions import InputError

log = logging.getLogger(__name__)


class VarianceSchedule:
    """Per-step ``alphas`` (t = 1..T), their running product and reverse-step sigmas.

    Arrays are indexed by ``t``; index 0 holds the ``t = 0`` convention
    ``alpha_bar = 1``.
    """

    def __init__(self, alphas, sigmas=None):
        a = np.asarray(alphas, dtype=float)
        if a.ndim != 1 or a.size == 0 or np.any(a <= 0) or np.any(a >= 1):
            raise InputError("alphas must be a nonempty vector with entries in (0, 1)")
        self.T = a.size
        self.alphas = np.concatenate([[1.0], a])
        self.alpha_bars = np.cumprod(self.alphas)
        if sigmas is None:
            sigmas = np.sqrt(1.0 - a)
        s = np.asarray(sigmas, dtype=float)
        if s.shape != a.shape or np.any(s < 0):
            raise InputError("need one nonnegative sigma per step")
        self.sigmas = np.concatenate([[0.0], s])

    @classmethod
    def linear(cls, T: int = 100, alpha_start: float = 0.9999, alpha_end: float = 0.9):
        return cls(np.linspace(alpha_start, alpha_end, T))

    def _check_t(self, t, lowest=1):
        if not lowest <= t <= self.T:
            raise InputError(f"t must lie in [{lowest}, {self.T}], got {t}")


@dataclass(frozen=True)
class GaussianDataSpec:
    mean: np.ndarray
    std: float

    def __post_init__(self):
        object.__setattr__(self, "mean", np.atleast_1d(np.asarray(self.mean, dtype=float)))
        if not self.std > 0:
            raise InputError("std must be > 0")


def forward_sample(x0, t: int, schedule: VarianceSchedule, rng) -> np.ndarray:
    """Draw ``x_t ~ q(x_t | x_0)`` in closed form. ``t = 0`` returns ``x0``."""
    schedule._check_t(t, lowest=0)
    x0 = np.asarray(x0, dtype=float)
    ab = schedule.alpha_bars[t]
    return np.sqrt(ab) * x0 + np.sqrt(1.0 - ab) * rng.standard_normal(x0.shape)


def analytic_eps(x_t, t: int, schedule: VarianceSchedule, data: GaussianDataSpec) -> np.ndarray:
    """``E[eps | x_t]`` for Gaussian data.

    With ``x_t = sqrt(ab) x0 + sqrt(1 - ab) eps``, eps and x_t are jointly
    Gaussian with ``Cov(eps, x_t) = sqrt(1 - ab)`` and
    ``Var(x_t) = ab s^2 + 1 - ab``, which gives the linear regression below.
    """
    schedule._check_t(t)
    ab = schedule.alpha_bars[t]
    x_t = np.asarray(x_t, dtype=float)
    return np.sqrt(1.0 - ab) * (x_t - np.sqrt(ab) * data.mean) / (ab * data.std**2 + 1.0 - ab)


def reverse_step(x_t, t: int, schedule: VarianceSchedule, data: GaussianDataSpec,
                 stochastic: bool = True, rng=None, xi=None) -> np.ndarray:
    """One ancestral step ``x_t -> x_{t-1}``.

    ``xi`` may be passed explicitly; otherwise it is drawn from ``rng`` when
    ``stochastic`` is set.
    """
    schedule._check_t(t)
    a, ab = schedule.alphas[t], schedule.alpha_bars[t]
    x_t = np.asarray(x_t, dtype=float)
    eps = analytic_eps(x_t, t, schedule, data)
    x_prev = (x_t - (1.0 - a) / np.sqrt(1.0 - ab) * eps) / np.sqrt(a)
    if stochastic:
        if xi is None:
            xi = rng.standard_normal(x_t.shape)
        x_prev = x_prev + schedule.sigmas[t] * xi
    return x_prev


def prior_sample(n: int, schedule: VarianceSchedule, data: GaussianDataSpec, rng) -> np.ndarray:
    """Exact marginal ``q(x_T)`` for Gaussian data."""
    ab = schedule.alpha_bars[schedule.T]
    d = data.mean.shape[0]
    std = np.sqrt(ab * data.std**2 + 1.0 - ab)
    return np.sqrt(ab) * data.mean + std * rng.standard_normal((n, d))


def run_chain(x_T, schedule: VarianceSchedule, data: GaussianDataSpec, stochastic: bool = True,
              rng=None, trajectory: bool = False):
    """Run the reverse chain from ``t = T`` to 0.

    With ``trajectory=True`` also returns ``(t, mean, variance)`` rows of the
    chain population at each step (variance pooled over coordinates).
    """
    x = np.asarray(x_T, dtype=float)
    rows = [(schedule.T, float(x.mean()), float(x.var(axis=0).mean()))]
    for t in range(schedule.T, 0, -1):
        x = reverse_step(x, t, schedule, data, stochastic, rng)
        rows.append((t - 1, float(x.mean()), float(x.var(axis=0).mean())))
    return (x, rows) if trajectory else x


def write_trajectory_csv(rows, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "mean", "variance"])
        for t, m, v in rows:
            w.writerow([t, repr(m), repr(v)])


@dataclass
class ChainComparison:
    seed: int
    mean_deterministic: float
    var_deterministic: float
    mean_stochastic: float
    var_stochastic: float

    @property
    def inflated(self) -> bool:
        return self.var_stochastic > self.var_deterministic


def compare_chains(data: GaussianDataSpec, schedule: VarianceSchedule, n_chains: int = 10_000,
                   seeds=(0, 1, 2, 3, 4)) -> list[ChainComparison]:
    """Run the reverse chain with and without the random term from shared starts.

    Per seed, both chains start from the same exact-prior draw; only the
    per-step noise differs. Moments are pooled over chains and coordinates.
    """
    out = []
    for seed in seeds:
        start_rng, noise_rng = (np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(2))
        x_T = prior_sample(n_chains, schedule, data, start_rng)
        det = run_chain(x_T, schedule, data, stochastic=False)
        sto = run_chain(x_T, schedule, data, stochastic=True, rng=noise_rng)
        out.append(ChainComparison(int(seed), float(det.mean()), float(det.var(axis=0).mean()),
                                   float(sto.mean()), float(sto.var(axis=0).mean())))
    return out


# ---------------------------------------------------------------- KL experiment


@dataclass
class KLSeedResult:
    seed: int
    kl_unfiltered: float
    kl_filtered: float
    removed: int
    degenerate: bool = False


@dataclass
class KLExperimentReport:
    seeds: list[KLSeedResult] = field(default_factory=list)

    @property
    def fraction_ordered(self) -> float:
        ok = [r.kl_filtered <= r.kl_unfiltered for r in self.seeds]
        return float(np.mean(ok)) if ok else 0.0

    def to_dict(self):
        return {"seeds": [asdict(r) for r in self.seeds], "fraction_ordered": self.fraction_ordered}


def kl_inequality_experiment(setup, seeds, hist_spec=None, filter_enabled: bool = True) -> KLExperimentReport:
    """Compare KL(train || generated) before and after inter-class filtering.

    ``setup(seed)`` must return ``(target, train_set, D_aux)``, i.e. a trained
    confidence-mode target, its training data and the augmented auxiliary
    set for that seed. KL is measured on target outputs.
    """
    from .metrics import HistogramSpec, kl_histogram
    from .pipeline import inter_class_filter

    hist_spec = hist_spec or HistogramSpec()
    report = KLExperimentReport()
    for seed in seeds:
        target, train, aux = setup(seed)
        train_out = target.query_confidence(train.X)
        aux_out = target.query_confidence(aux.X)
        if filter_enabled:
            kept, frep = inter_class_filter(target, aux, outputs=aux_out)
            kept_out = aux_out[np.setdiff1d(np.arange(len(aux)), frep.removed)]
            removed = len(frep.removed)
        else:
            kept, kept_out, removed = aux, aux_out, 0
        degenerate = any(
            np.any(aux.y == c) and not np.any(kept.y == c) for c in range(aux.n_classes)
        )
        if degenerate:
            log.warning("seed %s: filtering removed an entire class", seed)
        report.seeds.append(KLSeedResult(
            seed=int(seed),
            kl_unfiltered=kl_histogram(train_out, aux_out, None, hist_spec),
            kl_filtered=kl_histogram(train_out, kept_out, None, hist_spec),
            removed=removed,
            degenerate=degenerate,
        ))
    return report
