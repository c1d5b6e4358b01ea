"""End-to-end experiment harness on the Gaussian-cluster benchmark.

Each stage is a small function so the CLI, the acceptance suite and ad-hoc
scripts can recombine them (e.g. the augmentation ablation reruns only the
pipeline). All randomness is derived from the per-run seed through
:func:`stage_seed`.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass

import numpy as np

from . import attacks
from .config import ExperimentConfig, ModelSection
from .data import Dataset, ProblemSpec, make_problem, split
from .generator import (
    ConditionalGaussianGenerator,
    RandomNoiseGenerator,
    RemoteGenerator,
    ShiftKnobs,
    random_noise_baseline,
)
from .metrics import HistogramSpec, kl_histogram
from .mlp import MLPClassifier
from .pipeline import (
    AugmentReport,
    FilterReport,
    GenerationReport,
    PipelineConfig,
    augment,
    inter_class_filter,
    step1_generate,
)
from .target import LABEL, DefendedTarget, DefenseConfig, LocalTarget, Target


def stage_seed(seed: int, stage: str) -> int:
    """Independent 32-bit seed for a named stage of run ``seed``."""
    ss = np.random.SeedSequence([int(seed), zlib.crc32(stage.encode())])
    return int(ss.generate_state(1)[0])


def classifier(section: ModelSection, n_classes: int, seed: int, **extra) -> MLPClassifier:
    return MLPClassifier(
        n_classes=n_classes,
        hidden_layer_sizes=tuple(section.hidden),
        activation=section.activation,
        learning_rate=section.learning_rate,
        epochs=section.epochs,
        batch_size=section.batch_size,
        weight_decay=section.weight_decay,
        random_state=seed,
        **extra,
    )


@dataclass
class Trial:
    seed: int
    problem: ProblemSpec
    train: Dataset
    members: Dataset
    nonmembers: Dataset
    model: MLPClassifier | None = None


def problem_spec(cfg: ExperimentConfig, seed: int) -> ProblemSpec:
    p = cfg.problem
    return ProblemSpec(
        n_classes=p.n_classes, dim=p.dim, radius=p.radius, class_std=p.class_std,
        train_size=p.train_size, member_eval_size=p.member_eval_size,
        nonmember_eval_size=p.nonmember_eval_size, seed=stage_seed(seed, "problem"),
    )


def train_target(cfg: ExperimentConfig, train: Dataset, seed: int) -> MLPClassifier:
    return classifier(cfg.target, cfg.problem.n_classes, stage_seed(seed, "target")).fit(train.X, train.y)


def setup_trial(cfg: ExperimentConfig, seed: int) -> Trial:
    """Draw the private data and train the victim model."""
    spec = problem_spec(cfg, seed)
    train, members, nonmembers = make_problem(spec)
    return Trial(seed, spec, train, members, nonmembers, train_target(cfg, train, seed))


def make_target(trial: Trial, cfg: ExperimentConfig, defended: bool = False, mode=None) -> Target:
    target = LocalTarget(trial.model)
    if defended:
        d = cfg.defense
        target = DefendedTarget(
            target,
            DefenseConfig(d.noise_mean, d.noise_variance, stage_seed(trial.seed, "defense")),
            mode,
        )
    elif mode is not None and mode != target.mode:
        target = LocalTarget(trial.model, mode)
    return target


def make_generator(cfg: ExperimentConfig, trial: Trial):
    g, p = cfg.generator, cfg.problem
    seed = stage_seed(trial.seed, "generator")
    if g.kind == "conditional_gaussian":
        knobs = ShiftKnobs(g.variance_ratio, g.mean_offset_scale, stage_seed(trial.seed, "offsets"))
        return ConditionalGaussianGenerator(trial.problem.means, p.class_std, knobs, seed)
    if g.kind == "random_noise":
        return RandomNoiseGenerator(p.dim, p.n_classes, g.noise_low, g.noise_high, seed)
    return RemoteGenerator(g.url, p.n_classes, p.dim)


def pipeline_config(cfg: ExperimentConfig, seed: int) -> PipelineConfig:
    s = cfg.pipeline
    return PipelineConfig(
        per_class_n=s.per_class_n, delta0=s.delta0, step=s.step, shell_samples=s.shell_samples,
        norm_order=s.norm_order, max_rounds=s.max_rounds, anchors_per_class=s.anchors_per_class,
        max_generate_attempts=s.max_generate_attempts, seed=stage_seed(seed, "pipeline"),
        filter_sigma=s.filter_sigma, filter_one_sided=s.filter_one_sided,
    )


@dataclass
class AuxData:
    generated: Dataset
    augmented: Dataset
    filtered: Dataset
    generation: GenerationReport
    augmentation: AugmentReport | None
    filtering: FilterReport | None

    def summary(self) -> dict:
        return {
            "generated": len(self.generated),
            "augmented": len(self.augmented),
            "filtered": len(self.filtered),
            "generation": self.generation.to_dict(),
            "augmentation": self.augmentation.to_dict() if self.augmentation else None,
            "removed_by_filter": len(self.filtering.removed) if self.filtering else 0,
        }


def build_aux(cfg: ExperimentConfig, target: Target, generator, seed: int,
              do_augment: bool | None = None, do_filter: bool | None = None) -> AuxData:
    """Steps 1-3. ``do_augment``/``do_filter`` override the config switches."""
    pc = pipeline_config(cfg, seed)
    do_augment = cfg.pipeline.augment if do_augment is None else do_augment
    do_filter = cfg.pipeline.filter if do_filter is None else do_filter
    D_a, gen_report = step1_generate(target, generator, pc)
    aug_report = None
    D_aux = D_a
    if do_augment:
        D_aux, aug_report = augment(target, D_a, pc)
    filt_report = None
    D_hat = D_aux
    if do_filter:
        if target.mode == LABEL:
            raise ValueError("inter-class filtering needs a confidence-mode target; "
                             "set pipeline.filter=false for label-only runs")
        D_hat, filt_report = inter_class_filter(target, D_aux, pc.filter_sigma, pc.filter_one_sided)
    return AuxData(D_a, D_aux, D_hat, gen_report, aug_report, filt_report)


def noise_aux(cfg: ExperimentConfig, target: Target, trial: Trial, n: int) -> Dataset:
    """Random-input baseline: ``n`` uniform box samples labeled by the target."""
    g, p = cfg.generator, cfg.problem
    gen = RandomNoiseGenerator(p.dim, p.n_classes, g.noise_low, g.noise_high,
                               stage_seed(trial.seed, "noise-baseline"))
    return random_noise_baseline(gen, n, target)


def run_extraction(cfg: ExperimentConfig, target: Target, aux: Dataset, trial: Trial):
    stolen = classifier(cfg.extraction.stolen, cfg.problem.n_classes, stage_seed(trial.seed, "stolen"))
    return attacks.extract(target, aux, stolen, trial.nonmembers, cfg.extraction.split_ratio,
                           stage_seed(trial.seed, "extract-split"))


def _shadow(cfg: ExperimentConfig, aux: Dataset, trial: Trial):
    """Overfit shadow model trained on a subsample of the auxiliary data."""
    m = cfg.mi
    rng = np.random.default_rng(stage_seed(trial.seed, "shadow-subsample"))
    size = min(m.shadow_size, len(aux))
    sub = aux.subset(np.sort(rng.choice(len(aux), size=size, replace=False)))
    inside, outside = split(sub, m.shadow_split, stage_seed(trial.seed, "shadow-split"))
    shadow = classifier(m.shadow, cfg.problem.n_classes, stage_seed(trial.seed, "shadow"))
    return shadow.fit(inside.X, inside.y), inside, outside


def probe_config(cfg: ExperimentConfig, seed: int) -> attacks.ProbeConfig:
    p = cfg.mi.probe
    return attacks.ProbeConfig(p.delta0, p.step, p.n_probes, p.max_rounds, p.norm_order,
                               stage_seed(seed, "probe"))


def run_mi(cfg: ExperimentConfig, target: Target, aux: Dataset, trial: Trial) -> attacks.MIReport:
    shadow, inside, outside = _shadow(cfg, aux, trial)
    attack_model = classifier(cfg.mi.attack, 2, stage_seed(trial.seed, "attack-model"),
                              loss="binary_cross_entropy")
    A = attacks.mi_train_attack(shadow, inside, outside, attack_model, cfg.mi.sort_confidences)
    return attacks.mi_evaluate(A, target, trial.members, trial.nonmembers, cfg.mi.sort_confidences)


def _best_radius_threshold(pos, neg) -> float:
    cands = np.unique(np.concatenate([pos, neg]))
    acc = [(np.mean(pos >= c) + np.mean(neg < c)) / 2 for c in cands]
    return float(cands[int(np.argmax(acc))])


def run_mi_label_only(cfg: ExperimentConfig, target: Target, aux: Dataset, trial: Trial,
                      generator=None) -> attacks.MIReport:
    """Flip-radius membership inference.

    With ``tau_rule="shadow"`` the threshold is the one that best separates
    the shadow model's own members from non-members by flip radius (measured
    on the shadow, so it costs no target queries). ``"generated_median"`` uses
    the median target flip radius of freshly generated samples.
    """
    probe = probe_config(cfg, trial.seed)
    rng = np.random.default_rng(probe.seed)
    if cfg.mi.tau_rule == "shadow":
        shadow, inside, outside = _shadow(cfg, aux, trial)
        shadow_target = LocalTarget(shadow, LABEL)
        tau = _best_radius_threshold(attacks.flip_radii(shadow_target, inside.X, probe, rng),
                                     attacks.flip_radii(shadow_target, outside.X, probe, rng))
    else:
        generator = generator or make_generator(cfg, trial)
        k = cfg.mi.reference_per_class
        ref = np.vstack([generator.generate(c, k).X for c in range(cfg.problem.n_classes)])
        tau = float(np.median(attacks.flip_radii(target, ref, probe, rng)))
    pos = attacks.flip_radii(target, trial.members.X, probe, rng)
    neg = attacks.flip_radii(target, trial.nonmembers.X, probe, rng)
    return attacks.membership_report(pos, neg, threshold=tau)


def inversion_model(cfg: ExperimentConfig, seed: int):
    s = cfg.inversion
    widths = (cfg.problem.dim, *cfg.target.hidden, cfg.problem.n_classes)
    return attacks.mirror_inversion_model(
        widths, random_state=stage_seed(seed, "inversion"),
        learning_rate=s.learning_rate, epochs=s.epochs, batch_size=s.batch_size,
    )


def run_inversion(cfg: ExperimentConfig, target: Target, aux: Dataset, trial: Trial,
                  return_reconstructions: bool = False):
    I = attacks.inversion_train(target, aux, inversion_model(cfg, trial.seed))
    return attacks.inversion_evaluate(I, target, trial.nonmembers, return_reconstructions)


def run_label_only_inversion(target: Target, aux: Dataset, trial: Trial) -> dict:
    """One representative per class, checked against the target's label."""
    seed = stage_seed(trial.seed, "representatives")
    reps, hits = [], []
    for c in range(aux.n_classes):
        x = attacks.label_only_invert(aux, c, seed + c)
        reps.append([float(v) for v in x])
        hits.append(int(target.query_label(x[None, :])[0]) == c)
    return {"representatives": reps, "accuracy": float(np.mean(hits))}


def kl_pair(cfg: ExperimentConfig, target: Target, trial: Trial, aux: AuxData) -> dict:
    h = cfg.histogram
    spec = HistogramSpec(h.bins_per_dim, h.low, h.high, h.alpha)
    return {
        "kl_unfiltered": kl_histogram(trial.train.X, aux.augmented.X, target, spec),
        "kl_filtered": kl_histogram(trial.train.X, aux.filtered.X, target, spec),
    }


def run_attacks(cfg: ExperimentConfig, target: Target, trial: Trial, generator=None) -> tuple[dict, AuxData]:
    """Pipeline plus the configured attacks against one target."""
    generator = generator or make_generator(cfg, trial)
    aux = build_aux(cfg, target, generator, trial.seed)
    out = {"aux": aux.summary()}
    data = aux.filtered
    if "extract" in cfg.attacks:
        out["extract"] = run_extraction(cfg, target, data, trial).report.to_dict()
    if "mi" in cfg.attacks:
        out["mi"] = run_mi(cfg, target, data, trial).to_dict()
    if "mi-label-only" in cfg.attacks:
        out["mi_label_only"] = run_mi_label_only(cfg, target, data, trial, generator).to_dict()
    if "invert" in cfg.attacks:
        out["invert"] = run_inversion(cfg, target, data, trial).to_dict()
    if "invert-label-only" in cfg.attacks:
        out["invert_label_only"] = run_label_only_inversion(target, data, trial)
    out["query_count"] = target.query_count
    return out, aux
