"""Experiment configuration: nested dataclasses loaded strictly from YAML.

Unknown keys are rejected. ``--set section.key=value`` style overrides are
parsed as YAML scalars, so ``--set pipeline.delta0=0.5`` yields a float.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import typing
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .exceptions import ConfigError

SCHEMA_VERSION = 1


@dataclass
class ProblemSection:
    n_classes: int = 4
    dim: int = 8
    radius: float = 3.0
    class_std: float = 1.0
    train_size: int = 400
    member_eval_size: int = 100
    nonmember_eval_size: int = 1000


@dataclass
class ModelSection:
    hidden: list[int] = field(default_factory=lambda: [64])
    activation: str = "relu"
    learning_rate: float = 0.01
    epochs: int = 200
    batch_size: int = 32
    weight_decay: float = 0.0


@dataclass
class GeneratorSection:
    kind: str = "conditional_gaussian"
    variance_ratio: float = 0.5
    mean_offset_scale: float = 0.5
    noise_low: float = -1.0
    noise_high: float = 1.0
    url: str = ""


@dataclass
class PipelineSection:
    per_class_n: int = 20
    delta0: float = 0.2
    step: float = 0.2
    shell_samples: int = 5
    norm_order: float = 2.0
    max_rounds: int = 64
    anchors_per_class: int = 20
    max_generate_attempts: int = 5
    augment: bool = True
    filter: bool = True
    filter_sigma: float = 3.0
    filter_one_sided: bool = False


@dataclass
class ExtractionSection:
    stolen: ModelSection = field(default_factory=ModelSection)
    split_ratio: float = 0.8


@dataclass
class ProbeSection:
    delta0: float = 0.05
    step: float = 0.05
    n_probes: int = 100
    max_rounds: int = 80
    norm_order: float = 2.0


@dataclass
class MISection:
    shadow_size: int = 240
    shadow_split: float = 0.5
    shadow: ModelSection = field(default_factory=lambda: ModelSection(epochs=3000))
    attack: ModelSection = field(
        default_factory=lambda: ModelSection(hidden=[32], learning_rate=0.005, epochs=300)
    )
    sort_confidences: bool = True
    probe: ProbeSection = field(default_factory=ProbeSection)
    tau_rule: str = "shadow"
    reference_per_class: int = 25


@dataclass
class InversionSection:
    learning_rate: float = 0.005
    epochs: int = 300
    batch_size: int = 32


@dataclass
class DefenseSection:
    enabled: bool = False
    noise_mean: float = 0.0
    noise_variance: float = 0.1


@dataclass
class HistogramSection:
    bins_per_dim: int = 10
    low: float = 0.0
    high: float = 1.0
    alpha: float = 1e-3


@dataclass
class ExperimentConfig:
    problem: ProblemSection = field(default_factory=ProblemSection)
    target: ModelSection = field(default_factory=ModelSection)
    generator: GeneratorSection = field(default_factory=GeneratorSection)
    pipeline: PipelineSection = field(default_factory=PipelineSection)
    attacks: list[str] = field(default_factory=lambda: ["extract"])
    extraction: ExtractionSection = field(default_factory=ExtractionSection)
    mi: MISection = field(default_factory=MISection)
    inversion: InversionSection = field(default_factory=InversionSection)
    defense: DefenseSection = field(default_factory=DefenseSection)
    histogram: HistogramSection = field(default_factory=HistogramSection)
    seeds: list[int] = field(default_factory=lambda: [0])
    output_dir: str = "runs/default"

    def validate(self) -> ExperimentConfig:
        if len(set(self.seeds)) != len(self.seeds):
            raise ConfigError("seeds must be distinct")
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        unknown = set(self.attacks) - set(ATTACKS)
        if unknown:
            raise ConfigError(f"unknown attacks {sorted(unknown)}; choose from {ATTACKS}")
        if self.generator.kind not in ("conditional_gaussian", "random_noise", "remote"):
            raise ConfigError(f"unknown generator kind {self.generator.kind!r}")
        if self.mi.tau_rule not in ("shadow", "generated_median"):
            raise ConfigError("mi.tau_rule must be 'shadow' or 'generated_median'")
        return self

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def digest(self) -> str:
        """SHA-256 of the canonical JSON form; changes iff any field changes."""
        canonical = _build(ExperimentConfig, self.to_dict()).to_dict()  # 2 and 2.0 hash alike
        blob = json.dumps(canonical, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()


ATTACKS = ("extract", "mi", "mi-label-only", "invert", "invert-label-only")


def _coerce(tp, value, path):
    origin = typing.get_origin(tp)
    if dataclasses.is_dataclass(tp):
        if not isinstance(value, dict):
            raise ConfigError(f"{path}: expected a mapping")
        return _build(tp, value, path)
    if origin is list:
        if not isinstance(value, list):
            raise ConfigError(f"{path}: expected a list")
        (item,) = typing.get_args(tp)
        return [_coerce(item, v, f"{path}[{i}]") for i, v in enumerate(value)]
    if tp is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{path}: expected true/false, got {value!r}")
        return value
    if tp is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{path}: expected an integer, got {value!r}")
        return value
    if tp is float:
        if isinstance(value, str) and value.lower() in ("inf", ".inf"):
            return float("inf")
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{path}: expected a number, got {value!r}")
        return float(value)
    if tp is str:
        if not isinstance(value, str):
            raise ConfigError(f"{path}: expected a string, got {value!r}")
        return value
    raise ConfigError(f"{path}: unsupported field type {tp}")


def _build(cls, data: dict, path=""):
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - names
    if unknown:
        where = path or "top level"
        raise ConfigError(f"unknown key(s) {sorted(unknown)} at {where}")
    kwargs = {k: _coerce(hints[k], v, f"{path}.{k}" if path else k) for k, v in data.items()}
    return cls(**kwargs)


def from_dict(data: dict | None) -> ExperimentConfig:
    return _build(ExperimentConfig, data or {}).validate()


def _set_path(tree: dict, dotted: str, value):
    keys = dotted.split(".")
    node = tree
    for k in keys[:-1]:
        node = node.setdefault(k, {})
        if not isinstance(node, dict):
            raise ConfigError(f"cannot override {dotted}: {k} is not a section")
    node[keys[-1]] = value


def load_config(path=None, overrides=()) -> ExperimentConfig:
    """Load a YAML config (or defaults) and apply ``key.sub=value`` overrides."""
    data = {}
    if path is not None:
        try:
            data = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: top level must be a mapping")
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} must look like key.sub=value")
        key, raw = item.split("=", 1)
        _set_path(data, key.strip(), yaml.safe_load(raw))
    return from_dict(data)


def dump_config(cfg: ExperimentConfig) -> str:
    return yaml.safe_dump(cfg.to_dict(), sort_keys=False)
