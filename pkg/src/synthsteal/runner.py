"""Full experiment runs: every stage persisted, plus a manifest."""

from __future__ import annotations

import csv
import json
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .config import ExperimentConfig, dump_config
from .data import save_csv
from .experiments import make_target, run_attacks, setup_trial
from .numcore import save_checkpoint

REPORT_SCHEMA = 1


def write_projections(path, model, named_sets) -> None:
    """Raw 2-D views for plotting: first two input dims and first two output coordinates."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["set", "label", "x0", "x1", "out0", "out1"])
        for name, ds in named_sets:
            if len(ds) == 0:
                continue
            out = model.predict_proba(ds.X)
            x1 = ds.X[:, 1] if ds.dim > 1 else np.zeros(len(ds))
            for i in range(len(ds)):
                w.writerow([name, int(ds.y[i]), repr(float(ds.X[i, 0])), repr(float(x1[i])),
                            repr(float(out[i, 0])), repr(float(out[i, 1]))])


def write_json(path, doc) -> None:
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


@dataclass
class RunManifest:
    config_hash: str
    tool_version: str
    status: str = "running"
    artifacts: dict[str, str] = field(default_factory=dict)
    query_counts: dict[str, int] = field(default_factory=dict)
    wall_clock: dict[str, float] = field(default_factory=dict)
    error: str | None = None

    def to_dict(self):
        return asdict(self)


class _Stage:
    def __init__(self, manifest, name):
        self.manifest, self.name = manifest, name

    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.manifest.wall_clock[self.name] = round(time.perf_counter() - self.t0, 4)
        return False


def run(cfg: ExperimentConfig, out_dir=None) -> RunManifest:
    """Train target, build auxiliary data, run the selected attacks, per seed.

    Reports contain no timing so identical configs give byte-identical
    ``report.json`` files; timings live in ``manifest.json``.
    """
    out = Path(out_dir or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = RunManifest(cfg.digest(), __version__)
    (out / "config.yaml").write_text(dump_config(cfg), encoding="utf-8")
    manifest.artifacts["config"] = str(out / "config.yaml")

    def art(key, path):
        manifest.artifacts[key] = str(path)
        return path

    try:
        for seed in cfg.seeds:
            sdir = out / f"seed_{seed}"
            sdir.mkdir(exist_ok=True)
            with _Stage(manifest, f"seed_{seed}/train_target"):
                trial = setup_trial(cfg, seed)
            save_csv(trial.train, art(f"seed_{seed}/train", sdir / "train.csv"))
            save_csv(trial.members, art(f"seed_{seed}/members", sdir / "members.csv"))
            save_csv(trial.nonmembers, art(f"seed_{seed}/nonmembers", sdir / "nonmembers.csv"))
            save_checkpoint(art(f"seed_{seed}/target", sdir / "target.json"),
                            trial.model.spec_, trial.model.params_)

            report = {"schema": REPORT_SCHEMA, "seed": seed, "config_hash": manifest.config_hash}
            with _Stage(manifest, f"seed_{seed}/attacks"):
                target = make_target(trial, cfg)
                report["undefended"], aux = run_attacks(cfg, target, trial)
            manifest.query_counts[f"seed_{seed}/undefended"] = target.query_count
            save_csv(aux.generated, art(f"seed_{seed}/D_a", sdir / "D_a.csv"))
            save_csv(aux.augmented, art(f"seed_{seed}/D_aux", sdir / "D_aux.csv"))
            save_csv(aux.filtered, art(f"seed_{seed}/D_hat", sdir / "D_hat.csv"))
            if aux.filtering is not None:
                write_json(art(f"seed_{seed}/filter_report", sdir / "filter_report.json"),
                           aux.filtering.to_dict())
            if cfg.defense.enabled:
                with _Stage(manifest, f"seed_{seed}/defended_attacks"):
                    dtarget = make_target(trial, cfg, defended=True)
                    report["defended"], _ = run_attacks(cfg, dtarget, trial)
                manifest.query_counts[f"seed_{seed}/defended"] = dtarget.query_count
            write_json(art(f"seed_{seed}/report", sdir / "report.json"), report)
            # local model, so the target's query counter is untouched
            write_projections(art(f"seed_{seed}/projections", sdir / "projections.csv"), trial.model,
                              [("train", trial.train), ("D_aux", aux.augmented), ("D_hat", aux.filtered)])
        manifest.status = "complete"
    except Exception as exc:
        manifest.status = "failed"
        manifest.error = repr(exc)
        raise
    finally:
        write_json(out / "manifest.json", manifest.to_dict())
    return manifest


def _mean(values):
    values = [v for v in values if v is not None]
    return sum(values) / len(values) if values else None


def summarize(run_dir) -> dict:
    """Seed-averaged headline metrics for every ``seed_*/report.json`` in a run."""
    reports = [json.loads(p.read_text()) for p in sorted(Path(run_dir).glob("seed_*/report.json"))]
    summary = {"seeds": [r["seed"] for r in reports]}
    picks = {
        "extract": ("target_accuracy", "stolen_accuracy", "agreement"),
        "mi": ("accuracy", "f1", "auc"),
        "mi_label_only": ("accuracy", "auc"),
        "invert": ("mse", "accuracy"),
        "invert_label_only": ("accuracy",),
    }
    for variant in ("undefended", "defended"):
        block = {}
        for attack, keys in picks.items():
            rows = [r[variant][attack] for r in reports if variant in r and attack in r[variant]]
            if rows:
                block[attack] = {k: _mean([row.get(k) for row in rows]) for k in keys}
        if block:
            summary[variant] = block
    return summary
