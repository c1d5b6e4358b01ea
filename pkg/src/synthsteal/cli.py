"""Command-line entry point (``synthsteal``).

Every stage reads and writes plain files (CSV datasets, JSON checkpoints and
reports), so a run can be resumed or inspected between steps. Shared flags:
``--config FILE`` for a YAML experiment config, ``--set key.sub=value`` to
override single keys, ``--seed`` to pick the run seed.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import experiments as ex
from .config import ATTACKS, load_config
from .data import Dataset, load_csv, make_problem, save_csv
from .exceptions import (
    CapabilityError,
    ConfigError,
    InputError,
    SynthStealError,
    TransportError,
)
from .numcore import save_checkpoint
from .pipeline import augment, inter_class_filter, step1_generate
from .runner import run, summarize, write_json
from .shiftlab import (
    GaussianDataSpec,
    VarianceSchedule,
    compare_chains,
    prior_sample,
    run_chain,
    write_trajectory_csv,
)
from .target import (
    CONFIDENCE,
    LABEL,
    DefenseConfig,
    LocalTarget,
    RemoteTarget,
    wrap_with_defense,
)

log = logging.getLogger("synthsteal")


def _cfg(args):
    return load_config(args.config, args.set)


def _seed(args, cfg) -> int:
    return cfg.seeds[0] if args.seed is None else args.seed


def _target(spec: str, mode: str | None = None):
    """Checkpoint path or ``http(s)://`` URL of a running ``serve``."""
    if spec.startswith(("http://", "https://")):
        t = RemoteTarget(spec)
        if mode == CONFIDENCE and t.mode == LABEL:
            raise CapabilityError("remote target only answers hard labels")
        return t
    return LocalTarget.from_checkpoint(spec, mode or CONFIDENCE)


def _emit(doc, out):
    text = json.dumps(doc, indent=2, sort_keys=True)
    if out:
        Path(out).write_text(text + "\n", encoding="utf-8")
    else:
        print(text)


def _trial(cfg, seed, data_dir) -> ex.Trial:
    d = Path(data_dir)
    C = cfg.problem.n_classes
    return ex.Trial(seed, ex.problem_spec(cfg, seed), load_csv(d / "train.csv", C),
                    load_csv(d / "members.csv", C), load_csv(d / "nonmembers.csv", C))


# ---------------------------------------------------------------- stages


def cmd_make_problem(args):
    cfg = _cfg(args)
    seed = _seed(args, cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    train, members, nonmembers = make_problem(ex.problem_spec(cfg, seed))
    for name, ds in (("train", train), ("members", members), ("nonmembers", nonmembers)):
        save_csv(ds, out / f"{name}.csv")
    print(f"wrote train/members/nonmembers ({len(train)}/{len(members)}/{len(nonmembers)}) to {out}")


def cmd_train_target(args):
    cfg = _cfg(args)
    train = load_csv(args.train, cfg.problem.n_classes)
    model = ex.train_target(cfg, train, _seed(args, cfg))
    save_checkpoint(args.out, model.spec_, model.params_)
    print(f"train accuracy {model.score(train.X, train.y):.4f}; checkpoint {args.out}")


def cmd_gen(args):
    cfg = _cfg(args)
    seed = _seed(args, cfg)
    target = _target(args.target, args.mode)
    trial = ex.Trial(seed, ex.problem_spec(cfg, seed), None, None, None)
    D_a, rep = step1_generate(target, ex.make_generator(cfg, trial), ex.pipeline_config(cfg, seed))
    save_csv(D_a, args.out)
    print(f"kept {rep.kept} samples, discarded {rep.discarded}; {target.query_count} queries")


def cmd_augment(args):
    cfg = _cfg(args)
    target = _target(args.target, args.mode)
    D_a = load_csv(args.input, cfg.problem.n_classes)
    D_aux, rep = augment(target, D_a, ex.pipeline_config(cfg, _seed(args, cfg)))
    save_csv(D_aux, args.out)
    print(f"added {rep.points_added} points; {target.query_count} queries")


def cmd_filter(args):
    cfg = _cfg(args)
    target = _target(args.target, CONFIDENCE)
    D_aux = load_csv(args.input, cfg.problem.n_classes)
    s = cfg.pipeline
    D_hat, rep = inter_class_filter(target, D_aux, s.filter_sigma, s.filter_one_sided)
    save_csv(D_hat, args.out)
    if args.report:
        write_json(args.report, rep.to_dict())
    print(f"removed {len(rep.removed)} of {len(D_aux)} points")


def cmd_attack(args):
    cfg = _cfg(args)
    seed = _seed(args, cfg)
    trial = _trial(cfg, seed, args.data)
    aux = load_csv(args.aux, cfg.problem.n_classes)
    mode = CONFIDENCE if args.kind in ("extract", "mi", "invert") else args.mode
    target = _target(args.target, mode)
    if args.kind == "extract":
        doc = ex.run_extraction(cfg, target, aux, trial).report.to_dict()
    elif args.kind == "mi":
        doc = ex.run_mi(cfg, target, aux, trial).to_dict()
    elif args.kind == "mi-label-only":
        doc = ex.run_mi_label_only(cfg, target, aux, trial).to_dict()
    elif args.kind == "invert":
        rep, recon = ex.run_inversion(cfg, target, aux, trial, return_reconstructions=True)
        doc = rep.to_dict()
        if args.reconstructions:
            save_csv(Dataset(recon, trial.nonmembers.y, cfg.problem.n_classes), args.reconstructions)
    else:
        doc = ex.run_label_only_inversion(target, aux, trial)
    doc["query_count"] = target.query_count
    _emit(doc, args.out)


def cmd_defense_eval(args):
    cfg = _cfg(args)
    seeds = [args.seed] if args.seed is not None else cfg.seeds
    rows = []
    for seed in seeds:
        trial = ex.setup_trial(cfg, seed)
        plain, _ = ex.run_attacks(cfg, ex.make_target(trial, cfg), trial)
        defended, _ = ex.run_attacks(cfg, ex.make_target(trial, cfg, defended=True), trial)
        rows.append({"seed": seed, "undefended": plain, "defended": defended})
    _emit({"schema": 1, "noise_variance": cfg.defense.noise_variance, "seeds": rows}, args.out)


def cmd_shiftlab(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.what == "chains":
        sched = VarianceSchedule.linear(args.steps, args.alpha_start, args.alpha_end)
        data = GaussianDataSpec(np.full(args.dim, args.mean), args.std)
        rows = compare_chains(data, sched, args.chains, range(args.seeds))
        for stochastic in (False, True):
            rng = np.random.default_rng(0)
            x_T = prior_sample(args.chains, sched, data, rng)
            _, traj = run_chain(x_T, sched, data, stochastic, rng, trajectory=True)
            write_trajectory_csv(traj, out / f"trajectory_{'stochastic' if stochastic else 'deterministic'}.csv")
        doc = {
            "alpha_bar_T": float(sched.alpha_bars[-1]),
            "seeds": [{**vars(r), "inflated": r.inflated} for r in rows],
        }
        write_json(out / "chains.json", doc)
        print(f"variance inflated on {sum(r.inflated for r in rows)}/{len(rows)} seeds")
    else:
        cfg = _cfg(args)
        seeds = [args.seed] if args.seed is not None else cfg.seeds
        pairs = []
        for seed in seeds:
            trial = ex.setup_trial(cfg, seed)
            target = ex.make_target(trial, cfg)
            aux = ex.build_aux(cfg, target, ex.make_generator(cfg, trial), seed, do_filter=True)
            pairs.append({"seed": seed, **ex.kl_pair(cfg, target, trial, aux)})
        ordered = sum(p["kl_filtered"] <= p["kl_unfiltered"] for p in pairs)
        write_json(out / "kl.json", {"seeds": pairs, "fraction_ordered": ordered / len(pairs)})
        print(f"filtered KL <= unfiltered KL on {ordered}/{len(pairs)} seeds")


def cmd_serve(args):
    from .server import make_server

    target = LocalTarget.from_checkpoint(args.checkpoint, args.mode)
    if args.defense_variance is not None:
        target = wrap_with_defense(target, DefenseConfig(0.0, args.defense_variance, args.defense_seed))
    server = make_server(target, args.host, args.port)
    print(f"serving {target.meta()} at {server.url}", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()


def cmd_report(args):
    _emit(summarize(args.run_dir), args.out)


def cmd_run(args):
    cfg = _cfg(args)
    if args.seed is not None:
        cfg.seeds = [args.seed]
    manifest = run(cfg, args.out)
    print(f"{manifest.status}: {len(manifest.artifacts)} artifacts in {args.out or cfg.output_dir}")


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML experiment config")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config key, e.g. pipeline.delta0=0.3 (repeatable)")
    common.add_argument("--seed", type=int, help="run seed (default: first configured seed)")
    common.add_argument("-v", "--verbose", action="store_true")

    def target_args(p, mode=True):
        p.add_argument("--target", required=True, help="checkpoint path or http:// URL")
        if mode:
            p.add_argument("--mode", choices=(CONFIDENCE, LABEL), default=None)

    parser = argparse.ArgumentParser(prog="synthsteal", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"synthsteal {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("make-problem", parents=[common], help="draw the Gaussian benchmark")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_make_problem)

    p = sub.add_parser("train-target", parents=[common], help="train the victim model")
    p.add_argument("--train", required=True, help="training CSV")
    p.add_argument("--out", required=True, help="checkpoint JSON")
    p.set_defaults(func=cmd_train_target)

    p = sub.add_parser("gen", parents=[common], help="step 1: generate and keep target-agreeing samples")
    target_args(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("augment", parents=[common], help="step 2: decision-boundary augmentation")
    target_args(p)
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("filter", parents=[common], help="step 3: inter-class outlier filter")
    target_args(p, mode=False)
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--report", help="write the filter report JSON here")
    p.set_defaults(func=cmd_filter)

    p = sub.add_parser("attack", parents=[common], help="run one attack on auxiliary data")
    p.add_argument("kind", choices=ATTACKS)
    target_args(p)
    p.add_argument("--aux", required=True, help="auxiliary dataset CSV")
    p.add_argument("--data", required=True, help="directory from make-problem (evaluation sets)")
    p.add_argument("--reconstructions", help="invert: also write reconstructions CSV")
    p.add_argument("--out", help="report JSON (default: stdout)")
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("defense-eval", parents=[common], help="attacks with and without output noise")
    p.add_argument("--out")
    p.set_defaults(func=cmd_defense_eval)

    p = sub.add_parser("shiftlab", parents=[common], help="toy diffusion and filtering KL checks")
    p.add_argument("what", choices=("chains", "kl"))
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--steps", type=int, default=100)
    p.add_argument("--alpha-start", type=float, default=0.9999)
    p.add_argument("--alpha-end", type=float, default=0.9)
    p.add_argument("--mean", type=float, default=3.0)
    p.add_argument("--std", type=float, default=0.5)
    p.add_argument("--dim", type=int, default=1)
    p.add_argument("--chains", type=int, default=10_000)
    p.add_argument("--seeds", type=int, default=5, help="number of chain seeds")
    p.set_defaults(func=cmd_shiftlab)

    p = sub.add_parser("serve", parents=[common], help="expose a checkpoint over HTTP")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--mode", choices=(CONFIDENCE, LABEL), default=CONFIDENCE)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--defense-variance", type=float, help="add Gaussian output noise")
    p.add_argument("--defense-seed", type=int, default=0)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("report", parents=[common], help="seed-averaged summary of a run directory")
    p.add_argument("run_dir")
    p.add_argument("--out")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("run", parents=[common], help="full pipeline with manifest")
    p.add_argument("--out", help="output directory (default: config output_dir)")
    p.set_defaults(func=cmd_run)
    return parser


EXIT_CODES = ((ConfigError, 2), (InputError, 2), (CapabilityError, 3), (TransportError, 4))


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except SynthStealError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return next((code for cls, code in EXIT_CODES if isinstance(exc, cls)), 1)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
