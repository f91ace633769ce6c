"""Command-line entry point: ``simhar <command> [options]``.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical
failure (non-finite loss or oracle miss).
"""
from __future__ import annotations

import argparse
import contextlib
import json
import logging
import sys
from pathlib import Path

from .config import PROTOCOLS, ExperimentConfig, load_config
from .errors import ConfigError, DataError, NumericalError, OracleMiss, SimharError
from .formats import read_manifest, write_manifest

log = logging.getLogger("simhar")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="experiment config JSON (defaults are used when omitted)")
    p.add_argument("--seed", type=int, help="override the master seed")
    p.add_argument("--out", help="output root; artifacts go under <out>/<config-digest>/")
    p.add_argument("--deterministic", action="store_true", help="force single-threaded numerics")
    p.add_argument("--jobs", type=int, default=1, help="worker processes for generation and simulation")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="simhar", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-synth", help="sample a motion corpus from one generator")
    p.add_argument("--tag", help="generator tag from the config (default: the first)")
    p.add_argument("--real", action="store_true", help="build the captioned real-corpus stand-in instead")
    p.add_argument("--ratio", type=float, default=1.0, help="volume relative to generator.real_size")
    p.add_argument("--prompts", help="JSON list of prompt specs (default: built-in family prompts)")
    p.add_argument("--motion-only", action="store_true", help="skip IMU simulation")

    p = sub.add_parser("simulate-imu", help="simulate IMU channels for a motion manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--name", help="output subdirectory name (default: manifest's directory name)")

    p = sub.add_parser("mix", help="fixed-size real/synthetic mixture")
    p.add_argument("--real", required=True)
    p.add_argument("--synth", required=True)
    p.add_argument("--fraction", type=float, default=0.5, help="real fraction")
    p.add_argument("--total", type=int, required=True)
    p.add_argument("--name", default="mix")

    p = sub.add_parser("subsample", help="uniform subset of a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--fraction", type=float, required=True)
    p.add_argument("--name", default="subsample")

    p = sub.add_parser("pretrain", help="contrastive pretraining on an IMU manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--name", default="pretrain")

    p = sub.add_parser("gen-har", help="build the simulated HAR benchmark datasets")

    p = sub.add_parser("eval", help="0-shot and k-shot evaluation of a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--har", help="directory of HAR datasets (default: build from config)")
    p.add_argument("--name", default="eval")

    p = sub.add_parser("experiment", help="run a full protocol end to end")
    p.add_argument("--protocol", choices=PROTOCOLS)

    p = sub.add_parser("report", help="rebuild summary and plot CSVs from an experiment directory")
    p.add_argument("--dir", help="experiment directory (default: <out>/<config-digest>)")

    p = sub.add_parser("selftest", help="run the analytic oracles")
    p.add_argument("--skip-gradient", action="store_true")

    for p in sub.choices.values():
        _common(p)
    return parser


def _resolve_config(args) -> ExperimentConfig:
    cfg = load_config(args.config)
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if getattr(args, "protocol", None):
        changes["experiment.protocol"] = args.protocol
    return cfg.replace(**changes) if changes else cfg


def _base(cfg, args) -> Path:
    from .experiment import prepare_output
    return prepare_output(cfg, args.out or cfg.output_dir)


def _print(obj) -> None:
    print(json.dumps(obj, indent=2, sort_keys=True))


def cmd_gen_synth(cfg, args):
    from .experiment import build_real_corpus, build_synthetic_corpus, simulate_manifest
    from .synth.dataset import generate_dataset
    from .synth.generator import ProceduralGenerator, PromptSpec
    base = _base(cfg, args)
    if args.prompts:
        try:
            prompts = [PromptSpec.from_json(o) for o in json.loads(Path(args.prompts).read_text("utf-8"))]
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read prompts {args.prompts}: {exc}") from exc
        tag = "real" if args.real else (args.tag or cfg.generator.generators[0].tag)
        noise = {g.tag: g.style_noise for g in cfg.generator.generators}.get(tag, cfg.generator.real_style_noise)
        from .experiment import _generation
        from .seeds import derive_seed
        out = base / "data" / tag
        m = generate_dataset(prompts, _generation(cfg, derive_seed(cfg.seed, "synthetic", tag), args.ratio),
                             out / "motion", ProceduralGenerator(tag, cfg.generator.frame_rate, noise),
                             source="real" if args.real else "synthetic", all_texts=args.real, jobs=args.jobs)
        if not args.motion_only:
            m = simulate_manifest(m, out, cfg.simulation.options(), args.jobs)
        path = out / "manifest.jsonl" if not args.motion_only else out / "motion" / "manifest.jsonl"
    elif args.real:
        m = build_real_corpus(cfg, base / "data" / "real", args.jobs)
        path = base / "data" / "real" / "manifest.jsonl"
    else:
        tag = args.tag or cfg.generator.generators[0].tag
        m = build_synthetic_corpus(cfg, tag, base / "data" / tag, args.ratio, args.jobs)
        path = base / "data" / tag / "manifest.jsonl"
    _print({"manifest": str(path), "records": len(m)})


def cmd_simulate_imu(cfg, args):
    from .experiment import simulate_manifest
    src = Path(args.manifest)
    name = args.name or src.resolve().parent.name
    out = _base(cfg, args) / "imu" / name
    m = simulate_manifest(read_manifest(src), out, cfg.simulation.options(), args.jobs)
    _print({"manifest": str(out / "manifest.jsonl"), "records": len(m)})


def cmd_mix(cfg, args):
    from .seeds import derive_seed
    from .synth.dataset import mix_datasets
    m = mix_datasets(read_manifest(args.real), read_manifest(args.synth), args.fraction, args.total,
                     derive_seed(cfg.seed, "mix", args.name))
    path = _base(cfg, args) / "mix" / args.name / "manifest.jsonl"
    path.parent.mkdir(parents=True, exist_ok=True)
    write_manifest(path, m)
    _print({"manifest": str(path), "records": len(m), "real": m.metadata["n_real"],
            "synthetic": m.metadata["n_synthetic"]})


def cmd_subsample(cfg, args):
    from .seeds import derive_seed
    from .synth.dataset import subsample
    m = subsample(read_manifest(args.manifest), args.fraction, derive_seed(cfg.seed, "subsample", args.name))
    path = _base(cfg, args) / "subsample" / args.name / "manifest.jsonl"
    path.parent.mkdir(parents=True, exist_ok=True)
    write_manifest(path, m)
    _print({"manifest": str(path), "records": len(m)})


def cmd_pretrain(cfg, args):
    from .experiment import run_pretraining
    run_dir = _base(cfg, args) / "pretrain" / args.name
    _, history = run_pretraining(cfg, read_manifest(args.manifest), run_dir)
    _print({"checkpoint": str(run_dir / "checkpoint.enc1"), "loss_log": str(run_dir / "loss.csv"),
            "final_loss": history[-1] if history else None})


def cmd_gen_har(cfg, args):
    from .experiment import build_benchmark
    out = _base(cfg, args) / "har"
    datasets = build_benchmark(cfg, out)
    _print({"har_dir": str(out), "datasets": {d.name: list(d.observed_joints) for d in datasets}})


def cmd_eval(cfg, args):
    from .encoder.checkpoint import load_checkpoint
    from .experiment import build_benchmark, load_benchmark, run_evaluation
    base = _base(cfg, args)
    datasets = load_benchmark(args.har) if args.har else build_benchmark(cfg, base / "har")
    out = base / "eval" / args.name
    report = run_evaluation(cfg, load_checkpoint(args.checkpoint), datasets, args.name, out)
    print(report.table_csv(), end="")


def cmd_experiment(cfg, args):
    from .experiment import run_experiment
    base = _base(cfg, args)
    reports = run_experiment(cfg, base, args.jobs)
    print((base / "summary.csv").read_text("utf-8"), end="")
    log.info("%d reports under %s", len(reports), base)


def cmd_report(cfg, args):
    from .experiment import collect_reports, write_summaries
    base = Path(args.dir) if args.dir else Path(args.out or cfg.output_dir) / cfg.digest
    if args.dir and (base / "config.json").exists():
        cfg = load_config(base / "config.json")
    reports = collect_reports(base)
    if not reports:
        raise DataError(f"no reports under {base}")
    write_summaries(cfg, base, reports)
    print((base / "summary.csv").read_text("utf-8"), end="")


def cmd_selftest(cfg, args):
    from .oracles import run_all
    results = run_all(gradient=not args.skip_gradient)
    for r in results:
        print(r.line())
    failed = [r.name for r in results if not r.passed]
    if failed:
        raise OracleMiss(f"oracle miss: {', '.join(failed)}")


COMMANDS = {
    "gen-synth": cmd_gen_synth, "simulate-imu": cmd_simulate_imu, "mix": cmd_mix, "subsample": cmd_subsample,
    "pretrain": cmd_pretrain, "gen-har": cmd_gen_har, "eval": cmd_eval, "experiment": cmd_experiment,
    "report": cmd_report, "selftest": cmd_selftest,
}


def _limits(deterministic: bool):
    if not deterministic:
        return contextlib.nullcontext()
    from threadpoolctl import threadpool_limits
    return threadpool_limits(limits=1)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _resolve_config(args)
        with _limits(args.deterministic):
            COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 4
    except (DataError, SimharError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
