"""End-to-end orchestration: corpora, IMU simulation, pretraining runs, evaluation, protocol summaries."""
from __future__ import annotations

import csv
import io
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

from . import __version__
from .config import ExperimentConfig
from .encoder.checkpoint import save_checkpoint, write_loss_log
from .encoder.train import PairedCorpus, pretrain
from .errors import ConfigError
from .formats import DatasetManifest, _atomic_write, read_motion, write_imu, write_manifest
from .har.build import build_har_dataset
from .har.dataset import HarDataset
from .har.evaluate import EvalReport, evaluate, shot_column
from .imu_sim import SimOptions, simulate_imu
from .seeds import derive_seed
from .synth.dataset import GenerationConfig, generate_dataset, mix_datasets, subsample
from .synth.generator import ProceduralGenerator, PromptSpec, default_prompts

log = logging.getLogger(__name__)


def prompt_pool(n: int, families, seed: int) -> list[PromptSpec]:
    """``n`` prompts cycling through ``families`` so any prefix stays class-balanced."""
    per_family = math.ceil(n / len(families))
    prompts = default_prompts(per_family, seed, families)
    by_family = [prompts[i * per_family:(i + 1) * per_family] for i in range(len(families))]
    return [by_family[i % len(families)][i // len(families)] for i in range(n)]


def _simulate_one(args):
    src, dst, opts = args
    write_imu(dst, simulate_imu(read_motion(src), opts=opts))


def simulate_manifest(manifest: DatasetManifest, out_dir, opts: SimOptions | None = None, jobs: int = 1,
                      manifest_name: str = "manifest.jsonl") -> DatasetManifest:
    """Simulate every motion record and write a manifest whose records point at ISEQ files."""
    out_dir = Path(out_dir)
    work, records = [], []
    for rec in manifest.records:
        if rec.motion_ref is None:
            raise ConfigError(f"record {rec.id!r} has no motion_ref")
        dst = (out_dir / "imu" / f"{rec.id}.iseq").resolve()
        work.append((manifest.resolve(rec), dst, opts))
        records.append(rec.replace(motion_ref=None, imu_ref=str(dst)))
    if jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(jobs) as pool:
            list(pool.map(_simulate_one, work, chunksize=max(1, len(work) // (4 * jobs))))
    else:
        for w in work:
            _simulate_one(w)
    opts = opts or SimOptions()
    metadata = {**manifest.metadata, "simulation": {"gravity": list(opts.gravity),
                                                    "up_reference": list(opts.up_reference),
                                                    "include_gravity": opts.include_gravity}}
    out = DatasetManifest(records, metadata, root=out_dir.resolve())
    write_manifest(out_dir / manifest_name, out)
    return out


def _generation(cfg: ExperimentConfig, seed: int, ratio: float = 1.0) -> GenerationConfig:
    g = cfg.generator
    return GenerationConfig(K=g.K, seed=seed, frame_rate=g.frame_rate, volume_ratio=ratio,
                            duration_jitter=g.duration_jitter, text_sampling=g.text_sampling)


def _prompts(cfg: ExperimentConfig) -> list[PromptSpec]:
    return prompt_pool(cfg.generator.real_size, cfg.generator.families, derive_seed(cfg.seed, "prompts"))


def build_real_corpus(cfg: ExperimentConfig, out_dir, jobs: int = 1) -> DatasetManifest:
    """Captioned stand-in for the real corpus: every record keeps all paraphrases of its prompt."""
    out_dir = Path(out_dir)
    gen = ProceduralGenerator("real", cfg.generator.frame_rate, cfg.generator.real_style_noise)
    motions = generate_dataset(_prompts(cfg), _generation(cfg, derive_seed(cfg.seed, "real")), out_dir / "motion",
                               gen, source="real", all_texts=True, jobs=jobs)
    return simulate_manifest(motions, out_dir, cfg.simulation.options(), jobs)


def build_synthetic_corpus(cfg: ExperimentConfig, tag: str, out_dir, ratio: float = 1.0,
                           jobs: int = 1) -> DatasetManifest:
    spec = {g.tag: g for g in cfg.generator.generators}.get(tag)
    if spec is None:
        raise ConfigError(f"unknown generator tag {tag!r}")
    out_dir = Path(out_dir)
    gen = ProceduralGenerator(tag, cfg.generator.frame_rate, spec.style_noise)
    motions = generate_dataset(_prompts(cfg), _generation(cfg, derive_seed(cfg.seed, "synthetic", tag), ratio),
                               out_dir / "motion", gen, jobs=jobs)
    return simulate_manifest(motions, out_dir, cfg.simulation.options(), jobs)


def build_benchmark(cfg: ExperimentConfig, out_dir=None) -> list[HarDataset]:
    ev = cfg.eval
    gen = ProceduralGenerator("har", cfg.generator.frame_rate, cfg.generator.real_style_noise)
    datasets = []
    for i in range(ev.n_datasets):
        ds = build_har_dataset(f"har-{i}", ev.families, ev.train_per_class, ev.test_per_class,
                               observed_joints=ev.observed_joints, n_observed=ev.n_observed,
                               seed=derive_seed(cfg.seed, "har"), generator=gen,
                               sim_options=cfg.simulation.options())
        if out_dir is not None:
            ds.save(Path(out_dir) / ds.name)
        datasets.append(ds)
    return datasets


def load_benchmark(directory) -> list[HarDataset]:
    dirs = sorted(p.parent for p in Path(directory).glob("*/dataset.json"))
    if not dirs:
        raise ConfigError(f"no HAR datasets under {directory}")
    return [HarDataset.load(d) for d in dirs]


def pretrain_seed(cfg: ExperimentConfig, seed: int) -> int:
    return derive_seed(cfg.seed, "pretrain", seed) % 2**32


def run_pretraining(cfg: ExperimentConfig, manifest: DatasetManifest, run_dir, seed: int = 0):
    run_dir = Path(run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    write_manifest(run_dir / "pretrain_manifest.jsonl", manifest)
    enc_cfg = replace(cfg.pretrain, seed=pretrain_seed(cfg, seed))
    state, history = pretrain(enc_cfg, PairedCorpus.from_manifest(manifest))
    save_checkpoint(run_dir / "checkpoint.enc1", state)
    write_loss_log(run_dir / "loss.csv", history)
    return state, history


def finetune_kwargs(cfg: ExperimentConfig) -> dict:
    kw = {"epochs": cfg.eval.finetune_epochs}
    if cfg.eval.finetune_learning_rate is not None:
        kw["learning_rate"] = cfg.eval.finetune_learning_rate
    return kw


def run_evaluation(cfg: ExperimentConfig, state, datasets, label: str = "", out_dir=None) -> EvalReport:
    report = evaluate(state, datasets, cfg.eval.shots, cfg.eval.seeds, finetune_kwargs(cfg), cfg.digest, label)
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        _atomic_write(out_dir / "report.json", report.dumps().encode())
        _atomic_write(out_dir / "report.csv", report.table_csv().encode())
    return report


# --------------------------------------------------------------------------
# protocols


def plan_runs(cfg: ExperimentConfig) -> list[dict]:
    """The pretraining configurations a protocol produces, each as ``{label, kind, ...}``."""
    ex, g = cfg.experiment, cfg.generator
    tags = [s.tag for s in g.generators]
    if ex.protocol == "mixing":
        total = ex.total if ex.total is not None else g.real_size
        runs = [{"label": "real", "kind": "mix", "tag": None, "real_fraction": 1.0, "total": total}]
        runs += [{"label": f"synthetic-{t}", "kind": "mix", "tag": t, "real_fraction": 0.0, "total": total}
                 for t in tags]
        runs += [{"label": f"mixed-{t}", "kind": "mix", "tag": t, "real_fraction": ex.real_fraction,
                  "total": total} for t in tags]
        return runs
    if ex.protocol == "synth_scaling":
        runs = [{"label": "real", "kind": "real", "volume": g.real_size}]
        for t in tags:
            for r in ex.ratios:
                runs.append({"label": f"{t}-x{r:g}", "kind": "synthetic", "tag": t, "ratio": r,
                             "volume": int(round(r * g.real_size * g.K))})
        return runs
    return [{"label": f"real-{f:g}", "kind": "subsample", "fraction": f} for f in ex.fractions]


def _prefix(manifest: DatasetManifest, n: int, ratio) -> DatasetManifest:
    return DatasetManifest(manifest.records[:n], {**manifest.metadata, "volume_ratio": ratio}, manifest.root)


def prepare_corpora(cfg: ExperimentConfig, base: Path, jobs: int = 1) -> dict:
    """Generate and simulate every corpus the protocol needs, keyed by run label."""
    ex, g = cfg.experiment, cfg.generator
    data = base / "data"
    real = build_real_corpus(cfg, data / "real", jobs)
    corpora = {}
    if ex.protocol == "mixing":
        ratio = 1.0 if ex.total is None else max(1.0, ex.total / g.real_size)
        synth = {s.tag: build_synthetic_corpus(cfg, s.tag, data / s.tag, ratio, jobs) for s in g.generators}
        for run in plan_runs(cfg):
            pool = synth[run["tag"]] if run["tag"] else synth[g.generators[0].tag]
            corpora[run["label"]] = mix_datasets(real, pool, run["real_fraction"], run["total"],
                                                 derive_seed(cfg.seed, "mix", run["label"]))
    elif ex.protocol == "synth_scaling":
        corpora["real"] = real
        for s in g.generators:
            # record plans are index-addressed, so each smaller ratio is a prefix of the largest
            full = build_synthetic_corpus(cfg, s.tag, data / s.tag, max(ex.ratios), jobs)
            for run in plan_runs(cfg):
                if run.get("tag") == s.tag:
                    corpora[run["label"]] = _prefix(full, run["volume"], run["ratio"])
    else:
        for run in plan_runs(cfg):
            corpora[run["label"]] = real
    return corpora


def run_experiment(cfg: ExperimentConfig, base, jobs: int = 1) -> dict:
    """Run the configured protocol; returns ``{(label, seed): EvalReport}`` and writes summaries."""
    base = Path(base)
    corpora = prepare_corpora(cfg, base, jobs)
    datasets = build_benchmark(cfg, base / "har")
    reports = {}
    for run in plan_runs(cfg):
        for s in cfg.experiment.seeds:
            manifest = corpora[run["label"]]
            if run["kind"] == "subsample":
                manifest = subsample(manifest, run["fraction"],
                                     derive_seed(cfg.seed, "subsample", run["fraction"], s))
            run_dir = base / "runs" / run["label"] / f"seed-{s}"
            log.info("pretraining %s seed %d on %d records", run["label"], s, len(manifest))
            state, _ = run_pretraining(cfg, manifest, run_dir, s)
            reports[run["label"], s] = run_evaluation(cfg, state, datasets, run["label"], run_dir)
    write_summaries(cfg, base, reports)
    return reports


def summary_csv(reports: dict, shots) -> str:
    """Table layout: one row per configuration, seed-averaged mean macro-F1 per shot column."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["method"] + [shot_column(k) for k in shots])
    labels = list(dict.fromkeys(label for label, _ in reports))
    for label in labels:
        reps = [r for (lab, _), r in reports.items() if lab == label]
        w.writerow([label] + [f"{math.fsum(r.mean[k] for r in reps) / len(reps):.4f}" for k in shots])
    return buf.getvalue()


def plot_csv(cfg: ExperimentConfig, reports: dict) -> str:
    """Long format for volume curves: x = pretraining records, per-seed columns for error shading."""
    runs = {r["label"]: r for r in plan_runs(cfg)}
    seeds = list(cfg.experiment.seeds)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["method", "volume", "shot", "mean", "stderr"] + [f"seed_{s}" for s in seeds])
    for label, run in runs.items():
        if run["kind"] == "subsample":
            volume = round(run["fraction"] * cfg.generator.real_size)
        else:
            volume = run.get("volume", run.get("total"))
        for k in cfg.eval.shots:
            vals = [reports[label, s].mean[k] for s in seeds if (label, s) in reports]
            if not vals:
                continue
            mean = math.fsum(vals) / len(vals)
            se = (math.sqrt(math.fsum((v - mean) ** 2 for v in vals) / (len(vals) - 1) / len(vals))
                  if len(vals) > 1 else 0.0)
            w.writerow([label, volume, shot_column(k), f"{mean:.6f}", f"{se:.6f}"] + [f"{v:.6f}" for v in vals])
    return buf.getvalue()


def write_summaries(cfg: ExperimentConfig, base, reports: dict) -> None:
    base = Path(base)
    _atomic_write(base / "summary.csv", summary_csv(reports, cfg.eval.shots).encode())
    _atomic_write(base / "plot.csv", plot_csv(cfg, reports).encode())


def collect_reports(base) -> dict:
    reports = {}
    for path in sorted(Path(base).glob("runs/*/seed-*/report.json")):
        rep = EvalReport.from_json(json.loads(path.read_text("utf-8")))
        reports[rep.label or path.parent.parent.name, int(path.parent.name.split("-", 1)[1])] = rep
    return reports


def prepare_output(cfg: ExperimentConfig, out) -> Path:
    """``<out>/<digest>/`` holding the exact config and tool version."""
    base = Path(out) / cfg.digest
    base.mkdir(parents=True, exist_ok=True)
    _atomic_write(base / "config.json", cfg.canonical_bytes())
    _atomic_write(base / "VERSION", f"{__version__}\n".encode())
    return base
