"""Dataset-level synthesis: K samples per prompt, volume scaling, mixing, subsampling."""
from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .. import __version__
from ..errors import ConfigError, EmptyResult, InsufficientRecords
from ..formats import DatasetManifest, TextMotionRecord, write_manifest, write_motion
from ..seeds import derive_seed, hash64, rng, round_half_away
from .generator import ProceduralGenerator, PromptSpec

log = logging.getLogger(__name__)

TEXT_SAMPLING = ("with_replacement", "without_replacement")


@dataclass(frozen=True)
class GenerationConfig:
    K: int = 1
    seed: int = 0
    frame_rate: float = 30.0
    volume_ratio: float = 1.0
    duration_jitter: tuple = (1.0, 1.0)
    text_sampling: str = "with_replacement"

    def __post_init__(self):
        if int(self.K) != self.K or self.K < 1:
            raise ConfigError(f"K must be a positive integer, got {self.K}")
        if not self.frame_rate > 0:
            raise ConfigError(f"frame_rate must be positive, got {self.frame_rate}")
        if not self.volume_ratio > 0:
            raise ConfigError(f"volume_ratio must be positive, got {self.volume_ratio}")
        lo, hi = self.duration_jitter
        if not 0 < lo <= hi:
            raise ConfigError(f"duration_jitter must satisfy 0 < lo <= hi, got {self.duration_jitter}")
        if self.text_sampling not in TEXT_SAMPLING:
            raise ConfigError(f"text_sampling must be one of {TEXT_SAMPLING}")
        object.__setattr__(self, "duration_jitter", (float(lo), float(hi)))


@dataclass(frozen=True)
class PlannedRecord:
    index: int
    prompt_index: int
    draw: int  # how many times this prompt was drawn before
    seed: int
    text_index: int | None = None
    duration_scale: float = 1.0


def record_count(n_prompts: int, K: int, volume_ratio: float) -> int:
    return round_half_away(K * n_prompts * volume_ratio)


def plan_records(prompts, cfg: GenerationConfig) -> list[PlannedRecord]:
    """Enumerate every record to generate, pass-major then prompt then sample.

    Fractional volume ratios truncate the final pass to its first prompts.
    """
    n_prompts = len(prompts)
    if n_prompts == 0:
        raise ConfigError("need at least one prompt")
    per_pass = cfg.K * n_prompts
    total = record_count(n_prompts, cfg.K, cfg.volume_ratio)
    perms = {}
    lo, hi = cfg.duration_jitter
    plan = []
    for index in range(total):
        pas, within = divmod(index, per_pass)
        p, k = divmod(within, cfg.K)
        draw = pas * cfg.K + k
        seed = hash64(cfg.seed, index)
        text_index = None
        if cfg.text_sampling == "without_replacement":
            if p not in perms:
                perms[p] = rng(derive_seed(cfg.seed, "texts", p)).permutation(len(prompts[p].texts))
            text_index = int(perms[p][draw % len(perms[p])])
        scale = 1.0 if lo == hi else float(rng(derive_seed(seed, "duration")).uniform(lo, hi))
        plan.append(PlannedRecord(index, p, draw, seed, text_index, scale))
    return plan


def _generate_one(args):
    generator, spec, item, path = args
    motion, text = generator.sample(spec, item.seed, item.text_index, item.duration_scale)
    write_motion(path, motion)
    return text


def generate_dataset(prompts, cfg: GenerationConfig, out_dir, generator=None, source: str = "synthetic",
                     all_texts: bool = False, jobs: int = 1, manifest_name: str = "manifest.jsonl") -> DatasetManifest:
    """Sample ``K * len(prompts) * volume_ratio`` motions, write MSEQ files and a manifest.

    With ``all_texts`` each record keeps every prompt text (the layout of a
    captioned corpus) instead of only the sampled one.
    """
    prompts = list(prompts)
    generator = generator or ProceduralGenerator(frame_rate=cfg.frame_rate)
    out_dir = Path(out_dir)
    plan = plan_records(prompts, cfg)
    paths = [out_dir / "motions" / f"{generator.tag}-{item.index:07d}.mseq" for item in plan]
    work = [(generator, prompts[item.prompt_index], item, path) for item, path in zip(plan, paths)]
    if jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(jobs) as pool:
            texts = list(pool.map(_generate_one, work, chunksize=max(1, len(work) // (4 * jobs))))
    else:
        texts = [_generate_one(w) for w in work]

    records = []
    for item, path, text in zip(plan, paths, texts):
        spec = prompts[item.prompt_index]
        records.append(TextMotionRecord(
            id=f"{generator.tag}-{item.index:07d}",
            texts=spec.texts if all_texts else (text,),
            motion_ref=str(path.resolve()),
            label=spec.family,
            source=source,
            generator_tag=generator.tag,
            seed=item.seed,
            extra={"prompt_id": spec.prompt_id},
        ))
    metadata = {
        "creation_seed": cfg.seed,
        "tool_version": __version__,
        "generator_tag": generator.tag,
        "generation": {**asdict(cfg), "duration_jitter": list(cfg.duration_jitter)},
        "n_prompts": len(prompts),
    }
    manifest = DatasetManifest(records, metadata, root=out_dir.resolve())
    write_manifest(out_dir / manifest_name, manifest)
    log.info("generated %d records with %s into %s", len(records), generator.tag, out_dir)
    return manifest


def _take(manifest: DatasetManifest, n: int, g, name: str):
    if n > len(manifest):
        raise InsufficientRecords(f"{name} manifest has {len(manifest)} records, needs {n} "
                                  f"(short by {n - len(manifest)})")
    idx = g.choice(len(manifest), size=n, replace=False)
    return [manifest.records[i] for i in idx]


def mix_datasets(real: DatasetManifest, synth: DatasetManifest, real_fraction: float, total: int,
                 seed: int) -> DatasetManifest:
    """Fixed-size mixture: ``round(real_fraction * total)`` real records, the rest synthetic, shuffled."""
    if not 0.0 <= real_fraction <= 1.0:
        raise ConfigError(f"real_fraction must lie in [0, 1], got {real_fraction}")
    if total < 0:
        raise ConfigError("total must be non-negative")
    n_real = round_half_away(real_fraction * total)
    n_synth = total - n_real
    g = rng(seed)
    picked = _take(real, n_real, g, "real") + _take(synth, n_synth, g, "synthetic")
    order = g.permutation(len(picked))
    metadata = {"operation": "mix", "real_fraction": real_fraction, "total": total, "seed": seed,
                "n_real": n_real, "n_synthetic": n_synth, "tool_version": __version__}
    return DatasetManifest([picked[i] for i in order], metadata)


def subsample(real: DatasetManifest, fraction: float, seed: int) -> DatasetManifest:
    """Uniform without-replacement subset of ``round(fraction * len(real))`` records."""
    if not 0.0 < fraction <= 1.0:
        raise ConfigError(f"fraction must lie in (0, 1], got {fraction}")
    n = round_half_away(fraction * len(real))
    if n < 1:
        raise EmptyResult(f"fraction {fraction} of {len(real)} records rounds to zero")
    idx = rng(seed).choice(len(real), size=n, replace=False)
    metadata = {"operation": "subsample", "fraction": fraction, "seed": seed, "n": n,
                "tool_version": __version__}
    return DatasetManifest([real.records[i] for i in idx], metadata)
