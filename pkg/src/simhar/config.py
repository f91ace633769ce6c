"""Experiment configuration: one JSON document, strictly validated, content-addressed."""
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .encoder.model import EncoderConfig
from .errors import ConfigError
from .har.evaluate import SHOTS
from .imu_sim import SimOptions
from .synth.generator import FAMILIES

PROTOCOLS = ("mixing", "synth_scaling", "real_subsampling")


def _strict(cls, obj, section: str):
    if not isinstance(obj, dict):
        raise ConfigError(f"section {section!r} must be a JSON object")
    names = {f.name for f in fields(cls)}
    unknown = set(obj) - names
    if unknown:
        raise ConfigError(f"unknown keys in {section!r}: {sorted(unknown)}")
    try:
        return cls(**obj)
    except TypeError as exc:
        raise ConfigError(f"{section}: {exc}") from exc


def _listify(obj):
    if isinstance(obj, dict):
        return {k: _listify(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_listify(v) for v in obj]
    return obj


@dataclass(frozen=True)
class GeneratorSpec:
    tag: str
    style_noise: float = 0.0

    def __post_init__(self):
        if not self.tag or "/" in self.tag:
            raise ConfigError(f"bad generator tag {self.tag!r}")
        if self.style_noise < 0:
            raise ConfigError("style_noise must be non-negative")


@dataclass(frozen=True)
class GeneratorSection:
    """The procedural corpora: a captioned "real" proxy and one synthetic corpus per generator."""

    families: tuple = FAMILIES
    frame_rate: float = 30.0
    K: int = 1
    duration_jitter: tuple = (1.0, 1.0)
    text_sampling: str = "with_replacement"
    real_size: int = 24660
    real_style_noise: float = 0.0
    generators: tuple = (GeneratorSpec("proc-a", 0.05), GeneratorSpec("proc-b", 0.10), GeneratorSpec("proc-c", 0.15))

    def __post_init__(self):
        object.__setattr__(self, "families", tuple(self.families))
        object.__setattr__(self, "duration_jitter", tuple(self.duration_jitter))
        gens = tuple(g if isinstance(g, GeneratorSpec) else _strict(GeneratorSpec, g, "generator.generators")
                     for g in self.generators)
        object.__setattr__(self, "generators", gens)
        tags = [g.tag for g in gens]
        if len(set(tags)) != len(tags) or "real" in tags:
            raise ConfigError(f"generator tags must be unique and not 'real': {tags}")
        if self.real_size < 1:
            raise ConfigError("real_size must be >= 1")
        if not self.families:
            raise ConfigError("need at least one family")


@dataclass(frozen=True)
class SimulationSection:
    gravity: tuple = (0.0, 0.0, -9.81)
    up_reference: tuple = (0.0, 0.0, 1.0)
    include_gravity: bool = True

    def options(self) -> SimOptions:
        return SimOptions(tuple(self.gravity), tuple(self.up_reference), bool(self.include_gravity))

    def __post_init__(self):
        object.__setattr__(self, "gravity", tuple(float(v) for v in self.gravity))
        object.__setattr__(self, "up_reference", tuple(float(v) for v in self.up_reference))
        try:
            self.options()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc


@dataclass(frozen=True)
class EvalSection:
    """Desk-scale HAR benchmark: ``n_datasets`` simulated datasets with random sensor subsets."""

    n_datasets: int = 3
    families: tuple = FAMILIES
    train_per_class: int = 10
    test_per_class: int = 50
    n_observed: int = 4
    observed_joints: tuple | None = None
    shots: tuple = SHOTS
    seeds: tuple = (0,)
    finetune_epochs: int = 50
    finetune_learning_rate: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "families", tuple(self.families))
        object.__setattr__(self, "shots", tuple(int(s) for s in self.shots))
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        if self.observed_joints is not None:
            object.__setattr__(self, "observed_joints", tuple(self.observed_joints))
        if self.n_datasets < 1 or self.test_per_class < 1 or self.train_per_class < 0:
            raise ConfigError("eval needs >= 1 dataset and >= 1 test example per class")
        if len(self.families) < 2:
            raise ConfigError("eval needs at least 2 classes")
        if not self.seeds:
            raise ConfigError("eval needs at least one seed")


@dataclass(frozen=True)
class ExperimentSection:
    protocol: str = "mixing"
    total: int | None = None  # mixing pool size; defaults to generator.real_size
    real_fraction: float = 0.5
    ratios: tuple = (1, 2, 4, 8)
    fractions: tuple = (0.1, 0.2, 0.4, 0.8)
    seeds: tuple = (0,)

    def __post_init__(self):
        if self.protocol not in PROTOCOLS:
            raise ConfigError(f"protocol must be one of {PROTOCOLS}, got {self.protocol!r}")
        object.__setattr__(self, "ratios", tuple(self.ratios))
        object.__setattr__(self, "fractions", tuple(self.fractions))
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        if not self.seeds:
            raise ConfigError("experiment needs at least one seed")
        if any(not r > 0 for r in self.ratios) or any(not 0 < f <= 1 for f in self.fractions):
            raise ConfigError("ratios must be positive and fractions in (0, 1]")


_SECTIONS = {
    "generator": GeneratorSection,
    "simulation": SimulationSection,
    "pretrain": EncoderConfig,
    "eval": EvalSection,
    "experiment": ExperimentSection,
}


@dataclass(frozen=True)
class ExperimentConfig:
    generator: GeneratorSection = field(default_factory=GeneratorSection)
    simulation: SimulationSection = field(default_factory=SimulationSection)
    pretrain: EncoderConfig = field(default_factory=EncoderConfig)
    eval: EvalSection = field(default_factory=EvalSection)
    experiment: ExperimentSection = field(default_factory=ExperimentSection)
    seed: int = 0
    output_dir: str = "runs"

    @classmethod
    def from_json(cls, obj) -> "ExperimentConfig":
        if not isinstance(obj, dict):
            raise ConfigError("config must be a JSON object")
        unknown = set(obj) - set(_SECTIONS) - {"seed", "output_dir"}
        if unknown:
            raise ConfigError(f"unknown top-level config keys: {sorted(unknown)}")
        kw = {name: _strict(sec, obj.get(name, {}), name) for name, sec in _SECTIONS.items()}
        seed = obj.get("seed", 0)
        if not isinstance(seed, int) or isinstance(seed, bool) or not 0 <= seed < 2**64:
            raise ConfigError(f"seed must be an unsigned 64-bit integer, got {seed!r}")
        return cls(seed=seed, output_dir=str(obj.get("output_dir", "runs")), **kw)

    def to_json(self) -> dict:
        out = {name: _listify(asdict(getattr(self, name))) for name in _SECTIONS}
        out["seed"] = self.seed
        out["output_dir"] = self.output_dir
        return out

    def canonical_bytes(self) -> bytes:
        return (json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n").encode("utf-8")

    @property
    def digest(self) -> str:
        return hashlib.sha256(self.canonical_bytes()).hexdigest()[:16]

    def replace(self, **changes) -> "ExperimentConfig":
        obj = self.to_json()
        for key, value in changes.items():
            if "." in key:
                sec, name = key.split(".", 1)
                obj[sec][name] = value
            else:
                obj[key] = value
        return ExperimentConfig.from_json(obj)


def load_config(path=None) -> ExperimentConfig:
    if path is None:
        return ExperimentConfig()
    try:
        obj = json.loads(Path(path).read_text("utf-8"))
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
    return ExperimentConfig.from_json(obj)
