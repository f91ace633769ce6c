"""Desk-scale HAR datasets built from the procedural generator."""
from __future__ import annotations

import numpy as np

from ..imu_sim import SimOptions, simulate_imu
from ..seeds import derive_seed, hash64, rng as make_rng
from ..skeleton import JOINT_NAMES
from ..synth.generator import LABEL_PHRASES, ProceduralGenerator, default_prompts
from .dataset import HarDataset, HarRecord

# typical body-worn sensor sites
WEARABLE_SITES = ("left_wrist", "right_wrist", "left_ankle", "right_ankle", "pelvis", "head",
                  "left_elbow", "right_elbow", "left_knee", "right_knee", "spine3")


def pick_observed_joints(n: int, seed: int, sites=WEARABLE_SITES) -> tuple:
    g = make_rng(seed)
    picked = g.choice(len(sites), size=n, replace=False)
    return tuple(sorted((sites[i] for i in picked), key=JOINT_NAMES.index))


def build_har_dataset(name: str, families, n_train: int, n_test: int, observed_joints=None, n_observed: int = 4,
                      seed: int = 0, generator=None, sim_options: SimOptions | None = None,
                      prompts_per_family: int = 4) -> HarDataset:
    """``n_train`` + ``n_test`` simulated recordings per family, restricted to a joint subset."""
    generator = generator or ProceduralGenerator(tag=f"har-{name}")
    if observed_joints is None:
        observed_joints = pick_observed_joints(n_observed, derive_seed(seed, name, "joints"))
    idx = [JOINT_NAMES.index(j) for j in observed_joints]
    prompts = default_prompts(prompts_per_family, derive_seed(seed, name, "prompts"), families)
    records, train, test = {}, [], []
    counter = 0
    for fam in families:
        fam_prompts = [p for p in prompts if p.family == fam]
        for i in range(n_train + n_test):
            spec = fam_prompts[i % len(fam_prompts)]
            motion, _ = generator.sample(spec, hash64(derive_seed(seed, name), counter))
            imu = simulate_imu(motion, opts=sim_options)
            rid = f"{name}-{counter:06d}"
            records[rid] = HarRecord(rid, fam, np.asarray(imu.frames[:, idx], float))
            (train if i < n_train else test).append(rid)
            counter += 1
    label_texts = {f: LABEL_PHRASES[f] for f in families}
    return HarDataset(name, records, tuple(families), label_texts, {"train": train, "test": test},
                      tuple(observed_joints), generator.frame_rate, {"seed": seed})
