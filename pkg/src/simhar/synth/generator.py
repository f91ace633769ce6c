"""Procedural text-conditioned motion generator.

A generator maps a prompt to a distribution over motion sequences.  The
shipped implementation draws kinematic parameters for one of eight motion
families and poses the canonical skeleton by forward kinematics, so bone
lengths are preserved by construction.  Any other generator (for example a
learned text-to-motion model) only has to implement :class:`MotionGenerator`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Protocol

import numpy as np

from ..errors import ConfigError, UnknownFamily
from ..seeds import rng as make_rng
from ..sequences import MotionSequence
from ..skeleton import PELVIS_HEIGHT, Skeleton, canonical_skeleton

TEMPLATES = {
    "walk": ("a person walks forward", "someone walks at a steady pace",
             "a person is walking straight ahead", "the person walks around"),
    "arm-raise": ("a person raises both arms", "someone lifts their arms up",
                  "a person raises the arms above the head", "arms are raised to the side"),
    "squat": ("a person squats down", "someone does a squat",
              "a person squats and stands back up", "doing deep squats"),
    "jump": ("a person jumps up and down", "someone jumps in place",
             "a person is jumping", "jumping repeatedly"),
    "wave": ("a person waves with the right hand", "someone waves hello",
             "a person is waving an arm", "waving goodbye"),
    "twist": ("a person twists the torso", "someone twists from side to side",
              "a person rotates the upper body", "twisting at the waist"),
    "sit-down": ("a person sits down", "someone sits down on a chair",
                 "a person lowers to sit", "sitting down slowly"),
    "kick": ("a person kicks with the right leg", "someone kicks forward",
             "a person does a front kick", "kicking a ball"),
}

LABEL_PHRASES = {
    "walk": "a person walks",
    "arm-raise": "a person raises arms",
    "squat": "a person squats",
    "jump": "a person jumps",
    "wave": "a person waves",
    "twist": "a person twists",
    "sit-down": "a person sits down",
    "kick": "a person kicks",
}

FAMILIES = tuple(TEMPLATES)

# amplitude is a family-specific intensity (rad, or m for jump height)
DEFAULT_RANGES = {
    "walk": {"amplitude": (0.35, 0.6), "frequency": (0.8, 1.1), "duration": (4.5, 7.0), "speed": (0.8, 1.6)},
    "arm-raise": {"amplitude": (1.4, 2.6), "frequency": (0.3, 0.6), "duration": (4.5, 7.0), "speed": (0.0, 0.0)},
    "squat": {"amplitude": (0.7, 1.3), "frequency": (0.25, 0.5), "duration": (4.5, 7.0), "speed": (0.0, 0.0)},
    "jump": {"amplitude": (0.12, 0.35), "frequency": (0.9, 1.4), "duration": (4.5, 7.0), "speed": (0.0, 0.0)},
    "wave": {"amplitude": (0.4, 0.8), "frequency": (1.2, 2.2), "duration": (4.5, 7.0), "speed": (0.0, 0.0)},
    "twist": {"amplitude": (0.5, 1.1), "frequency": (0.4, 0.8), "duration": (4.5, 7.0), "speed": (0.0, 0.0)},
    "sit-down": {"amplitude": (0.85, 1.1), "frequency": (0.1, 0.2), "duration": (4.5, 7.0), "speed": (0.0, 0.0)},
    "kick": {"amplitude": (0.8, 1.4), "frequency": (0.4, 0.8), "duration": (4.5, 7.0), "speed": (0.0, 0.0)},
}

PARAM_NAMES = ("amplitude", "frequency", "duration", "speed")


@dataclass(frozen=True)
class PromptSpec:
    prompt_id: str
    texts: tuple
    family: str
    params_range: dict = field(default_factory=dict, hash=False)

    def __post_init__(self):
        texts = tuple(self.texts)
        if not texts:
            raise ConfigError(f"prompt {self.prompt_id!r} has no texts")
        object.__setattr__(self, "texts", texts)
        ranges = dict(DEFAULT_RANGES.get(self.family, {}))
        ranges.update({k: tuple(v) for k, v in (self.params_range or {}).items()})
        for name, bounds in ranges.items():
            lo, hi = bounds
            if not (math.isfinite(lo) and math.isfinite(hi) and lo <= hi):
                raise ConfigError(f"prompt {self.prompt_id!r}: bad range {name}={bounds}")
        if ranges.get("duration", (1, 1))[0] <= 0:
            raise ConfigError(f"prompt {self.prompt_id!r}: duration must be positive")
        object.__setattr__(self, "params_range", ranges)

    def to_json(self) -> dict:
        return {"prompt_id": self.prompt_id, "texts": list(self.texts), "family": self.family,
                "params_range": {k: list(v) for k, v in self.params_range.items()}}

    @classmethod
    def from_json(cls, obj) -> "PromptSpec":
        unknown = set(obj) - {"prompt_id", "texts", "family", "params_range"}
        if unknown:
            raise ConfigError(f"unknown prompt fields: {sorted(unknown)}")
        return cls(obj["prompt_id"], obj["texts"], obj["family"], obj.get("params_range", {}))


class MotionGenerator(Protocol):
    tag: str

    def sample(self, spec: PromptSpec, seed: int, text_index: int | None = None) -> tuple[MotionSequence, str]:
        ...


# --------------------------------------------------------------------------
# kinematics

def _axis_rotation(angle: np.ndarray, axis: int) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    m = np.zeros(angle.shape + (3, 3))
    i, j = [(1, 2), (2, 0), (0, 1)][axis]
    m[..., axis, axis] = 1.0
    m[..., i, i] = c
    m[..., j, j] = c
    m[..., i, j] = -s
    m[..., j, i] = s
    return m


def euler_to_matrix(angles: np.ndarray) -> np.ndarray:
    """``(..., 3)`` angles about x, y, z -> ``Rz @ Rx @ Ry`` (y applied first)."""
    rx = _axis_rotation(angles[..., 0], 0)
    ry = _axis_rotation(angles[..., 1], 1)
    rz = _axis_rotation(angles[..., 2], 2)
    return rz @ rx @ ry


def forward_kinematics(skel: Skeleton, root_pos: np.ndarray, local_rot: np.ndarray,
                       root_rot: np.ndarray | None = None) -> np.ndarray:
    """Joint positions ``(T, 24, 3)`` from root path and parent-relative rotations ``(T, 24, 3, 3)``."""
    T = root_pos.shape[0]
    offsets = skel.rest_offsets
    glob = np.empty((T, skel.joint_count, 3, 3))
    pos = np.empty((T, skel.joint_count, 3))
    for j in skel.topological_order():
        p = skel.parent[j]
        if p < 0:
            base = np.eye(3) if root_rot is None else root_rot
            glob[:, j] = base @ local_rot[:, j]
            pos[:, j] = root_pos
        else:
            glob[:, j] = glob[:, p] @ local_rot[:, j]
            pos[:, j] = pos[:, p] + glob[:, p] @ offsets[j]
    return pos


J = {name: i for i, name in enumerate(canonical_skeleton().joint_names)}
X, Y, Z = 0, 1, 2
ARM_DOWN = 1.25


def _rest_posture(T):
    ang = np.zeros((T, 24, 3))
    ang[:, J["left_shoulder"], Y] = ARM_DOWN
    ang[:, J["right_shoulder"], Y] = -ARM_DOWN
    ang[:, J["left_elbow"], Y] = 0.15
    ang[:, J["right_elbow"], Y] = -0.15
    return ang


def _bump(t, f, phase):
    return 0.5 * (1.0 - np.cos(2 * np.pi * f * t + phase))


def _smoothstep(x):
    x = np.clip(x, 0.0, 1.0)
    return x * x * (3.0 - 2.0 * x)


def _walk(t, p, ang, rootz, g):
    ph = 2 * np.pi * p["frequency"] * t + g.uniform(0, 2 * np.pi)
    a = p["amplitude"]
    s = np.sin(ph)
    ang[:, J["left_hip"], X] += a * s
    ang[:, J["right_hip"], X] -= a * s
    ang[:, J["left_knee"], X] -= 1.1 * a * np.maximum(0.0, -np.cos(ph))
    ang[:, J["right_knee"], X] -= 1.1 * a * np.maximum(0.0, np.cos(ph))
    ang[:, J["left_shoulder"], X] -= 0.7 * a * s
    ang[:, J["right_shoulder"], X] += 0.7 * a * s
    ang[:, J["spine2"], Z] += 0.1 * a * s
    return p["speed"]


def _arm_raise(t, p, ang, rootz, g):
    b = _bump(t, p["frequency"], g.uniform(-0.5, 0.5))
    a = p["amplitude"]
    ang[:, J["left_shoulder"], Y] -= a * b
    ang[:, J["right_shoulder"], Y] += a * b
    return 0.0


def _squat(t, p, ang, rootz, g):
    b = _bump(t, p["frequency"], g.uniform(-0.5, 0.5))
    a = p["amplitude"]
    for side in ("left", "right"):
        ang[:, J[f"{side}_hip"], X] += a * b
        ang[:, J[f"{side}_knee"], X] -= 2 * a * b
        ang[:, J[f"{side}_ankle"], X] += a * b
        ang[:, J[f"{side}_shoulder"], X] += 0.8 * a * b
    ang[:, J["spine1"], X] += 0.3 * a * b
    rootz -= 0.81 * (1 - np.cos(a * b))
    return 0.0


def _jump(t, p, ang, rootz, g):
    f, h = p["frequency"], p["amplitude"]
    u = np.mod(f * t + g.uniform(0, 1), 1.0)
    flight = u >= 0.5
    rootz += np.where(flight, h * (1 - ((u - 0.75) / 0.25) ** 2), 0.0)
    crouch = np.where(flight, 0.0, np.sin(np.pi * u / 0.5) ** 2)
    for side, sign in (("left", 1), ("right", -1)):
        ang[:, J[f"{side}_hip"], X] += 0.6 * crouch
        ang[:, J[f"{side}_knee"], X] -= 1.2 * crouch
        ang[:, J[f"{side}_ankle"], X] += 0.6 * crouch
        ang[:, J[f"{side}_shoulder"], Y] -= sign * 1.2 * np.where(flight, np.sin(np.pi * (u - 0.5) / 0.5), 0.0)
    rootz -= 0.81 * (1 - np.cos(0.6 * crouch))
    return 0.0


def _wave(t, p, ang, rootz, g):
    ph = 2 * np.pi * p["frequency"] * t + g.uniform(0, 2 * np.pi)
    ang[:, J["right_shoulder"], Y] = 0.4
    ang[:, J["right_elbow"], Y] = 1.2 + p["amplitude"] * np.sin(ph)
    return 0.0


def _twist(t, p, ang, rootz, g):
    ph = 2 * np.pi * p["frequency"] * t + g.uniform(0, 2 * np.pi)
    a = p["amplitude"]
    for name in ("spine1", "spine2", "spine3"):
        ang[:, J[name], Z] += a / 3 * np.sin(ph)
    ang[:, J["left_shoulder"], Y] -= 0.3 * a * np.abs(np.sin(ph))
    ang[:, J["right_shoulder"], Y] += 0.3 * a * np.abs(np.sin(ph))
    return 0.0


def _sit_down(t, p, ang, rootz, g):
    d = t[-1] if t[-1] > 0 else 1.0
    start = g.uniform(0.1, 0.3)
    span = np.clip(0.3 / max(p["frequency"], 1e-3) / d, 0.2, 0.6)
    s = _smoothstep((t / d - start) / span)
    a = p["amplitude"]
    for side in ("left", "right"):
        ang[:, J[f"{side}_hip"], X] += 1.5 * a * s
        ang[:, J[f"{side}_knee"], X] -= 1.5 * a * s
    ang[:, J["spine1"], X] += 0.4 * np.sin(np.pi * s)
    rootz -= 0.45 * a * s
    return 0.0


def _kick(t, p, ang, rootz, g):
    ph = 2 * np.pi * p["frequency"] * t + g.uniform(0, 2 * np.pi)
    a = p["amplitude"]
    kick = np.maximum(0.0, np.sin(ph)) ** 3
    wind = np.maximum(0.0, -np.sin(ph))
    ang[:, J["right_hip"], X] += a * kick - 0.3 * wind
    ang[:, J["right_knee"], X] -= 1.2 * wind
    ang[:, J["left_shoulder"], X] += 0.5 * kick
    ang[:, J["right_shoulder"], X] -= 0.5 * kick
    return 0.0


_FAMILY_FNS = {
    "walk": _walk, "arm-raise": _arm_raise, "squat": _squat, "jump": _jump,
    "wave": _wave, "twist": _twist, "sit-down": _sit_down, "kick": _kick,
}


def draw_params(spec: PromptSpec, g: np.random.Generator) -> dict:
    return {name: float(g.uniform(*spec.params_range[name])) for name in PARAM_NAMES}


def sample_motion(spec: PromptSpec, skel: Skeleton | None = None, rng_seed: int = 0, frame_rate: float = 30.0,
                  text_index: int | None = None, style_noise: float = 0.0,
                  duration_scale: float = 1.0) -> tuple[MotionSequence, str]:
    """Draw one motion for ``spec``; deterministic given ``(spec, rng_seed)``.

    Returns the sequence and the prompt text it is paired with (uniform over
    ``spec.texts`` unless ``text_index`` pins it).
    """
    if spec.family not in _FAMILY_FNS:
        raise UnknownFamily(f"unknown motion family {spec.family!r}; known: {sorted(_FAMILY_FNS)}")
    skel = skel or canonical_skeleton()
    if skel.rest_offsets is None:
        raise ConfigError("procedural generation needs a skeleton with rest_offsets")
    g = make_rng(rng_seed)
    text = spec.texts[int(g.integers(len(spec.texts)))]
    if text_index is not None:
        text = spec.texts[text_index % len(spec.texts)]
    params = draw_params(spec, g)
    n = max(3, int(round(params["duration"] * duration_scale * frame_rate)) + 1)
    t = np.arange(n) / frame_rate

    ang = _rest_posture(n) + g.normal(0.0, 0.04, size=(1, 24, 3))
    rootz = np.full(n, PELVIS_HEIGHT)
    speed = _FAMILY_FNS[spec.family](t, params, ang, rootz, g)
    if style_noise > 0:
        ang += _smooth_noise(t, g, style_noise)

    heading = g.uniform(0.0, 2 * np.pi)
    forward = np.array([-np.sin(heading), np.cos(heading), 0.0])
    start = np.array([*g.uniform(-1.0, 1.0, size=2), 0.0])
    root_pos = start + speed * t[:, None] * forward
    root_pos[:, 2] = rootz
    root_rot = _axis_rotation(np.full(n, heading), 2)
    pos = forward_kinematics(skel, root_pos, euler_to_matrix(ang), root_rot)
    return MotionSequence(frame_rate, pos), text


def _smooth_noise(t, g, scale):
    """Sum of three random low-frequency sinusoids per joint angle."""
    freqs = g.uniform(0.2, 2.0, size=(3, 24, 3))
    phases = g.uniform(0, 2 * np.pi, size=(3, 24, 3))
    amps = g.normal(0.0, scale, size=(3, 24, 3))
    return np.sum(amps * np.sin(2 * np.pi * freqs * t[:, None, None, None] + phases), axis=1)


class ProceduralGenerator:
    """Stochastic family-based generator; ``style_noise`` varies the motion texture per tag."""

    def __init__(self, tag: str = "procedural", frame_rate: float = 30.0, style_noise: float = 0.0,
                 skeleton: Skeleton | None = None):
        self.tag = tag
        self.frame_rate = frame_rate
        self.style_noise = style_noise
        self.skeleton = skeleton or canonical_skeleton()

    def sample(self, spec, seed, text_index=None, duration_scale=1.0):
        return sample_motion(spec, self.skeleton, seed, self.frame_rate, text_index,
                             self.style_noise, duration_scale)


def default_prompts(per_family: int = 1, seed: int = 0, families=FAMILIES) -> list[PromptSpec]:
    """``per_family`` prompts for each family, each with a seeded sub-range of the family defaults."""
    g = make_rng(seed)
    prompts = []
    for fam in families:
        if fam not in TEMPLATES:
            raise UnknownFamily(f"unknown motion family {fam!r}")
        for i in range(per_family):
            ranges = {}
            for name, (lo, hi) in DEFAULT_RANGES[fam].items():
                if name == "duration" or hi == lo:
                    ranges[name] = (lo, hi)
                    continue
                a, b = np.sort(g.uniform(lo, hi, size=2))
                mid, half = (a + b) / 2, max((b - a) / 2, 0.15 * (hi - lo))
                ranges[name] = (float(max(lo, mid - half)), float(min(hi, mid + half)))
            prompts.append(PromptSpec(f"{fam}-{i:04d}", TEMPLATES[fam], fam, ranges))
    return prompts
