"""Dual-encoder parameters and hand-derived forward/backward passes.

Motion tower, per sample ``(W, 24, 6)``::

    lift (6 -> C0) -> [graph mix -> dense -> SiLU -> temporal conv -> SiLU] x blocks
    -> mean over time and joints -> dense (-> D) -> L2 normalise

Text tower: mean of token embeddings -> dense (-> D) -> L2 normalise.
Everything runs in float64.
"""
from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import asdict, dataclass, field

import numpy as np

from ..errors import ConfigError, ShapeMismatch
from ..skeleton import N_JOINTS, canonical_skeleton
from . import layers as L
from .text import tokenize

# fixed input scaling: accelerometer in g, gyroscope in units of 10 rad/s
INPUT_SCALE = np.array([1 / 9.81] * 3 + [0.1] * 3)


@dataclass(frozen=True)
class EncoderConfig:
    embed_dim: int = 64
    gcn_blocks: int = 2
    temporal_kernel: int = 9
    channels: tuple = (16, 32)
    temporal_stride: tuple = (2, 2)
    window: int = 120
    text_dim: int = 32
    temperature: float = 0.1
    batch_size: int = 64
    learning_rate: float = 1e-4
    epochs: int = 100
    augment_rotate: bool = True
    rotation_mode: str = "per_joint"
    augment_mask: bool = True
    max_masked: int = 12
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "channels", tuple(int(c) for c in self.channels))
        object.__setattr__(self, "temporal_stride", tuple(int(s) for s in self.temporal_stride))
        if not self.temperature > 0:
            raise ConfigError("temperature must be positive")
        if self.embed_dim < 2:
            raise ConfigError("embed_dim must be >= 2")
        if self.window < self.temporal_kernel:
            raise ConfigError("window must be >= temporal_kernel")
        if len(self.channels) != self.gcn_blocks or len(self.temporal_stride) != self.gcn_blocks:
            raise ConfigError("channels and temporal_stride need one entry per gcn block")
        if self.rotation_mode not in ("per_joint", "global"):
            raise ConfigError("rotation_mode must be 'per_joint' or 'global'")
        if not 0 <= self.max_masked <= N_JOINTS:
            raise ConfigError("max_masked must lie in [0, 24]")
        if self.batch_size < 2:
            raise ConfigError("batch_size must be >= 2")

    def to_json(self) -> dict:
        d = asdict(self)
        d["channels"] = list(self.channels)
        d["temporal_stride"] = list(self.temporal_stride)
        return d

    @classmethod
    def from_json(cls, d) -> "EncoderConfig":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown encoder config keys: {sorted(unknown)}")
        return cls(**d)

    def digest(self) -> bytes:
        return hashlib.sha256(json.dumps(self.to_json(), sort_keys=True).encode()).digest()


def _init_params(cfg: EncoderConfig, vocab_size: int, rng) -> dict:
    p = {}
    c_prev = cfg.channels[0]
    p["lift.W"] = rng.normal(0, 1 / np.sqrt(6), (6, c_prev))
    p["lift.b"] = np.zeros(c_prev)
    for i, c in enumerate(cfg.channels):
        p[f"gcn{i}.W"] = rng.normal(0, np.sqrt(2 / c_prev), (c_prev, c))
        p[f"gcn{i}.b"] = np.zeros(c)
        p[f"tcn{i}.W"] = rng.normal(0, np.sqrt(2 / (c * cfg.temporal_kernel)), (c * cfg.temporal_kernel, c))
        p[f"tcn{i}.b"] = np.zeros(c)
        c_prev = c
    # small projection weights around a shared random bias keep initial
    # similarities nearly uniform across the batch
    p["proj.W"] = rng.normal(0, 0.1 / np.sqrt(c_prev), (c_prev, cfg.embed_dim))
    p["proj.b"] = rng.normal(0, 1.0, cfg.embed_dim)
    p["text.E"] = rng.normal(0, 1.0, (vocab_size, cfg.text_dim))
    p["text.W"] = rng.normal(0, 0.1 / np.sqrt(cfg.text_dim), (cfg.text_dim, cfg.embed_dim))
    p["text.b"] = rng.normal(0, 1.0, cfg.embed_dim)
    return p


@dataclass
class EncoderState:
    """All trainable parameters plus Adam moments and the step counter."""

    config: EncoderConfig
    vocab: dict
    params: dict
    adam_m: dict = field(default_factory=dict)
    adam_v: dict = field(default_factory=dict)
    step: int = 0

    @classmethod
    def initialize(cls, config: EncoderConfig, vocab: dict, seed: int | None = None) -> "EncoderState":
        rng = np.random.default_rng(config.seed if seed is None else seed)
        params = _init_params(config, len(vocab), rng)
        zeros = {k: np.zeros_like(v) for k, v in params.items()}
        return cls(config, dict(vocab), params, zeros, {k: v.copy() for k, v in zeros.items()}, 0)

    def copy(self) -> "EncoderState":
        return copy.deepcopy(self)

    @property
    def adjacency(self) -> np.ndarray:
        if not hasattr(self, "_adj"):
            self._adj = L.normalized_adjacency(canonical_skeleton().adjacency())
        return self._adj

    def n_parameters(self, prefix="") -> int:
        return sum(v.size for k, v in self.params.items() if k.startswith(prefix))

    # ------------------------------------------------------------------ motion
    def motion_forward(self, x: np.ndarray, params=None):
        """``x``: ``(B, W, 24, 6)`` -> unit embeddings ``(B, D)`` and a cache for backprop."""
        p = self.params if params is None else params
        cfg = self.config
        x = np.asarray(x, float)
        if x.ndim != 4 or x.shape[2:] != (N_JOINTS, 6):
            raise ShapeMismatch(f"motion input must be (B, W, 24, 6), got {x.shape}")
        if x.shape[1] != cfg.window:
            raise ShapeMismatch(f"motion input has {x.shape[1]} frames, encoder window is {cfg.window}")
        caches = []
        # time-major internally so temporal taps are contiguous slices
        h, c = L.dense_forward(np.ascontiguousarray((x * INPUT_SCALE).transpose(1, 0, 2, 3)),
                               p["lift.W"], p["lift.b"])
        caches.append(("lift", c))
        for i in range(cfg.gcn_blocks):
            h = L.graph_mix_forward(h, self.adjacency)
            h, c = L.dense_forward(h, p[f"gcn{i}.W"], p[f"gcn{i}.b"])
            caches.append((f"gcn{i}", c))
            h, c = L.silu_forward(h)
            caches.append(("act", c))
            h, c = L.temporal_conv_forward(h, p[f"tcn{i}.W"], p[f"tcn{i}.b"], cfg.temporal_kernel,
                                           cfg.temporal_stride[i])
            caches.append((f"tcn{i}", c))
            h, c = L.silu_forward(h)
            caches.append(("act", c))
        pool_shape = h.shape
        pooled = h.mean(axis=(0, 2))
        e, c_proj = L.dense_forward(pooled, p["proj.W"], p["proj.b"])
        z, c_norm = L.l2_normalize_forward(e)
        return z, (caches, pool_shape, c_proj, c_norm)

    def motion_backward(self, dz: np.ndarray, cache, params=None) -> dict:
        p = self.params if params is None else params
        caches, pool_shape, c_proj, c_norm = cache
        grads = {}
        de = L.l2_normalize_backward(dz, c_norm)
        dpool, g = L.dense_backward(de, c_proj, p["proj.W"])
        grads["proj.W"], grads["proj.b"] = g["W"], g["b"]
        T, B, J, C = pool_shape
        dh = np.broadcast_to(dpool[None, :, None, :] / (T * J), pool_shape)
        for name, c in reversed(caches):
            if name == "act":
                dh = L.silu_backward(dh, c)
            elif name.startswith("tcn"):
                dh, g = L.temporal_conv_backward(dh, c, p[f"{name}.W"])
                grads[f"{name}.W"], grads[f"{name}.b"] = g["W"], g["b"]
            elif name.startswith("gcn"):
                dh, g = L.dense_backward(dh, c, p[f"{name}.W"])
                grads[f"{name}.W"], grads[f"{name}.b"] = g["W"], g["b"]
                dh = L.graph_mix_backward(dh, self.adjacency)
            elif name == "lift":
                _, g = L.dense_backward(dh, c, p["lift.W"])
                grads["lift.W"], grads["lift.b"] = g["W"], g["b"]
        return grads

    # -------------------------------------------------------------------- text
    def token_matrix(self, token_lists) -> np.ndarray:
        """Row-normalised token counts ``(B, V)``: the mean-pooling operator."""
        m = np.zeros((len(token_lists), len(self.vocab)))
        for i, toks in enumerate(token_lists):
            if len(toks) == 0:
                raise ShapeMismatch("token list must be non-empty")
            np.add.at(m[i], np.asarray(toks, int), 1.0 / len(toks))
        return m

    def text_forward(self, token_lists, params=None):
        p = self.params if params is None else params
        counts = self.token_matrix(token_lists)
        pooled = counts @ p["text.E"]
        e, c_proj = L.dense_forward(pooled, p["text.W"], p["text.b"])
        z, c_norm = L.l2_normalize_forward(e)
        return z, (counts, c_proj, c_norm)

    def text_backward(self, dz, cache, params=None) -> dict:
        p = self.params if params is None else params
        counts, c_proj, c_norm = cache
        de = L.l2_normalize_backward(dz, c_norm)
        dpool, g = L.dense_backward(de, c_proj, p["text.W"])
        return {"text.W": g["W"], "text.b": g["b"], "text.E": counts.T @ dpool}

    # ------------------------------------------------------------ convenience
    def encode_motion(self, x: np.ndarray, batch_size: int = 256) -> np.ndarray:
        x = np.asarray(x, float)
        single = x.ndim == 3
        if single:
            x = x[None]
        out = np.concatenate([self.motion_forward(x[i:i + batch_size])[0]
                              for i in range(0, len(x), batch_size)]) if len(x) else np.zeros((0, self.config.embed_dim))
        return out[0] if single else out

    def encode_text(self, texts) -> np.ndarray:
        single = isinstance(texts, str)
        if single:
            texts = [texts]
        z = self.text_forward([tokenize(t, self.vocab) for t in texts])[0]
        return z[0] if single else z


def adam_update(state: EncoderState, grads: dict, lr: float, beta1=0.9, beta2=0.999, eps=1e-8,
                params=None, m=None, v=None, step=None) -> int:
    """In-place Adam step over the keys of ``grads``; returns the new step count."""
    params = state.params if params is None else params
    m = state.adam_m if m is None else m
    v = state.adam_v if v is None else v
    t = (state.step if step is None else step) + 1
    c1 = 1 - beta1**t
    c2 = 1 - beta2**t
    for k, g in grads.items():
        if k not in m:
            m[k] = np.zeros_like(params[k])
            v[k] = np.zeros_like(params[k])
        m[k] *= beta1
        m[k] += (1 - beta1) * g
        v[k] *= beta2
        v[k] += (1 - beta2) * g * g
        params[k] -= lr * (m[k] / c1) / (np.sqrt(v[k] / c2) + eps)
    if step is None:
        state.step = t
    return t
