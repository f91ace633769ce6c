"""Contrastive pretraining loop."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from ..errors import DataError, NonFiniteLoss
from ..sequences import window_array
from .augment import draw_mask, draw_rotations, rotate_array
from .loss import info_nce_loss
from .model import EncoderConfig, EncoderState, adam_update
from .text import build_vocab, tokenize

log = logging.getLogger(__name__)


@dataclass
class PairedCorpus:
    """In-memory training pairs: IMU arrays ``(n_i, 24, 6)`` with candidate texts."""

    ids: list
    frames: list
    masks: list
    texts: list

    def __post_init__(self):
        n = len(self.ids)
        if not (len(self.frames) == len(self.masks) == len(self.texts) == n):
            raise DataError("corpus fields must have equal lengths")
        for i, t in zip(self.ids, self.texts):
            if not t:
                raise DataError(f"record {i!r} has no texts")

    def __len__(self):
        return len(self.ids)

    @classmethod
    def from_manifest(cls, manifest) -> "PairedCorpus":
        ids, frames, masks, texts = [], [], [], []
        for rec in manifest.records:
            if rec.imu_ref is None:
                raise DataError(f"record {rec.id!r} has no imu_ref; simulate IMU first")
            imu = manifest.load_imu(rec)
            ids.append(rec.id)
            frames.append(np.asarray(imu.frames, np.float32))
            masks.append(np.asarray(imu.observed_mask))
            texts.append(list(rec.texts))
        return cls(ids, frames, masks, texts)

    @classmethod
    def from_sequences(cls, imus, texts, ids=None) -> "PairedCorpus":
        texts = [[t] if isinstance(t, str) else list(t) for t in texts]
        ids = list(ids) if ids is not None else [str(i) for i in range(len(texts))]
        return cls(ids, [np.asarray(s.frames, np.float32) for s in imus],
                   [np.asarray(s.observed_mask) for s in imus], texts)


def make_batch(corpus: PairedCorpus, idx, cfg: EncoderConfig, rng, vocab):
    """Draw texts, crop windows and augment for the records ``idx``."""
    xs, toks = [], []
    for i in idx:
        texts = corpus.texts[i]
        text = texts[int(rng.integers(len(texts)))]
        x = window_array(corpus.frames[i], cfg.window, "random_crop", rng).astype(float)
        mask = corpus.masks[i]
        if cfg.augment_rotate:
            x = rotate_array(x, draw_rotations(rng, cfg.rotation_mode))
        if cfg.augment_mask:
            mask = mask.copy()
            mask[draw_mask(rng, cfg.max_masked)] = False
        x[:, ~mask, :] = 0.0
        xs.append(x)
        toks.append(tokenize(text, vocab))
    return np.stack(xs), toks


def train_step(state: EncoderState, x, toks, lr: float):
    zm, cm = state.motion_forward(x)
    zt, ct = state.text_forward(toks)
    loss, dm, dt = info_nce_loss(zm, zt, state.config.temperature)
    grads = state.motion_backward(dm, cm)
    grads.update(state.text_backward(dt, ct))
    return loss, grads


def pretrain(cfg: EncoderConfig, corpus: PairedCorpus, vocab: dict | None = None,
             state: EncoderState | None = None, callback=None) -> tuple[EncoderState, list]:
    """Train both towers with symmetric InfoNCE; returns the state and per-epoch mean losses.

    Deterministic given ``cfg.seed``: one generator drives shuffling, text
    choice, cropping and augmentation.
    """
    if vocab is None:
        vocab = build_vocab(t for texts in corpus.texts for t in texts)
    state = state or EncoderState.initialize(cfg, vocab)
    rng = np.random.default_rng(cfg.seed + 1)
    history = []
    n = len(corpus)
    if cfg.epochs > 0 and n < 2:
        raise DataError("pretraining needs at least 2 records")
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        losses = []
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            if len(idx) < 2:
                continue
            x, toks = make_batch(corpus, idx, cfg, rng, vocab)
            loss, grads = train_step(state, x, toks, cfg.learning_rate)
            if not np.isfinite(loss) or not all(np.all(np.isfinite(g)) for g in grads.values()):
                raise NonFiniteLoss(f"non-finite loss at epoch {epoch}", [corpus.ids[i] for i in idx])
            adam_update(state, grads, cfg.learning_rate)
            losses.append(loss)
        history.append(float(np.mean(losses)))
        log.info("epoch %d/%d loss %.4f", epoch + 1, cfg.epochs, history[-1])
        if callback is not None:
            callback(epoch, history[-1], state)
    return state, history
