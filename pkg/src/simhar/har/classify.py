"""0-shot text matching and k-shot fine-tuning with a linear head."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError, EmptyTrainSet, NonFiniteLoss
from ..encoder.model import EncoderState, adam_update
from ..seeds import rng as make_rng
from ..sequences import window_array
from ..validation import check_imu_batch
from .dataset import HarDataset

log = logging.getLogger(__name__)

FINETUNE_EPOCHS = 50
FINETUNE_BATCH = 64


def zero_shot_scores(state: EncoderState, X, label_texts: dict):
    """Cosine similarity of each motion to each class phrase; classes sorted by name."""
    classes = sorted(label_texts)
    if len(classes) < 2:
        raise ConfigError("0-shot classification needs at least 2 classes")
    zm = state.encode_motion(check_imu_batch(X, state.config.window))
    zt = state.encode_text([label_texts[c] for c in classes])
    return classes, zm @ zt.T


def argmax_labels(classes, scores) -> list:
    """Row-wise argmax; exact ties go to the first class in ``classes`` order."""
    return [classes[i] for i in np.argmax(scores, axis=1)]


def zero_shot_classify(state: EncoderState, imu, label_texts: dict):
    """Predicted class and the similarity vector for one sequence."""
    classes, scores = zero_shot_scores(state, [imu], label_texts)
    return argmax_labels(classes, scores)[0], dict(zip(classes, scores[0]))


@dataclass
class LinearHead:
    W: np.ndarray  # (embed_dim, n_classes)
    b: np.ndarray
    classes: tuple

    @classmethod
    def initialize(cls, embed_dim: int, classes, rng, scale: float = 0.01) -> "LinearHead":
        classes = tuple(classes)
        return cls(rng.uniform(-scale, scale, (embed_dim, len(classes))), np.zeros(len(classes)), classes)

    def logits(self, z):
        return z @ self.W + self.b

    def predict(self, z) -> list:
        return argmax_labels(self.classes, self.logits(z))


def _softmax_xent(logits, y):
    z = logits - logits.max(axis=1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    n = len(y)
    loss = -logp[np.arange(n), y].mean()
    d = np.exp(logp)
    d[np.arange(n), y] -= 1.0
    return loss, d / n


def stratified_draw(dataset: HarDataset, k: int, rng) -> list:
    """``min(k, available)`` train ids per class, classes in label_set order."""
    train = dataset.ids("train")
    by_class = {c: [] for c in dataset.label_set}
    for rid in train:
        by_class[dataset.record(rid).label].append(rid)
    short = {c: len(ids) for c, ids in by_class.items() if len(ids) < k}
    if short:
        log.warning("%s: %d classes have fewer than k=%d train examples, using all of them: %s",
                    dataset.name, len(short), k, short)
    picked = []
    for c in dataset.label_set:
        ids = by_class[c]
        take = min(k, len(ids))
        if take:
            picked.extend(ids[i] for i in sorted(rng.choice(len(ids), size=take, replace=False)))
    return picked


def finetune(state: EncoderState, frames: list, labels: list, classes, seed: int,
             epochs: int = FINETUNE_EPOCHS, batch_size: int = FINETUNE_BATCH, learning_rate: float | None = None,
             freeze_encoder: bool = False) -> tuple[EncoderState, LinearHead]:
    """Train a linear head on the normalised motion embedding, jointly with the motion tower.

    ``state`` is copied; the caller's state is never modified.  Adam moments
    start fresh.
    """
    if not frames:
        raise EmptyTrainSet("no training examples")
    state = state.copy()
    cfg = state.config
    lr = cfg.learning_rate if learning_rate is None else learning_rate
    rng = make_rng(seed)
    head = LinearHead.initialize(cfg.embed_dim, classes, rng)
    cls_index = {c: i for i, c in enumerate(head.classes)}
    y = np.array([cls_index[l] for l in labels])
    params = {"head.W": head.W, "head.b": head.b}
    if not freeze_encoder:
        params.update({k: v for k, v in state.params.items() if not k.startswith("text.")})
    m, v = {}, {}
    step = 0
    n = len(frames)
    for epoch in range(epochs):
        order = rng.permutation(n)
        for start in range(0, n, batch_size):
            idx = order[start:start + batch_size]
            x = np.stack([window_array(frames[i], cfg.window, "random_crop", rng) for i in idx]).astype(float)
            z, cache = state.motion_forward(x)
            loss, dlogits = _softmax_xent(head.logits(z), y[idx])
            if not np.isfinite(loss):
                raise NonFiniteLoss(f"non-finite fine-tuning loss at epoch {epoch}", [str(i) for i in idx])
            grads = {"head.W": z.T @ dlogits, "head.b": dlogits.sum(axis=0)}
            if not freeze_encoder:
                grads.update(state.motion_backward(dlogits @ head.W.T, cache))
            step = adam_update(state, grads, lr, params=params, m=m, v=v, step=step)
    return state, head


def k_shot_finetune(state: EncoderState, dataset: HarDataset, k: int, seed: int, **kwargs):
    """Fine-tune on a stratified k-per-class draw from the train split only."""
    if k < 1:
        raise ConfigError("k must be >= 1")
    rng = make_rng(seed)
    ids = stratified_draw(dataset, k, rng)
    if not ids:
        raise EmptyTrainSet(f"{dataset.name}: train split is empty")
    frames, labels = [], []
    for rid in ids:
        frames.append(np.asarray(dataset.aligned(rid).frames))
        labels.append(dataset.record(rid).label)
    return finetune(state, frames, labels, dataset.label_set, seed=int(rng.integers(2**63)), **kwargs)


def predict_head(state: EncoderState, head: LinearHead, X) -> list:
    z = state.encode_motion(check_imu_batch(X, state.config.window))
    return head.predict(z)
