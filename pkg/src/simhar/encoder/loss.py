"""Symmetric InfoNCE over a batch of matched motion/text embeddings."""
import numpy as np

from ..errors import DegenerateBatch


def _log_softmax(s, axis):
    m = s.max(axis=axis, keepdims=True)
    z = s - m
    return z - np.log(np.exp(z).sum(axis=axis, keepdims=True))


def info_nce_loss(motion: np.ndarray, text: np.ndarray, temperature: float):
    """Return ``(loss, d_motion, d_text)``.

    ``S = motion @ text.T / temperature``; the loss averages the row-wise and
    column-wise cross-entropies against the diagonal.
    """
    motion = np.asarray(motion, float)
    text = np.asarray(text, float)
    B = motion.shape[0]
    if B < 2:
        raise DegenerateBatch(f"contrastive loss needs at least 2 pairs, got {B}")
    if text.shape != motion.shape:
        raise DegenerateBatch(f"shape mismatch {motion.shape} vs {text.shape}")
    S = motion @ text.T / temperature
    lr = _log_softmax(S, axis=1)
    lc = _log_softmax(S, axis=0)
    diag = np.arange(B)
    loss = -0.5 * (lr[diag, diag].mean() + lc[diag, diag].mean())
    eye = np.eye(B)
    dS = 0.5 * ((np.exp(lr) - eye) + (np.exp(lc) - eye)) / B
    d_motion = dS @ text / temperature
    d_text = dS.T @ motion / temperature
    return float(loss), d_motion, d_text
