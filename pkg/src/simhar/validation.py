"""Input coercion helpers shared by the estimators."""
from __future__ import annotations

import numpy as np

from .errors import ShapeMismatch
from .sequences import ImuSequence, window_array
from .skeleton import N_JOINTS


def check_imu_batch(X, window: int, mode: str = "center_crop", rng=None) -> np.ndarray:
    """Coerce IMU input to a float64 ``(n, window, 24, 6)`` array.

    Accepts a list of :class:`ImuSequence`, a list of ``(T, 24, 6)`` arrays of
    any length, or an already-stacked 4-D array.
    """
    if isinstance(X, ImuSequence):
        X = [X]
    if isinstance(X, np.ndarray) and X.ndim == 4:
        if X.shape[2:] != (N_JOINTS, 6):
            raise ShapeMismatch(f"expected (n, T, 24, 6), got {X.shape}")
        if X.shape[1] == window:
            return np.asarray(X, float)
        return np.stack([window_array(x, window, mode, rng) for x in X]).astype(float)
    out = []
    for x in X:
        frames = x.frames if isinstance(x, ImuSequence) else np.asarray(x)
        if frames.ndim != 3 or frames.shape[1:] != (N_JOINTS, 6):
            raise ShapeMismatch(f"expected (T, 24, 6) sequences, got {frames.shape}")
        out.append(window_array(frames, window, mode, rng))
    if not out:
        return np.zeros((0, window, N_JOINTS, 6))
    return np.stack(out).astype(float)


def check_texts(y) -> list:
    """Each target becomes a non-empty list of candidate texts."""
    out = []
    for t in y:
        texts = [t] if isinstance(t, str) else list(t)
        if not texts:
            raise ValueError("every sample needs at least one text")
        out.append(texts)
    return out
