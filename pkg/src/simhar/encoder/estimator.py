"""scikit-learn style wrapper around contrastive pretraining."""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ..validation import check_imu_batch, check_texts
from .model import EncoderConfig
from .train import PairedCorpus, pretrain


class ContrastiveEncoder(TransformerMixin, BaseEstimator):
    """Text/motion dual encoder.

    ``fit(X, y)`` pretrains on IMU sequences ``X`` paired with texts ``y`` (a
    string or a list of candidate strings per sample); ``transform`` maps IMU
    sequences to unit embeddings and :meth:`encode_text` does the same for
    strings.

    Examples
    --------
    >>> enc = ContrastiveEncoder(epochs=1, batch_size=4, window=16)   # doctest: +SKIP
    >>> enc.fit(imus, ["a person walks"] * len(imus)).transform(imus).shape  # doctest: +SKIP
    (n, 64)
    """

    def __init__(self, embed_dim=64, gcn_blocks=2, temporal_kernel=9, channels=(16, 32), temporal_stride=(2, 2),
                 window=120, text_dim=32, temperature=0.1, batch_size=64, learning_rate=1e-4, epochs=100,
                 augment_rotate=True, rotation_mode="per_joint", augment_mask=True, max_masked=12, random_state=0):
        self.embed_dim = embed_dim
        self.gcn_blocks = gcn_blocks
        self.temporal_kernel = temporal_kernel
        self.channels = channels
        self.temporal_stride = temporal_stride
        self.window = window
        self.text_dim = text_dim
        self.temperature = temperature
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.epochs = epochs
        self.augment_rotate = augment_rotate
        self.rotation_mode = rotation_mode
        self.augment_mask = augment_mask
        self.max_masked = max_masked
        self.random_state = random_state

    def _config(self) -> EncoderConfig:
        params = self.get_params()
        seed = params.pop("random_state")
        return EncoderConfig(seed=int(seed or 0), **params)

    def fit(self, X, y):
        cfg = self._config()
        texts = check_texts(y)
        if isinstance(X, np.ndarray) and X.ndim == 4:
            X = list(X)
        frames = [np.asarray(getattr(x, "frames", x), np.float32) for x in X]
        masks = [np.asarray(getattr(x, "observed_mask", np.ones(24, bool))) for x in X]
        corpus = PairedCorpus([str(i) for i in range(len(frames))], frames, masks, texts)
        self.state_, self.loss_history_ = pretrain(cfg, corpus)
        return self

    def transform(self, X):
        check_is_fitted(self, "state_")
        return self.state_.encode_motion(check_imu_batch(X, self.state_.config.window))

    def encode_text(self, texts):
        check_is_fitted(self, "state_")
        return self.state_.encode_text(texts)

    @classmethod
    def from_state(cls, state):
        """Wrap an existing :class:`EncoderState` (e.g. a loaded checkpoint)."""
        cfg = state.config.to_json()
        seed = cfg.pop("seed")
        est = cls(random_state=seed, **cfg)
        est.state_ = state
        est.loss_history_ = []
        return est
