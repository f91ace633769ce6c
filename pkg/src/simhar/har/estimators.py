"""Classifier wrappers so the pretrained encoder plugs into scikit-learn tooling."""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from ..validation import check_imu_batch
from .classify import FINETUNE_BATCH, FINETUNE_EPOCHS, argmax_labels, finetune, zero_shot_scores


def _state(encoder):
    return getattr(encoder, "state_", encoder)


class ZeroShotClassifier(ClassifierMixin, BaseEstimator):
    """Nearest class phrase in the shared embedding space; ``fit`` learns nothing."""

    def __init__(self, encoder=None, label_texts=None):
        self.encoder = encoder
        self.label_texts = label_texts

    def fit(self, X=None, y=None):
        if not self.label_texts or len(self.label_texts) < 2:
            raise ValueError("label_texts must map at least two classes to phrases")
        self.classes_ = np.array(sorted(self.label_texts))
        return self

    def decision_function(self, X):
        check_is_fitted(self, "classes_")
        _, scores = zero_shot_scores(_state(self.encoder), X, self.label_texts)
        return scores

    def predict(self, X):
        return np.array(argmax_labels(list(self.classes_), self.decision_function(X)))


class KShotClassifier(ClassifierMixin, BaseEstimator):
    """Linear head trained jointly with a copy of the motion tower on the labelled data given to ``fit``."""

    def __init__(self, encoder=None, epochs=FINETUNE_EPOCHS, batch_size=FINETUNE_BATCH, learning_rate=None,
                 freeze_encoder=False, random_state=0):
        self.encoder = encoder
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.freeze_encoder = freeze_encoder
        self.random_state = random_state

    def fit(self, X, y):
        base = _state(self.encoder)
        y = list(y)
        frames = list(check_imu_batch(X, base.config.window)) if len(y) else []
        self.classes_ = np.array(sorted(set(y)))
        self.state_, self.head_ = finetune(base, frames, y, list(self.classes_), seed=self.random_state,
                                           epochs=self.epochs, batch_size=self.batch_size,
                                           learning_rate=self.learning_rate, freeze_encoder=self.freeze_encoder)
        return self

    def decision_function(self, X):
        check_is_fitted(self, "head_")
        z = self.state_.encode_motion(check_imu_batch(X, self.state_.config.window))
        return self.head_.logits(z)

    def predict(self, X):
        return np.array(argmax_labels(list(self.head_.classes), self.decision_function(X)))
