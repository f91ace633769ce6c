from .build import build_har_dataset, pick_observed_joints
from .classify import LinearHead, finetune, k_shot_finetune, predict_head, zero_shot_classify
from .dataset import HarDataset, HarRecord, align_channels
from .estimators import KShotClassifier, ZeroShotClassifier
from .evaluate import SHOTS, EvalReport, evaluate
from .metrics import macro_f1

__all__ = [
    "build_har_dataset", "pick_observed_joints", "LinearHead", "finetune", "k_shot_finetune", "predict_head",
    "zero_shot_classify", "HarDataset", "HarRecord", "align_channels", "KShotClassifier", "ZeroShotClassifier",
    "SHOTS", "EvalReport", "evaluate", "macro_f1",
]
