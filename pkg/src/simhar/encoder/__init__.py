from .augment import augment_mask_joints, augment_rotate
from .checkpoint import load_checkpoint, save_checkpoint
from .estimator import ContrastiveEncoder
from .loss import info_nce_loss
from .model import EncoderConfig, EncoderState
from .text import build_vocab, tokenize
from .train import PairedCorpus, pretrain


def encode_text(state, tokens):
    """Embedding of one token-id list."""
    return state.text_forward([list(tokens)])[0][0]


def encode_motion(state, imu):
    """Embedding of one IMU sequence already windowed to the encoder length."""
    frames = getattr(imu, "frames", imu)
    return state.encode_motion(frames)


__all__ = [
    "augment_mask_joints", "augment_rotate", "load_checkpoint", "save_checkpoint", "ContrastiveEncoder",
    "info_nce_loss", "EncoderConfig", "EncoderState", "build_vocab", "tokenize", "PairedCorpus", "pretrain",
    "encode_text", "encode_motion",
]
