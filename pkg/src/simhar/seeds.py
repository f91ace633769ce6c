"""Splittable seed derivation and pinned rounding."""
import hashlib
import math
import struct

import numpy as np

_MASK = (1 << 64) - 1


def hash64(master: int, index: int) -> int:
    """Order-independent child seed for record ``index`` under ``master``."""
    blob = struct.pack("<QQ", int(master) & _MASK, int(index) & _MASK)
    return int.from_bytes(hashlib.blake2b(blob, digest_size=8).digest(), "little")


def derive_seed(master: int, *keys) -> int:
    """Child seed for a named stage, e.g. ``derive_seed(seed, "pretrain", 3)``."""
    h = hashlib.blake2b(struct.pack("<Q", int(master) & _MASK), digest_size=8)
    for k in keys:
        h.update(b"\x1f" + str(k).encode("utf-8"))
    return int.from_bytes(h.digest(), "little")


def rng(seed) -> np.random.Generator:
    return np.random.default_rng(int(seed) & _MASK)


def round_half_away(x: float) -> int:
    """Round to nearest integer, ties away from zero."""
    return int(math.copysign(math.floor(abs(x) + 0.5), x))
