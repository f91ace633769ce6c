"""Analytic checks shared by ``simhar selftest`` and the test suite.

Each check returns an :class:`OracleResult` instead of raising so callers
can report every miss at once.
"""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import quaternion as quat
from .encoder.loss import info_nce_loss
from .encoder.model import EncoderConfig, EncoderState
from .imu_sim import SimOptions, estimate_orientations, simulate_imu
from .sequences import MotionSequence
from .skeleton import canonical_skeleton

GRAVITY = np.array([0.0, 0.0, -9.81])


@dataclass(frozen=True)
class OracleResult:
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'} {self.name}: {self.detail} ({self.seconds:.2f}s)"


def _rotz(theta):
    c, s = np.cos(theta), np.sin(theta)
    out = np.zeros(np.shape(theta) + (3, 3))
    out[..., 0, 0], out[..., 0, 1], out[..., 1, 0], out[..., 1, 1] = c, -s, s, c
    out[..., 2, 2] = 1.0
    return out


def rigid_spin(omega=2.0, radius=0.5, rate=100.0, seconds=4.0, joint="left_elbow", skel=None):
    """Rest pose spinning about a vertical axis ``radius`` metres from ``joint``.

    The spin is right-handed about the gravity direction (clockwise seen from
    above), so the world angular velocity is ``(0, 0, -omega)``.
    """
    skel = skel or canonical_skeleton()
    rest = skel.rest_pose()
    j = skel.index(joint)
    radial = rest[j, :2] - rest[skel.root, :2]
    radial /= np.linalg.norm(radial)
    centre = np.array([*(rest[j, :2] - radius * radial), 0.0])
    t = np.arange(int(round(seconds * rate)) + 1) / rate
    R = _rotz(-omega * t)
    frames = np.einsum("tab,jb->tja", R, rest - centre) + centre
    return MotionSequence(rate, frames), np.array([0.0, 0.0, -omega]), centre


def circular_motion(omega=2.0, radius=0.5, rate=100.0, seconds=4.0, joint="left_elbow") -> OracleResult:
    t0 = time.perf_counter()
    skel = canonical_skeleton()
    seq, w_world, centre = rigid_spin(omega, radius, rate, seconds, joint, skel)
    imu = simulate_imu(seq, skel)
    j = skel.index(joint)
    q = estimate_orientations(seq, skel)
    frames = np.asarray(imu.frames)
    gz = frames[:, j, 5]
    gyro_err = np.max(np.abs(gz - omega)) / omega
    # body-frame image of the world spin rate for every joint
    image = quat.rotate_inverse(q, np.broadcast_to(w_world, q.shape[:-1] + (3,)))
    image_err = np.max(np.abs(frames[:-1, :, 3:] - image[:-1])) / omega
    inward = centre - np.asarray(seq.frames)[:, j]
    inward[:, 2] = 0.0
    inward /= np.linalg.norm(inward, axis=-1, keepdims=True)
    comp = np.einsum("ti,ti->t", frames[1:-1, j, :3], quat.rotate_inverse(q[1:-1, j], inward[1:-1]))
    expected = omega**2 * radius
    acc_err = np.max(np.abs(comp - expected)) / expected
    seconds_taken = time.perf_counter() - t0
    ok = gyro_err < 0.01 and image_err < 0.01 and acc_err < 0.02 and seconds_taken < 1.0
    detail = (f"gyro z {gz.mean():.6f} rad/s (rel err {gyro_err:.2e}), body-image err {image_err:.2e}, "
              f"centripetal {comp.mean():.6f} m/s^2 (rel err {acc_err:.2e})")
    return OracleResult("circular motion", ok, detail, seconds_taken)


def statics(n_frames=10) -> OracleResult:
    t0 = time.perf_counter()
    skel = canonical_skeleton()
    seq = MotionSequence(100.0, np.repeat(skel.rest_pose()[None], n_frames, axis=0))
    f = np.asarray(simulate_imu(seq, skel).frames)
    gyro = np.max(np.linalg.norm(f[..., 3:], axis=-1))
    acc = np.max(np.abs(np.linalg.norm(f[..., :3], axis=-1) - 9.81))
    ok = gyro < 1e-6 and acc < 1e-6
    return OracleResult("statics", ok, f"max gyro norm {gyro:.2e}, max |accel norm - 9.81| {acc:.2e}",
                        time.perf_counter() - t0)


def free_fall(rate=100.0, seconds=1.0) -> OracleResult:
    t0 = time.perf_counter()
    skel = canonical_skeleton()
    t = np.arange(int(round(rate * seconds)) + 1) / rate
    v0 = np.array([0.3, -0.2, 2.0])
    shift = v0 * t[:, None] + 0.5 * GRAVITY * t[:, None] ** 2
    seq = MotionSequence(rate, skel.rest_pose()[None] + shift[:, None, :])
    f = np.asarray(simulate_imu(seq, skel).frames)
    acc = np.max(np.linalg.norm(f[1:-1, :, :3], axis=-1))
    return OracleResult("free fall", acc < 1e-6, f"max interior accel norm {acc:.2e}", time.perf_counter() - t0)


def loss_anchor(batch=64) -> OracleResult:
    t0 = time.perf_counter()
    z = np.tile(np.eye(8)[:1], (batch, 1))
    loss = info_nce_loss(z, z, 0.1)[0]
    err = abs(loss - np.log(batch))
    return OracleResult("uniform InfoNCE", err < 1e-6, f"loss {loss:.9f} vs ln {batch} (err {err:.1e})",
                        time.perf_counter() - t0)


def gradient_probe(seed=0):
    """Reduced encoder (D = 8, W = 16), a 4-sample batch and 4 token lists.

    Projections are rescaled to unit-variance magnitude so every gradient is
    well above the finite-difference noise floor.
    """
    cfg = EncoderConfig(embed_dim=8, window=16, channels=(8, 16), temporal_stride=(1, 2), seed=seed)
    vocab = {"<unk>": 0, "a": 1, "person": 2, "walks": 3, "jumps": 4}
    state = EncoderState.initialize(cfg, vocab)
    state.params["proj.W"] *= 10.0
    state.params["text.W"] *= 10.0
    g = np.random.default_rng(seed)
    x = g.normal(0.0, 5.0, size=(4, 16, 24, 6))
    toks = [[1, 2], [2, 3, 3], [4], [1, 4, 2]]
    return state, x, toks


def total_loss(state, x, toks, params=None):
    zm, _ = state.motion_forward(x, params)
    zt, _ = state.text_forward(toks, params)
    return info_nce_loss(zm, zt, state.config.temperature)[0]


def analytic_gradients(state, x, toks) -> dict:
    zm, cm = state.motion_forward(x)
    zt, ct = state.text_forward(toks)
    _, dm, dt = info_nce_loss(zm, zt, state.config.temperature)
    grads = state.motion_backward(dm, cm)
    grads.update(state.text_backward(dt, ct))
    return grads


def relative_error(a, n, floor=1e-8):
    return np.abs(a - n) / np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)


def gradient_check(step=1e-4, seed=0) -> OracleResult:
    """Central differences over every scalar parameter of the reduced encoder."""
    t0 = time.perf_counter()
    state, x, toks = gradient_probe(seed)
    grads = analytic_gradients(state, x, toks)
    worst, worst_name = 0.0, ""
    for name, value in state.params.items():
        fd = np.zeros_like(value)
        for idx in np.ndindex(value.shape):
            orig = value[idx]
            value[idx] = orig + step
            lp = total_loss(state, x, toks)
            value[idx] = orig - step
            lm = total_loss(state, x, toks)
            value[idx] = orig
            fd[idx] = (lp - lm) / (2 * step)
        err = relative_error(grads[name], fd).max()
        if err > worst:
            worst, worst_name = err, name
    seconds = time.perf_counter() - t0
    ok = worst < 1e-4 and seconds < 60.0
    return OracleResult("gradient check", ok, f"max relative error {worst:.2e} ({worst_name}), "
                        f"{state.n_parameters()} parameters", seconds)


def run_all(gradient: bool = True) -> list[OracleResult]:
    checks = [circular_motion, statics, free_fall, loss_anchor]
    if gradient:
        checks.append(gradient_check)
    return [c() for c in checks]
