"""Vectorised unit-quaternion helpers, scalar-first ``(w, x, y, z)``.

All functions broadcast over leading axes.
"""
import numpy as np


def multiply(a, b):
    a, b = np.asarray(a, float), np.asarray(b, float)
    aw, ax, ay, az = np.moveaxis(a, -1, 0)
    bw, bx, by, bz = np.moveaxis(b, -1, 0)
    return np.stack([
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    ], axis=-1)


def conjugate(q):
    q = np.asarray(q, float)
    return q * np.array([1.0, -1.0, -1.0, -1.0])


inverse = conjugate  # unit quaternions only


def normalize(q):
    q = np.asarray(q, float)
    return q / np.linalg.norm(q, axis=-1, keepdims=True)


def rotate(q, v):
    """Apply the rotation ``q`` to vectors ``v`` (body -> world for a body-to-world q)."""
    q, v = np.asarray(q, float), np.asarray(v, float)
    w = q[..., :1]
    u = q[..., 1:]
    t = 2.0 * np.cross(u, v)
    return v + w * t + np.cross(u, t)


def rotate_inverse(q, v):
    """Apply the inverse rotation (world -> body)."""
    return rotate(conjugate(q), v)


def to_matrix(q):
    w, x, y, z = np.moveaxis(np.asarray(q, float), -1, 0)
    m = np.stack([
        1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
        2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
        2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y),
    ], axis=-1)
    return m.reshape(m.shape[:-1] + (3, 3))


def from_matrix(m):
    """Rotation matrix -> unit quaternion with w >= 0 (Shepperd's method)."""
    m = np.asarray(m, float)
    lead = m.shape[:-2]
    m = m.reshape(-1, 3, 3)
    tr = m[:, 0, 0] + m[:, 1, 1] + m[:, 2, 2]
    diag = np.stack([m[:, 0, 0], m[:, 1, 1], m[:, 2, 2]], axis=-1)
    choice = np.argmax(np.concatenate([tr[:, None], diag], axis=1), axis=1)
    q = np.empty((m.shape[0], 4))

    i = choice == 0
    s = np.sqrt(1.0 + tr[i]) * 2
    q[i] = np.stack([0.25 * s, (m[i, 2, 1] - m[i, 1, 2]) / s,
                     (m[i, 0, 2] - m[i, 2, 0]) / s, (m[i, 1, 0] - m[i, 0, 1]) / s], axis=-1)
    i = choice == 1
    s = np.sqrt(1.0 + m[i, 0, 0] - m[i, 1, 1] - m[i, 2, 2]) * 2
    q[i] = np.stack([(m[i, 2, 1] - m[i, 1, 2]) / s, 0.25 * s,
                     (m[i, 0, 1] + m[i, 1, 0]) / s, (m[i, 0, 2] + m[i, 2, 0]) / s], axis=-1)
    i = choice == 2
    s = np.sqrt(1.0 - m[i, 0, 0] + m[i, 1, 1] - m[i, 2, 2]) * 2
    q[i] = np.stack([(m[i, 0, 2] - m[i, 2, 0]) / s, (m[i, 0, 1] + m[i, 1, 0]) / s,
                     0.25 * s, (m[i, 1, 2] + m[i, 2, 1]) / s], axis=-1)
    i = choice == 3
    s = np.sqrt(1.0 - m[i, 0, 0] - m[i, 1, 1] + m[i, 2, 2]) * 2
    q[i] = np.stack([(m[i, 1, 0] - m[i, 0, 1]) / s, (m[i, 0, 2] + m[i, 2, 0]) / s,
                     (m[i, 1, 2] + m[i, 2, 1]) / s, 0.25 * s], axis=-1)

    q = normalize(q)
    q[q[:, 0] < 0] *= -1
    return q.reshape(lead + (4,))


def from_axis_angle(axis, angle):
    axis = np.asarray(axis, float)
    axis = axis / np.linalg.norm(axis, axis=-1, keepdims=True)
    half = 0.5 * np.asarray(angle, float)[..., None]
    return np.concatenate([np.cos(half), np.sin(half) * axis], axis=-1)


def log(q):
    """Quaternion logarithm along the shorter arc: returns ``(angle / 2) * axis``.

    The identity maps to the zero vector; angles near pi stay finite.
    """
    q = np.asarray(q, float)
    q = np.where(q[..., :1] < 0, -q, q)
    w = q[..., 0]
    v = q[..., 1:]
    s = np.linalg.norm(v, axis=-1)
    half = np.arctan2(s, w)
    small = s < 1e-12
    # half/s -> 1/w as s -> 0
    factor = np.where(small, 1.0 / np.where(small, w, 1.0), half / np.where(small, 1.0, s))
    return factor[..., None] * v


def exp(v):
    """Inverse of :func:`log` for vectors of norm below pi/2."""
    v = np.asarray(v, float)
    half = np.linalg.norm(v, axis=-1)
    small = half < 1e-12
    sinc = np.where(small, 1.0, np.sin(half) / np.where(small, 1.0, half))
    return np.concatenate([np.cos(half)[..., None], sinc[..., None] * v], axis=-1)


def random_uniform(rng, size=()):
    """Uniform random rotations from normalised 4-D Gaussian samples."""
    size = (size,) if np.isscalar(size) else tuple(size)
    g = rng.standard_normal(size + (4,))
    return g / np.linalg.norm(g, axis=-1, keepdims=True)


def make_continuous(q, axis=0):
    """Flip signs along ``axis`` so consecutive quaternions have a non-negative dot."""
    q = np.moveaxis(np.array(q, float), axis, 0)
    for t in range(1, q.shape[0]):
        flip = np.sum(q[t] * q[t - 1], axis=-1) < 0
        q[t][flip] *= -1
    return np.moveaxis(q, 0, axis)
