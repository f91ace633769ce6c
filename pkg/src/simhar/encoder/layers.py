"""Forward/backward pairs for the layers of the two towers.

Each ``*_forward`` returns ``(output, cache)``; the matching ``*_backward``
takes the upstream gradient and the cache and returns the input gradient
plus a dict of parameter gradients.
"""
import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def silu_forward(x):
    s = sigmoid(x)
    return x * s, (x, s)


def silu_backward(dy, cache):
    x, s = cache
    return dy * (s * (1.0 + x * (1.0 - s)))


def dense_forward(x, W, b):
    return x @ W + b, x


def dense_backward(dy, x, W):
    lead = x.reshape(-1, x.shape[-1])
    g = dy.reshape(-1, dy.shape[-1])
    return dy @ W.T, {"W": lead.T @ g, "b": g.sum(axis=0)}


def graph_mix_forward(x, A):
    """Mix joints with a fixed ``(J, J)`` operator; ``x`` is ``(B, T, J, C)``."""
    return np.matmul(A, x)


def graph_mix_backward(dy, A):
    return np.matmul(A.T, dy)


def normalized_adjacency(adj: np.ndarray) -> np.ndarray:
    """``D^-1/2 (A + I) D^-1/2`` for a symmetric 0/1 adjacency."""
    a = adj + np.eye(adj.shape[0])
    d = 1.0 / np.sqrt(a.sum(axis=1))
    return a * d[:, None] * d[None, :]


def temporal_conv_forward(x, W, b, kernel: int, stride: int = 1):
    """'Same'-padded convolution along axis 0 of a time-major ``(T, B, J, C)`` array.

    ``W`` has shape ``(kernel * C, C_out)`` with rows ordered (tap, channel).
    """
    T, B, J, C = x.shape
    left = (kernel - 1) // 2
    xp = np.pad(x, ((left, kernel - 1 - left), (0, 0), (0, 0), (0, 0)))
    T_out = (T - 1) // stride + 1
    span = stride * (T_out - 1) + 1
    Wk = W.reshape(kernel, C, -1)
    y = np.empty((T_out * B * J, Wk.shape[-1]))
    y[:] = b
    taps = []
    for k in range(kernel):
        tap = np.ascontiguousarray(xp[k:k + span:stride]).reshape(-1, C)
        y += tap @ Wk[k]
        taps.append(tap)
    return y.reshape(T_out, B, J, -1), (taps, x.shape, kernel, stride)


def temporal_conv_backward(dy, cache, W):
    taps, shape, kernel, stride = cache
    T, B, J, C = shape
    T_out = dy.shape[0]
    span = stride * (T_out - 1) + 1
    g = dy.reshape(-1, dy.shape[-1])
    Wk = W.reshape(kernel, C, -1)
    dW = np.empty_like(Wk)
    dxp = np.zeros((T + kernel - 1, B, J, C))
    for k in range(kernel):
        dW[k] = taps[k].T @ g
        dxp[k:k + span:stride] += (g @ Wk[k].T).reshape(T_out, B, J, C)
    left = (kernel - 1) // 2
    return dxp[left:left + T], {"W": dW.reshape(W.shape), "b": g.sum(axis=0)}


def l2_normalize_forward(x, eps=1e-20):
    n = np.sqrt(np.sum(x * x, axis=-1, keepdims=True) + eps)
    y = x / n
    return y, (y, n)


def l2_normalize_backward(dy, cache):
    y, n = cache
    return (dy - y * np.sum(y * dy, axis=-1, keepdims=True)) / n
