"""Batched gated recurrent cells and attention, with explicit backward passes.

Gate layout in packed weights is ``[update | reset | candidate]``; ``W`` maps
inputs, ``U`` maps the previous state, both to ``3 * hidden`` columns.
"""

from __future__ import annotations

import numpy as np
from scipy.special import expit


def sigmoid(x):
    return expit(x)


def gru_cell(gx, h, U):
    """One step given precomputed ``gx = x @ W + b``. Returns new state and cache."""
    H = h.shape[1]
    gh = h @ U[:, :2 * H]
    z = sigmoid(gx[:, :H] + gh[:, :H])
    r = sigmoid(gx[:, H:2 * H] + gh[:, H:])
    rh = r * h
    n = np.tanh(gx[:, 2 * H:] + rh @ U[:, 2 * H:])
    h_new = (1.0 - z) * n + z * h
    return h_new, (h, z, r, rh, n)


def gru_cell_backward(dh_new, cache, U, dU):
    """Accumulates into ``dU``; returns ``(dgx, dh_prev)``."""
    h, z, r, rh, n = cache
    H = h.shape[1]
    dn = dh_new * (1.0 - z)
    dz = dh_new * (h - n)
    dh = dh_new * z
    dan = dn * (1.0 - n * n)
    dU[:, 2 * H:] += rh.T @ dan
    drh = dan @ U[:, 2 * H:].T
    dh += drh * r
    dr = drh * h
    dazr = np.concatenate([dz * z * (1.0 - z), dr * r * (1.0 - r)], axis=1)
    dU[:, :2 * H] += h.T @ dazr
    dh += dazr @ U[:, :2 * H].T
    return np.concatenate([dazr, dan], axis=1), dh


def gru_sequence(x, mask, W, U, b):
    """Masked recurrence over ``x`` of shape (B, T, I); padded steps hold the state."""
    B, T, _ = x.shape
    H = U.shape[0]
    gx = x @ W + b
    h = np.zeros((B, H))
    caches = []
    for t in range(T):
        m = mask[:, t, None]
        h_new, cache = gru_cell(gx[:, t], h, U)
        h = m * h_new + (1.0 - m) * h
        caches.append(cache)
    return h, (x, mask, caches)


def gru_sequence_backward(dh, state, W, U, grads, prefix):
    """Backward through :func:`gru_sequence`; returns gradient w.r.t. ``x``."""
    x, mask, caches = state
    B, T, _ = x.shape
    dgx = np.zeros((B, T, W.shape[1]))
    dU = grads[prefix + ".U"]
    for t in reversed(range(T)):
        m = mask[:, t, None]
        dgx_t, dh_prev = gru_cell_backward(m * dh, caches[t], U, dU)
        dgx[:, t] = dgx_t
        dh = (1.0 - m) * dh + dh_prev
    grads[prefix + ".W"] += np.einsum("bti,btg->ig", x, dgx)
    grads[prefix + ".b"] += dgx.sum(axis=(0, 1))
    return dgx @ W.T


def softmax(x, axis=-1):
    e = np.exp(x - x.max(axis=axis, keepdims=True))
    return e / e.sum(axis=axis, keepdims=True)
