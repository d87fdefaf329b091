"""Forward/backward primitives for every supported layer kind.

All functions operate on plain float64 numpy arrays. Sequence activations are
shaped (batch, length, channels); feature activations (batch, features).
Each forward returns its output plus whatever the matching backward needs.
"""

from __future__ import annotations

import numpy as np

from ..errors import ShapeError

CLIP_EPS = 1e-12


def relu(x: np.ndarray) -> np.ndarray:
    """Elementwise max(0, x); shape preserved."""
    return np.maximum(np.asarray(x, dtype=np.float64), 0.0)


def softmax(x: np.ndarray) -> np.ndarray:
    """Probability distribution over the last axis, max-subtracted for overflow safety."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] == 0:
        raise ShapeError("softmax requires a non-empty last axis")
    z = x - x.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def cross_entropy(pred: np.ndarray, target: int, n_classes: int) -> float:
    """Cross-entropy of a probability vector against a one-hot target class.

    Predictions are clipped to [1e-12, 1 - 1e-12] before the log, so a perfect
    prediction yields a loss of ~1e-12 rather than exactly zero.
    """
    pred = np.asarray(pred, dtype=np.float64)
    if pred.shape != (n_classes,):
        raise ShapeError(f"expected a length-{n_classes} probability vector, got {pred.shape}")
    if not 0 <= int(target) < n_classes:
        raise IndexError(f"target {target} out of range [0, {n_classes})")
    p = float(np.clip(pred[int(target)], CLIP_EPS, 1.0 - CLIP_EPS))
    return -np.log(p)


def cross_entropy_batch(probs: np.ndarray, targets: np.ndarray) -> float:
    """Mean cross-entropy over a (batch, classes) probability matrix."""
    targets = np.asarray(targets, dtype=np.int64)
    p = np.clip(probs[np.arange(len(targets)), targets], CLIP_EPS, 1.0 - CLIP_EPS)
    return float(-np.log(p).mean())


# ---------------------------------------------------------------------------
# Dense
# ---------------------------------------------------------------------------

def dense_forward(x, w, b):
    return x @ w + b


def dense_backward(dy, x, w):
    dx = dy @ w.T
    dw = x.T @ dy
    db = dy.sum(axis=0)
    return dx, dw, db


# ---------------------------------------------------------------------------
# Embedding
# ---------------------------------------------------------------------------

def embedding_forward(indices, table):
    indices = np.asarray(indices)
    if not np.issubdtype(indices.dtype, np.integer):
        raise ShapeError("embedding input must be integer token indices")
    if indices.size and (indices.min() < 0 or indices.max() >= table.shape[0]):
        raise ShapeError(
            f"token index out of range [0, {table.shape[0]}) for embedding lookup"
        )
    return table[indices]


def embedding_backward(dy, indices, table_shape):
    dtable = np.zeros(table_shape, dtype=np.float64)
    dim = table_shape[1]
    np.add.at(dtable, np.asarray(indices).ravel(), dy.reshape(-1, dim))
    return dtable


# ---------------------------------------------------------------------------
# Global average pooling over the length axis
# ---------------------------------------------------------------------------

def global_average_pool_forward(x):
    return x.mean(axis=1)


def global_average_pool_backward(dy, length):
    return np.repeat(dy[:, None, :], length, axis=1) / length


# ---------------------------------------------------------------------------
# Conv1D, stride 1, same-length zero padding
# ---------------------------------------------------------------------------

def conv1d_forward(x, w, b):
    """(B, L, Cin) -> (B, L, Cout) with kernel w of shape (k, Cin, Cout)."""
    batch, length, _ = x.shape
    k = w.shape[0]
    left = (k - 1) // 2
    xp = np.pad(x, ((0, 0), (left, k - 1 - left), (0, 0)))
    y = np.broadcast_to(b, (batch, length, w.shape[2])).copy()
    for offset in range(k):
        y += xp[:, offset:offset + length, :] @ w[offset]
    return y


def conv1d_backward(dy, x, w):
    batch, length, _ = x.shape
    k = w.shape[0]
    left = (k - 1) // 2
    xp = np.pad(x, ((0, 0), (left, k - 1 - left), (0, 0)))
    dxp = np.zeros_like(xp)
    dw = np.zeros_like(w)
    for offset in range(k):
        window = xp[:, offset:offset + length, :]
        dw[offset] = np.einsum("blc,blo->co", window, dy)
        dxp[:, offset:offset + length, :] += dy @ w[offset].T
    db = dy.sum(axis=(0, 1))
    dx = dxp[:, left:left + length, :]
    return dx, dw, db


# ---------------------------------------------------------------------------
# LSTM (single direction); a bidirectional layer runs this twice
# ---------------------------------------------------------------------------

def _sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def lstm_forward(x, w, u, b, reverse=False):
    """Run an LSTM over (B, L, E) and return the final hidden state (B, H).

    Per timestep, with gates stacked [input, forget, cell, output] along the
    last axis of w (E, 4H), u (H, 4H), and b (4H,):

        z = x_t @ w + h @ u + b
        i, f, o = sigmoid(z_i), sigmoid(z_f), sigmoid(z_o);  g = tanh(z_g)
        c = f * c + i * g
        h = o * tanh(c)

    With reverse=True the sequence is consumed right to left, so the returned
    state summarizes the sequence read backwards.
    """
    batch, length, _ = x.shape
    hidden = u.shape[0]
    h = np.zeros((batch, hidden))
    c = np.zeros((batch, hidden))
    order = range(length - 1, -1, -1) if reverse else range(length)
    steps = []
    for t in order:
        xt = x[:, t, :]
        z = xt @ w + h @ u + b
        i = _sigmoid(z[:, :hidden])
        f = _sigmoid(z[:, hidden:2 * hidden])
        g = np.tanh(z[:, 2 * hidden:3 * hidden])
        o = _sigmoid(z[:, 3 * hidden:])
        c_new = f * c + i * g
        h_new = o * np.tanh(c_new)
        steps.append((t, xt, h, c, i, f, g, o, c_new))
        h, c = h_new, c_new
    return h, (steps, w, u, x.shape)


def lstm_backward(dh_final, cache):
    """Backpropagate through time from a gradient on the final hidden state."""
    steps, w, u, x_shape = cache
    batch, _, _ = x_shape
    hidden = u.shape[0]
    dx = np.zeros(x_shape)
    dw = np.zeros_like(w)
    du = np.zeros_like(u)
    db = np.zeros(4 * hidden)
    dh = np.asarray(dh_final, dtype=np.float64).copy()
    dc = np.zeros((batch, hidden))
    for t, xt, h_prev, c_prev, i, f, g, o, c_new in reversed(steps):
        tanh_c = np.tanh(c_new)
        do = dh * tanh_c
        dc = dc + dh * o * (1.0 - tanh_c ** 2)
        di = dc * g
        df = dc * c_prev
        dg = dc * i
        dz = np.concatenate(
            [di * i * (1.0 - i), df * f * (1.0 - f), dg * (1.0 - g ** 2), do * o * (1.0 - o)],
            axis=1,
        )
        dw += xt.T @ dz
        du += h_prev.T @ dz
        db += dz.sum(axis=0)
        dx[:, t, :] += dz @ w.T
        dh = dz @ u.T
        dc = dc * f
    return dx, dw, du, db


def bilstm_forward(x, wf, uf, bf, wb, ub, bb):
    """(B, L, E) -> (B, 2H): final hidden states of both directions, concatenated."""
    h_fwd, cache_fwd = lstm_forward(x, wf, uf, bf, reverse=False)
    h_bwd, cache_bwd = lstm_forward(x, wb, ub, bb, reverse=True)
    return np.concatenate([h_fwd, h_bwd], axis=1), (cache_fwd, cache_bwd, uf.shape[0])


def bilstm_backward(dy, cache):
    cache_fwd, cache_bwd, hidden = cache
    dx_f, dwf, duf, dbf = lstm_backward(dy[:, :hidden], cache_fwd)
    dx_b, dwb, dub, dbb = lstm_backward(dy[:, hidden:], cache_bwd)
    return dx_f + dx_b, {"wf": dwf, "uf": duf, "bf": dbf, "wb": dwb, "ub": dub, "bb": dbb}


# ---------------------------------------------------------------------------
# Inverted dropout
# ---------------------------------------------------------------------------

def dropout_forward(x, rate, rng, training):
    """Identity at inference; masked and rescaled by 1/(1-rate) while training."""
    if not training or rate == 0.0:
        return x, None
    keep = 1.0 - rate
    mask = (rng.random(x.shape) < keep).astype(np.float64) / keep
    return x * mask, mask


def dropout_backward(dy, mask):
    return dy if mask is None else dy * mask
