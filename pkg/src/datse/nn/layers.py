"""Network layers: LSTM (both directions), BLSTM concatenation, dense, softmax.

The LSTM forward records one fused tape entry whose backward runs full
backpropagation through time. The strictly sequential recurrences (one small
matmul plus elementwise gate math per timestep) are JIT-compiled with numba;
everything that can be batched over all timesteps (input projections, weight
gradient reductions) is a single BLAS matmul outside the loop.

Sequence inputs are (T, input_dim) or batched (B, T, input_dim). Initial
hidden and cell states are zero. Gate order along the 4H axis is fixed as
[input, forget, cell, output] and the forget-gate bias initializes to 1.
"""

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .tensor import DEFAULT_DTYPE, Tape, Tensor

GATE_ORDER = "ifgo"


@njit(cache=True)
def _lstm_recurrence(pre, u_t, gates, cells, tanh_c, hs):
    """In-place forward recurrence. pre holds x@W.T + b for every step;
    gates/cells/tanh_c/hs come in empty and leave filled."""
    bsz, t_len, four_h = pre.shape
    hid = four_h // 4
    h = np.zeros((bsz, hid), dtype=pre.dtype)
    c = np.zeros((bsz, hid), dtype=pre.dtype)
    for t in range(t_len):
        ah = np.dot(h, u_t)
        for i in range(bsz):
            for j in range(four_h):
                a = pre[i, t, j] + ah[i, j]
                if 2 * hid <= j < 3 * hid:
                    g = math.tanh(a)
                else:
                    g = 1.0 / (1.0 + math.exp(-a))
                gates[i, t, j] = g
        for i in range(bsz):
            for j in range(hid):
                cn = gates[i, t, hid + j] * c[i, j] + gates[i, t, j] * gates[i, t, 2 * hid + j]
                c[i, j] = cn
                tc = math.tanh(cn)
                hn = gates[i, t, 3 * hid + j] * tc
                h[i, j] = hn
                cells[i, t, j] = cn
                tanh_c[i, t, j] = tc
                hs[i, t, j] = hn


@njit(cache=True)
def _lstm_bptt(g_out, gates, cells, tanh_c, u, d_pre):
    """In-place reverse recurrence filling d_pre (gradients of the gate
    pre-activations); weight gradients are reduced outside with one matmul."""
    bsz, t_len, four_h = d_pre.shape
    hid = four_h // 4
    dh = np.zeros((bsz, hid), dtype=d_pre.dtype)
    dc = np.zeros((bsz, hid), dtype=d_pre.dtype)
    for t in range(t_len - 1, -1, -1):
        for i in range(bsz):
            for j in range(hid):
                gi = gates[i, t, j]
                gf = gates[i, t, hid + j]
                gg = gates[i, t, 2 * hid + j]
                go = gates[i, t, 3 * hid + j]
                tc = tanh_c[i, t, j]
                c_prev = cells[i, t - 1, j] if t > 0 else 0.0
                dh_t = g_out[i, t, j] + dh[i, j]
                do = dh_t * tc
                dc_t = dh_t * go * (1.0 - tc * tc) + dc[i, j]
                d_pre[i, t, j] = dc_t * gg * gi * (1.0 - gi)
                d_pre[i, t, hid + j] = dc_t * c_prev * gf * (1.0 - gf)
                d_pre[i, t, 2 * hid + j] = dc_t * gi * (1.0 - gg * gg)
                d_pre[i, t, 3 * hid + j] = do * go * (1.0 - go)
                dc[i, j] = dc_t * gf
        dh = np.dot(np.ascontiguousarray(d_pre[:, t]), u)


@dataclass
class LstmLayer:
    input_dim: int
    hidden_dim: int
    w: Tensor  # (4H, input_dim)
    u: Tensor  # (4H, hidden_dim)
    b: Tensor  # (4H,)
    direction: str = "forward"

    def params(self):
        return [self.w, self.u, self.b]


@dataclass
class DenseLayer:
    input_dim: int
    output_dim: int
    w: Tensor  # (output_dim, input_dim)
    b: Tensor  # (output_dim,)

    def params(self):
        return [self.w, self.b]


def init_lstm(input_dim, hidden_dim, rng, direction="forward", dtype=DEFAULT_DTYPE) -> LstmLayer:
    """uniform(-k, k) with k = 1/sqrt(fan_in); forget bias 1, others 0."""
    if direction not in ("forward", "backward"):
        raise ValueError(f"direction must be forward or backward, got {direction!r}")
    kw = 1.0 / np.sqrt(input_dim)
    ku = 1.0 / np.sqrt(hidden_dim)
    w = rng.uniform(-kw, kw, size=(4 * hidden_dim, input_dim)).astype(dtype)
    u = rng.uniform(-ku, ku, size=(4 * hidden_dim, hidden_dim)).astype(dtype)
    b = np.zeros(4 * hidden_dim, dtype=dtype)
    b[hidden_dim : 2 * hidden_dim] = 1.0
    return LstmLayer(
        input_dim, hidden_dim,
        Tensor(w, requires_grad=True), Tensor(u, requires_grad=True),
        Tensor(b, requires_grad=True), direction,
    )


def init_dense(input_dim, output_dim, rng, dtype=DEFAULT_DTYPE) -> DenseLayer:
    k = 1.0 / np.sqrt(input_dim)
    w = rng.uniform(-k, k, size=(output_dim, input_dim)).astype(dtype)
    b = np.zeros(output_dim, dtype=dtype)
    return DenseLayer(input_dim, output_dim, Tensor(w, requires_grad=True), Tensor(b, requires_grad=True))


def _as_batched(values, want_dim, what):
    if values.ndim == 2:
        batched = values[None, :, :]
    elif values.ndim == 3:
        batched = values
    else:
        raise ValueError(f"{what} must be (T, D) or (B, T, D), got shape {values.shape}")
    if batched.shape[-1] != want_dim:
        raise ValueError(f"{what} feature dim {batched.shape[-1]} != layer input dim {want_dim}")
    if batched.shape[1] < 1:
        raise ValueError(f"{what} needs at least one frame")
    return batched, values.ndim == 2


def lstm_forward(layer: LstmLayer, x: Tensor, tape: Tape = None) -> Tensor:
    """Run the LSTM over a sequence; backward-direction layers see time reversed
    and un-reverse their output."""
    xb, squeeze = _as_batched(x.values, layer.input_dim, "lstm input")
    reverse = layer.direction == "backward"
    if reverse:
        xb = xb[:, ::-1, :]
    bsz, t_len, _ = xb.shape
    hid = layer.hidden_dim
    w, u, b = layer.w.values, layer.u.values, layer.b.values

    pre = xb.reshape(bsz * t_len, -1) @ w.T
    pre += b
    pre = np.ascontiguousarray(pre.reshape(bsz, t_len, 4 * hid))

    # per-step activations saved for backpropagation through time
    gates = np.empty((bsz, t_len, 4 * hid), dtype=pre.dtype)
    cells = np.empty((bsz, t_len, hid), dtype=pre.dtype)
    tanh_c = np.empty((bsz, t_len, hid), dtype=pre.dtype)
    hs = np.empty((bsz, t_len, hid), dtype=pre.dtype)
    _lstm_recurrence(pre, np.ascontiguousarray(u.T), gates, cells, tanh_c, hs)

    ys = hs[:, ::-1, :] if reverse else hs
    out_values = ys[0] if squeeze else ys
    out = Tensor(np.ascontiguousarray(out_values))
    if tape is None:
        return out

    def backward_fn(grad_out):
        g = grad_out[None, :, :] if squeeze else grad_out
        if reverse:
            g = g[:, ::-1, :]
        d_pre = np.empty((bsz, t_len, 4 * hid), dtype=pre.dtype)
        _lstm_bptt(np.ascontiguousarray(g), gates, cells, tanh_c,
                   np.ascontiguousarray(u), d_pre)

        d_pre2 = d_pre.reshape(bsz * t_len, 4 * hid)
        dw = d_pre2.T @ xb.reshape(bsz * t_len, -1)
        h_prev = np.concatenate(
            [np.zeros((bsz, 1, hid), dtype=pre.dtype), hs[:, :-1, :]], axis=1
        )
        du = d_pre2.T @ h_prev.reshape(bsz * t_len, hid)
        db = d_pre2.sum(axis=0)
        dx = d_pre @ w
        if reverse:
            dx = dx[:, ::-1, :]
        if squeeze:
            dx = dx[0]
        return dw, du, db, np.ascontiguousarray(dx)

    return tape.record([layer.w, layer.u, layer.b, x], out, backward_fn)


def concat_features(a: Tensor, b: Tensor, tape: Tape = None) -> Tensor:
    """Concatenate along the feature (last) axis."""
    if a.values.shape[:-1] != b.values.shape[:-1]:
        raise ValueError(f"leading shapes differ: {a.shape} vs {b.shape}")
    out = Tensor(np.concatenate([a.values, b.values], axis=-1))
    if tape is None:
        return out
    split = a.values.shape[-1]

    def backward_fn(grad_out):
        return grad_out[..., :split], grad_out[..., split:]

    return tape.record([a, b], out, backward_fn)


def blstm_forward(fwd: LstmLayer, bwd: LstmLayer, x: Tensor, tape: Tape = None) -> Tensor:
    """Per-frame concatenation of a forward and a backward LSTM pass."""
    if fwd.hidden_dim != bwd.hidden_dim:
        raise ValueError(
            f"directional hidden dims differ: {fwd.hidden_dim} vs {bwd.hidden_dim}"
        )
    return concat_features(lstm_forward(fwd, x, tape), lstm_forward(bwd, x, tape), tape)


def dense_forward(layer: DenseLayer, x: Tensor, tape: Tape = None) -> Tensor:
    """Affine map on the last axis; no activation."""
    if x.values.shape[-1] != layer.input_dim:
        raise ValueError(
            f"dense input dim {x.values.shape[-1]} != layer input dim {layer.input_dim}"
        )
    w, b = layer.w.values, layer.b.values
    out = Tensor(x.values @ w.T + b)
    if tape is None:
        return out

    def backward_fn(grad_out):
        g2 = grad_out.reshape(-1, layer.output_dim)
        x2 = x.values.reshape(-1, layer.input_dim)
        return g2.T @ x2, g2.sum(axis=0), grad_out @ w

    return tape.record([layer.w, layer.b, x], out, backward_fn)


def softmax(z: Tensor, tape: Tape = None) -> Tensor:
    """Max-subtracted softmax over the last axis."""
    if not np.all(np.isfinite(z.values)):
        raise ValueError("softmax inputs must be finite")
    shifted = z.values - np.max(z.values, axis=-1, keepdims=True)
    e = np.exp(shifted)
    p = e / e.sum(axis=-1, keepdims=True)
    out = Tensor(p)
    if tape is None:
        return out

    def backward_fn(grad_out):
        dot = np.sum(grad_out * p, axis=-1, keepdims=True)
        return (p * (grad_out - dot),)

    return tape.record([z], out, backward_fn)


def select_last_frame(x: Tensor, tape: Tape = None) -> Tensor:
    """Pick the final timestep of a sequence: (.., T, D) -> (.., D)."""
    if x.values.ndim < 2:
        raise ValueError(f"need a sequence, got shape {x.shape}")
    out = Tensor(np.ascontiguousarray(x.values[..., -1, :]))
    if tape is None:
        return out

    def backward_fn(grad_out):
        dx = np.zeros_like(x.values)
        dx[..., -1, :] = grad_out
        return (dx,)

    return tape.record([x], out, backward_fn)
