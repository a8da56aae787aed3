"""Minimal reverse-mode automatic differentiation over float64 arrays.

DiffArray nodes record their parents together with vector-Jacobian
closures; backward() runs a topological sweep accumulating gradients.
Recurrent and convolution layers are fused ops with hand-written
backward passes so graph bookkeeping stays off the per-timestep path.
"""
from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .activations import ActivationSpec, apply as act_apply, apply_derivative as act_derivative
from .activations import _sital_param_partials, sital as sital_fn, sital_derivative

__all__ = [
    "DiffArray",
    "add",
    "sub",
    "mul",
    "matmul",
    "tanh",
    "sigmoid",
    "activation",
    "sital_op",
    "narrow",
    "concat",
    "reshape",
    "reduce_max",
    "mean_all",
    "softmax",
    "cross_entropy",
    "lstm_layer",
    "conv1d",
    "maxpool",
    "grad_check",
]


class DiffArray:
    """A value in the computation graph with a gradient slot."""

    __slots__ = ("data", "grad", "_parents")

    def __init__(self, data, parents=()):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self._parents = parents

    @property
    def shape(self):
        return self.data.shape

    def __repr__(self):
        return f"DiffArray(shape={self.data.shape})"

    def backward(self):
        """Accumulate gradients of this scalar into every ancestor."""
        if self.data.ndim != 0 and self.data.size != 1:
            raise ValueError("backward() starts from a scalar value")
        topo: list[DiffArray] = []
        seen: set[int] = set()
        stack: list[tuple[DiffArray, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for parent, _ in node._parents:
                if id(parent) not in seen:
                    stack.append((parent, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(topo):
            if node.grad is None:
                continue
            for parent, vjp in node._parents:
                g = vjp(node.grad)
                parent.grad = g if parent.grad is None else parent.grad + g


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum-reduce a broadcast gradient back to the parent shape."""
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, dim in enumerate(shape) if dim == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def add(a: DiffArray, b: DiffArray) -> DiffArray:
    return DiffArray(
        a.data + b.data,
        parents=(
            (a, lambda g: _unbroadcast(g, a.data.shape)),
            (b, lambda g: _unbroadcast(g, b.data.shape)),
        ),
    )


def sub(a: DiffArray, b: DiffArray) -> DiffArray:
    return DiffArray(
        a.data - b.data,
        parents=(
            (a, lambda g: _unbroadcast(g, a.data.shape)),
            (b, lambda g: _unbroadcast(-g, b.data.shape)),
        ),
    )


def mul(a: DiffArray, b: DiffArray) -> DiffArray:
    return DiffArray(
        a.data * b.data,
        parents=(
            (a, lambda g: _unbroadcast(g * b.data, a.data.shape)),
            (b, lambda g: _unbroadcast(g * a.data, b.data.shape)),
        ),
    )


def matmul(a: DiffArray, b: DiffArray) -> DiffArray:
    return DiffArray(
        a.data @ b.data,
        parents=(
            (a, lambda g: _matmul_grad_a(g, a.data, b.data)),
            (b, lambda g: _matmul_grad_b(g, a.data, b.data)),
        ),
    )


def _matmul_grad_a(g, a, b):
    if a.ndim == 1 and b.ndim == 2:
        return g @ b.T
    if a.ndim == 2 and b.ndim == 1:
        return np.outer(g, b)
    return g @ b.T


def _matmul_grad_b(g, a, b):
    if a.ndim == 1 and b.ndim == 2:
        return np.outer(a, g)
    if a.ndim == 2 and b.ndim == 1:
        return a.T @ g
    return a.T @ g


def tanh(t: DiffArray) -> DiffArray:
    out = np.tanh(t.data)
    return DiffArray(out, parents=((t, lambda g: g * (1.0 - out * out)),))


def sigmoid(t: DiffArray) -> DiffArray:
    out = np.exp(-np.logaddexp(0.0, -t.data))
    return DiffArray(out, parents=((t, lambda g: g * out * (1.0 - out)),))


def activation(t: DiffArray, spec: ActivationSpec) -> DiffArray:
    """Fixed-parameter activation; for trainable sital use sital_op."""
    return DiffArray(
        act_apply(spec, t.data),
        parents=((t, lambda g: g * act_derivative(spec, t.data)),),
    )


def sital_op(t: DiffArray, gamma: DiffArray, eta: DiffArray) -> DiffArray:
    """sital with gradients into x and both trainable parameters."""
    gval = float(gamma.data)
    eval_ = float(eta.data)
    x = t.data

    def vjp_gamma(g):
        dg, _ = _sital_param_partials(x, gval, eval_)
        return np.array(np.sum(g * dg))

    def vjp_eta(g):
        _, de = _sital_param_partials(x, gval, eval_)
        return np.array(np.sum(g * de))

    return DiffArray(
        sital_fn(x, gval, eval_),
        parents=(
            (t, lambda g: g * sital_derivative(x, gval, eval_)),
            (gamma, vjp_gamma),
            (eta, vjp_eta),
        ),
    )


def narrow(t: DiffArray, axis: int, start: int, length: int) -> DiffArray:
    index = [slice(None)] * t.data.ndim
    index[axis] = slice(start, start + length)
    index = tuple(index)

    def vjp(g):
        out = np.zeros_like(t.data)
        out[index] = g
        return out

    return DiffArray(t.data[index], parents=((t, vjp),))


def concat(parts: list[DiffArray], axis: int) -> DiffArray:
    sizes = [p.data.shape[axis] for p in parts]
    offsets = np.concatenate([[0], np.cumsum(sizes)])

    def make_vjp(i):
        def vjp(g):
            index = [slice(None)] * g.ndim
            index[axis] = slice(int(offsets[i]), int(offsets[i + 1]))
            return g[tuple(index)]

        return vjp

    return DiffArray(
        np.concatenate([p.data for p in parts], axis=axis),
        parents=tuple((p, make_vjp(i)) for i, p in enumerate(parts)),
    )


def reshape(t: DiffArray, shape: tuple) -> DiffArray:
    old = t.data.shape
    return DiffArray(t.data.reshape(shape), parents=((t, lambda g: g.reshape(old)),))


def reduce_max(t: DiffArray, axis: int) -> DiffArray:
    """Max along one axis; gradient flows to the first max position."""
    idx = np.expand_dims(np.argmax(t.data, axis=axis), axis)
    out = np.take_along_axis(t.data, idx, axis=axis).squeeze(axis)

    def vjp(g):
        full = np.zeros_like(t.data)
        np.put_along_axis(full, idx, np.expand_dims(g, axis), axis=axis)
        return full

    return DiffArray(out, parents=((t, vjp),))


def mean_all(t: DiffArray) -> DiffArray:
    n = t.data.size
    return DiffArray(
        np.asarray(t.data.mean()),
        parents=((t, lambda g: np.full_like(t.data, float(g) / n)),),
    )


def softmax(t: DiffArray) -> DiffArray:
    """Softmax over the last axis."""
    z = t.data - t.data.max(axis=-1, keepdims=True)
    e = np.exp(z)
    out = e / e.sum(axis=-1, keepdims=True)

    def vjp(g):
        dot = np.sum(g * out, axis=-1, keepdims=True)
        return out * (g - dot)

    return DiffArray(out, parents=((t, vjp),))


def cross_entropy(logits: DiffArray, labels) -> DiffArray:
    """Mean cross-entropy from raw scores.

    logits is either a length-K vector with an integer label or an
    (n, K) matrix with n integer labels; computed through logsumexp so
    large scores stay finite.
    """
    z = logits.data
    labels = np.atleast_1d(np.asarray(labels, dtype=np.int64))
    z2 = np.atleast_2d(z)
    if labels.shape[0] != z2.shape[0]:
        raise ValueError("label count does not match logit rows")
    m = z2.max(axis=1, keepdims=True)
    lse = m[:, 0] + np.log(np.exp(z2 - m).sum(axis=1))
    picked = z2[np.arange(z2.shape[0]), labels]
    loss = float(np.mean(lse - picked))

    def vjp(g):
        soft = np.exp(z2 - m)
        soft /= soft.sum(axis=1, keepdims=True)
        soft[np.arange(z2.shape[0]), labels] -= 1.0
        soft *= float(g) / z2.shape[0]
        return soft.reshape(z.shape)

    return DiffArray(np.asarray(loss), parents=((logits, vjp),))


def lstm_layer(
    x: DiffArray,
    wx: DiffArray,
    wh: DiffArray,
    b: DiffArray,
    reverse: bool = False,
) -> DiffArray:
    """One directional recurrent pass over an (n, d) sequence.

    Gate layout along the weight columns is [input, forget, cell,
    output], each of width h. Boundary hidden and cell states are zero.
    Returns the (n, h) hidden-state sequence; reverse=True processes
    the sequence back to front and returns states in input order.
    """
    xd = x.data[::-1] if reverse else x.data
    n = xd.shape[0]
    h4 = wx.data.shape[1]
    if h4 % 4 != 0:
        raise ValueError("gate weight width must be a multiple of 4")
    h = h4 // 4

    gates = np.empty((n, h4))
    cells = np.empty((n, h))
    tanh_c = np.empty((n, h))
    hidden = np.empty((n, h))
    h_prev = np.zeros(h)
    c_prev = np.zeros(h)
    for t in range(n):
        z = xd[t] @ wx.data + h_prev @ wh.data + b.data
        zi = np.exp(-np.logaddexp(0.0, -z[: 2 * h]))  # input+forget gates
        zg = np.tanh(z[2 * h : 3 * h])
        zo = np.exp(-np.logaddexp(0.0, -z[3 * h :]))
        gates[t, : 2 * h] = zi
        gates[t, 2 * h : 3 * h] = zg
        gates[t, 3 * h :] = zo
        c_prev = zi[h:] * c_prev + zi[:h] * zg
        cells[t] = c_prev
        tanh_c[t] = np.tanh(c_prev)
        h_prev = zo * tanh_c[t]
        hidden[t] = h_prev

    def vjp(grad_out):
        gh = grad_out[::-1] if reverse else grad_out
        dwx = np.zeros_like(wx.data)
        dwh = np.zeros_like(wh.data)
        db = np.zeros_like(b.data)
        dx = np.zeros_like(xd)
        dh_next = np.zeros(h)
        dc_next = np.zeros(h)
        for t in range(n - 1, -1, -1):
            i_g = gates[t, :h]
            f_g = gates[t, h : 2 * h]
            g_g = gates[t, 2 * h : 3 * h]
            o_g = gates[t, 3 * h :]
            c_old = cells[t - 1] if t > 0 else np.zeros(h)
            h_old = hidden[t - 1] if t > 0 else np.zeros(h)
            dh = gh[t] + dh_next
            do = dh * tanh_c[t]
            dc = dc_next + dh * o_g * (1.0 - tanh_c[t] ** 2)
            di = dc * g_g
            df = dc * c_old
            dg = dc * i_g
            dz = np.concatenate(
                [
                    di * i_g * (1.0 - i_g),
                    df * f_g * (1.0 - f_g),
                    dg * (1.0 - g_g * g_g),
                    do * o_g * (1.0 - o_g),
                ]
            )
            dwx += np.outer(xd[t], dz)
            dwh += np.outer(h_old, dz)
            db += dz
            dx[t] = dz @ wx.data.T
            dh_next = dz @ wh.data.T
            dc_next = dc * f_g
        if reverse:
            dx = dx[::-1]
        return dx, dwx, dwh, db

    cache: dict = {}

    def shared(which):
        def inner(g):
            key = id(g)
            if cache.get("key") != key:
                cache["key"] = key
                cache["grads"] = vjp(g)
            return cache["grads"][which]

        return inner

    out = hidden[::-1] if reverse else hidden
    return DiffArray(
        out,
        parents=(
            (x, shared(0)),
            (wx, shared(1)),
            (wh, shared(2)),
            (b, shared(3)),
        ),
    )


def conv1d(
    x: DiffArray,
    kernels: DiffArray,
    bias: DiffArray,
    same_length: bool = False,
) -> DiffArray:
    """1-D convolution over an (L, C) sequence.

    kernels has shape (width, C, F). Valid mode shortens the sequence
    to L-width+1; same_length zero-pads so per-position outputs survive
    for the tagging variant.
    """
    w, c_in, _ = kernels.data.shape
    xd = x.data
    pad_left = 0
    if same_length:
        pad_left = (w - 1) // 2
        pad_right = w - 1 - pad_left
        xd = np.pad(xd, ((pad_left, pad_right), (0, 0)))
    if xd.shape[0] < w:
        raise ValueError(f"sequence length {x.data.shape[0]} shorter than kernel width {w}")
    if xd.shape[1] != c_in:
        raise ValueError(f"channel mismatch: input {xd.shape[1]}, kernels expect {c_in}")
    windows = sliding_window_view(xd, w, axis=0)  # (Lo, C, w)
    out = np.tensordot(windows, kernels.data, axes=((2, 1), (0, 1))) + bias.data

    def vjp_x(g):
        spread = np.tensordot(g, kernels.data, axes=((1,), (2,)))  # (Lo, w, C)
        dx = np.zeros_like(xd)
        lo = g.shape[0]
        for dw in range(w):
            dx[dw : dw + lo] += spread[:, dw, :]
        if same_length:
            dx = dx[pad_left : pad_left + x.data.shape[0]]
        return dx

    def vjp_k(g):
        dk = np.tensordot(windows, g, axes=((0,), (0,)))  # (C, w, F)
        return dk.transpose(1, 0, 2)

    return DiffArray(
        out,
        parents=(
            (x, vjp_x),
            (kernels, vjp_k),
            (bias, lambda g: g.sum(axis=0)),
        ),
    )


def maxpool(t: DiffArray, size: int = 2, stride: int = 2) -> DiffArray:
    """Max-pool along the length axis of an (L, C) sequence, floor mode."""
    if size != stride:
        raise ValueError("only size == stride pooling is supported")
    ld, c = t.data.shape
    lo = ld // size
    if lo < 1:
        raise ValueError(f"sequence length {ld} shorter than pool size {size}")
    blocks = t.data[: lo * size].reshape(lo, size, c)
    idx = np.expand_dims(np.argmax(blocks, axis=1), 1)
    out = np.take_along_axis(blocks, idx, axis=1).squeeze(1)

    def vjp(g):
        full = np.zeros_like(blocks)
        np.put_along_axis(full, idx, np.expand_dims(g, 1), axis=1)
        dx = np.zeros_like(t.data)
        dx[: lo * size] = full.reshape(lo * size, c)
        return dx

    return DiffArray(out, parents=((t, vjp),))


def grad_check(op_handle, point: list[DiffArray], h: float = 1e-5, skip=None) -> float:
    """Worst relative disagreement between analytic and numeric gradients.

    op_handle maps the tensors in `point` to a scalar DiffArray.
    Central differences with step h are compared elementwise against
    the analytic gradient using the denominator max(|g|, |fd|, 1e-8).
    skip(tensor_index, flat_index, value) -> bool excludes elements
    sitting on non-differentiable breakpoints.
    """
    out = op_handle(*point)
    for t in point:
        t.grad = None
    out.backward()
    analytic = [
        np.zeros_like(t.data) if t.grad is None else np.asarray(t.grad, dtype=np.float64)
        for t in point
    ]

    worst = 0.0
    for ti, t in enumerate(point):
        flat = t.data.reshape(-1)
        for fi in range(flat.size):
            if skip is not None and skip(ti, fi, float(flat[fi])):
                continue
            keep = float(flat[fi])
            flat[fi] = keep + h
            up = float(op_handle(*point).data)
            flat[fi] = keep - h
            down = float(op_handle(*point).data)
            flat[fi] = keep
            fd = (up - down) / (2.0 * h)
            g = float(analytic[ti].reshape(-1)[fi])
            err = abs(g - fd) / max(abs(g), abs(fd), 1e-8)
            worst = max(worst, err)
    return worst
