"""Minimal reverse-mode autodiff over float64 numpy arrays.

Just enough machinery for the two generators and their discriminators:
elementwise math, reductions, channel concat, conv2d, block-mean
pooling, bilinear resize, and flow warping. The conv/warp/resize
primitives dispatch through :mod:`fitroom.kernels`.
"""

from __future__ import annotations

import numpy as np

from . import kernels


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_vjp")

    def __init__(self, data, requires_grad=False, parents=(), vjp=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = parents
        self._vjp = vjp

    @property
    def shape(self):
        return self.data.shape

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def zero_grad(self):
        self.grad = None

    def backward(self):
        if self.data.size != 1:
            raise ValueError("backward() needs a scalar output")
        topo, seen = [], set()

        def visit(t):
            if id(t) in seen or not t.requires_grad:
                return
            seen.add(id(t))
            for p in t._parents:
                visit(p)
            topo.append(t)

        visit(self)
        self.grad = np.ones_like(self.data)
        for t in reversed(topo):
            if t._vjp is not None:
                t._vjp(t.grad)

    def _accum(self, g):
        if self.grad is None:
            self.grad = g.copy()
        else:
            self.grad += g

    # operator sugar -------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __sub__(self, other):
        return add(self, mul(other, -1.0))

    def __rsub__(self, other):
        return add(mul(self, -1.0), other)

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            return mul(self, power(other, -1.0))
        return mul(self, 1.0 / other)

    def __neg__(self):
        return mul(self, -1.0)

    def __pow__(self, exponent):
        return power(self, exponent)

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        return tmean(self, axis, keepdims)

    def reshape(self, *shape):
        return reshape(self, shape)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _unbroadcast(g, shape):
    """Sum gradient g down to `shape` after numpy broadcasting."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


def _make(data, parents, vjp):
    req = any(p.requires_grad for p in parents)
    return Tensor(data, req, tuple(p for p in parents if p.requires_grad),
                  vjp if req else None)


def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    out_data = a.data + b.data

    def vjp(g):
        if a.requires_grad:
            a._accum(_unbroadcast(g, a.data.shape))
        if b.requires_grad:
            b._accum(_unbroadcast(g, b.data.shape))

    return _make(out_data, (a, b), vjp)


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    out_data = a.data * b.data

    def vjp(g):
        if a.requires_grad:
            a._accum(_unbroadcast(g * b.data, a.data.shape))
        if b.requires_grad:
            b._accum(_unbroadcast(g * a.data, b.data.shape))

    return _make(out_data, (a, b), vjp)


def power(a, exponent):
    a = as_tensor(a)
    out_data = a.data ** exponent

    def vjp(g):
        a._accum(g * exponent * a.data ** (exponent - 1))

    return _make(out_data, (a,), vjp)


def exp(a):
    a = as_tensor(a)
    out_data = np.exp(a.data)

    def vjp(g):
        a._accum(g * out_data)

    return _make(out_data, (a,), vjp)


def log(a):
    a = as_tensor(a)

    def vjp(g):
        a._accum(g / a.data)

    return _make(np.log(a.data), (a,), vjp)


def sqrt(a):
    a = as_tensor(a)
    out_data = np.sqrt(a.data)

    def vjp(g):
        a._accum(g * 0.5 / out_data)

    return _make(out_data, (a,), vjp)


def absolute(a):
    a = as_tensor(a)

    def vjp(g):
        a._accum(g * np.sign(a.data))

    return _make(np.abs(a.data), (a,), vjp)


def tanh(a):
    a = as_tensor(a)
    out_data = np.tanh(a.data)

    def vjp(g):
        a._accum(g * (1.0 - out_data * out_data))

    return _make(out_data, (a,), vjp)


def sigmoid(a):
    a = as_tensor(a)
    out_data = 1.0 / (1.0 + np.exp(-a.data))

    def vjp(g):
        a._accum(g * out_data * (1.0 - out_data))

    return _make(out_data, (a,), vjp)


def leaky_relu(a, alpha=0.2):
    a = as_tensor(a)
    pos = a.data > 0
    out_data = np.where(pos, a.data, alpha * a.data)

    def vjp(g):
        a._accum(g * np.where(pos, 1.0, alpha))

    return _make(out_data, (a,), vjp)


def relu(a):
    return leaky_relu(a, 0.0)


def tsum(a, axis=None, keepdims=False):
    a = as_tensor(a)
    out_data = a.data.sum(axis=axis, keepdims=keepdims)

    def vjp(g):
        gg = g
        if not keepdims and axis is not None:
            gg = np.expand_dims(g, axis)
        a._accum(np.broadcast_to(gg, a.data.shape).copy()
                 if gg.shape != a.data.shape else gg)

    return _make(out_data, (a,), vjp)


def tmean(a, axis=None, keepdims=False):
    a = as_tensor(a)
    count = a.data.size if axis is None else np.prod(
        [a.data.shape[i] for i in np.atleast_1d(axis)])
    return mul(tsum(a, axis, keepdims), 1.0 / float(count))


def reshape(a, shape):
    a = as_tensor(a)
    old = a.data.shape

    def vjp(g):
        a._accum(g.reshape(old))

    return _make(a.data.reshape(shape), (a,), vjp)


def concat(tensors, axis=1):
    tensors = [as_tensor(t) for t in tensors]
    sizes = [t.data.shape[axis] for t in tensors]
    out_data = np.concatenate([t.data for t in tensors], axis=axis)
    offsets = np.cumsum([0] + sizes)

    def vjp(g):
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            if t.requires_grad:
                sl = [slice(None)] * g.ndim
                sl[axis] = slice(lo, hi)
                t._accum(g[tuple(sl)])

    return _make(out_data, tuple(tensors), vjp)


def conv2d(x, w, b=None, stride=1, pad=0):
    """NCHW convolution; w is (Cout, Cin, kh, kw), b is (Cout,)."""
    x, w = as_tensor(x), as_tensor(w)
    out_data = kernels.conv2d_forward(x.data, w.data, stride, pad)
    if b is not None:
        b = as_tensor(b)
        out_data = out_data + b.data[None, :, None, None]
        parents = (x, w, b)
    else:
        parents = (x, w)
    kh, kw = w.data.shape[2], w.data.shape[3]
    in_h, in_w = x.data.shape[2], x.data.shape[3]

    def vjp(g):
        g = np.ascontiguousarray(g)
        if x.requires_grad:
            x._accum(kernels.conv2d_backward_input(g, w.data, in_h, in_w,
                                                   stride, pad))
        if w.requires_grad:
            w._accum(kernels.conv2d_backward_weight(x.data, g, kh, kw,
                                                    stride, pad))
        if b is not None and b.requires_grad:
            b._accum(g.sum(axis=(0, 2, 3)))

    return _make(out_data, parents, vjp)


def block_mean(a, factor):
    """Mean over factor x factor blocks; trailing partial blocks keep
    their own (smaller) averages so constants are preserved exactly."""
    a = as_tensor(a)
    n, c, h, w = a.data.shape
    oh = -(-h // factor)
    ow = -(-w // factor)
    counts = np.zeros((oh, ow))
    out_data = np.zeros((n, c, oh, ow))
    for i in range(oh):
        for j in range(ow):
            blk = a.data[:, :, i * factor:(i + 1) * factor,
                         j * factor:(j + 1) * factor]
            counts[i, j] = blk.shape[2] * blk.shape[3]
            out_data[:, :, i, j] = blk.mean(axis=(2, 3))

    def vjp(g):
        gx = np.zeros_like(a.data)
        for i in range(oh):
            for j in range(ow):
                gx[:, :, i * factor:(i + 1) * factor,
                   j * factor:(j + 1) * factor] = (
                    g[:, :, i:i + 1, j:j + 1] / counts[i, j])
        a._accum(gx)

    return _make(out_data, (a,), vjp)


def resize_bilinear(a, out_h, out_w):
    a = as_tensor(a)
    in_h, in_w = a.data.shape[2], a.data.shape[3]
    if (in_h, in_w) == (out_h, out_w):
        return a
    out_data = kernels.resize_forward(np.ascontiguousarray(a.data), out_h, out_w)

    def vjp(g):
        a._accum(kernels.resize_backward(np.ascontiguousarray(g), in_h, in_w))

    return _make(out_data, (a,), vjp)


def warp(x, flow):
    """Bilinear warp of x (N,C,H,W) by flow (N,2,H,W); zero padding.

    Gradients propagate to both the image and the flow."""
    x, flow = as_tensor(x), as_tensor(flow)
    xd = np.ascontiguousarray(x.data)
    fd = np.ascontiguousarray(flow.data)
    out_data = kernels.warp_forward(xd, fd)

    def vjp(g):
        gx, gflow = kernels.warp_backward(xd, fd, np.ascontiguousarray(g))
        if x.requires_grad:
            x._accum(gx)
        if flow.requires_grad:
            flow._accum(gflow)

    return _make(out_data, (x, flow), vjp)


def softmax(a, axis=1):
    a = as_tensor(a)
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out_data = e / e.sum(axis=axis, keepdims=True)

    def vjp(g):
        dot = (g * out_data).sum(axis=axis, keepdims=True)
        a._accum(out_data * (g - dot))

    return _make(out_data, (a,), vjp)


def softmax_cross_entropy(logits, labels):
    """Mean per-pixel cross entropy.

    logits: (N, K, H, W) Tensor; labels: (N, H, W) integer array."""
    logits = as_tensor(logits)
    n, k, h, w = logits.data.shape
    shifted = logits.data - logits.data.max(axis=1, keepdims=True)
    logz = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    logp = shifted - logz
    idx = (np.arange(n)[:, None, None], labels,
           np.arange(h)[None, :, None], np.arange(w)[None, None, :])
    picked = logp.transpose(0, 2, 3, 1)[
        np.arange(n)[:, None, None], np.arange(h)[None, :, None],
        np.arange(w)[None, None, :], labels]
    out_data = -picked.mean()
    del idx

    def vjp(g):
        p = np.exp(logp)
        onehot = np.zeros_like(p)
        kidx = labels.reshape(n, 1, h, w)
        np.put_along_axis(onehot, kidx, 1.0, axis=1)
        logits._accum(g * (p - onehot) / (n * h * w))

    return _make(out_data, (logits,), vjp)
