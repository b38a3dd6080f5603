"""Small layer/module toolkit on top of the autodiff engine."""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor


class Module:
    """Base class; parameters are Tensor attributes with requires_grad."""

    def named_parameters(self, prefix: str = "") -> dict[str, Tensor]:
        out: dict[str, Tensor] = {}
        for name, val in vars(self).items():
            key = f"{prefix}{name}"
            if isinstance(val, Tensor) and val.requires_grad:
                out[key] = val
            elif isinstance(val, Module):
                out.update(val.named_parameters(f"{key}."))
            elif isinstance(val, (list, tuple)):
                for i, item in enumerate(val):
                    if isinstance(item, Module):
                        out.update(item.named_parameters(f"{key}.{i}."))
                    elif isinstance(item, Tensor) and item.requires_grad:
                        out[f"{key}.{i}"] = item
        return out

    def state_dict(self) -> dict[str, np.ndarray]:
        return {k: v.data.copy() for k, v in self.named_parameters().items()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        params = self.named_parameters()
        missing = set(params) - set(state)
        extra = set(state) - set(params)
        if missing or extra:
            raise ValueError(
                f"state dict mismatch; missing={sorted(missing)} extra={sorted(extra)}")
        for k, v in params.items():
            arr = np.asarray(state[k], dtype=np.float64)
            if arr.shape != v.data.shape:
                raise ValueError(
                    f"parameter {k}: shape {arr.shape} != {v.data.shape}")
            v.data = arr.copy()

    def zero_grad(self) -> None:
        for p in self.named_parameters().values():
            p.zero_grad()

    def parameter_count(self) -> int:
        return sum(p.data.size for p in self.named_parameters().values())


class Conv2d(Module):
    """3x3-style NCHW convolution with He init (or zero init for heads)."""

    def __init__(self, cin, cout, k=3, stride=1, pad=None, bias=True,
                 rng=None, zero_init=False, bias_value=0.0):
        self.stride = stride
        self.pad = k // 2 if pad is None else pad
        if zero_init:
            w = np.zeros((cout, cin, k, k))
        else:
            std = np.sqrt(2.0 / (cin * k * k))
            w = rng.normal(0.0, std, size=(cout, cin, k, k))
        self.w = Tensor(w, requires_grad=True)
        self.b = Tensor(np.full(cout, float(bias_value)),
                        requires_grad=True) if bias else None

    def __call__(self, x: Tensor) -> Tensor:
        return ad.conv2d(x, self.w, self.b, stride=self.stride, pad=self.pad)


def out_size(n_in: int, k: int, stride: int, pad: int) -> int:
    """Spatial size produced by a conv layer: floor((n+2p-k)/s) + 1."""
    return (n_in + 2 * pad - k) // stride + 1


def instance_norm(x: Tensor, eps: float = 1e-5) -> Tensor:
    """Per-sample, per-channel normalization over the spatial axes."""
    mu = x.mean(axis=(2, 3), keepdims=True)
    centered = x - mu
    var = (centered * centered).mean(axis=(2, 3), keepdims=True)
    return centered * ad.power(var + eps, -0.5)


def guarded_rel_error(a: float, b: float) -> float:
    """|a-b| scaled by magnitude; absolute once both drop below 1e-3."""
    return abs(a - b) / max(abs(a) + abs(b), 1e-3)


def finite_difference_check(build_loss, params: dict[str, Tensor],
                            eps: float = 1e-5) -> float:
    """Compare analytic gradients against central differences.

    Returns the worst guarded relative error over every element of every
    parameter. build_loss() must rebuild the graph from current values.
    """
    for p in params.values():
        p.zero_grad()
    loss = build_loss()
    loss.backward()
    analytic = {k: (p.grad.copy() if p.grad is not None else
                    np.zeros_like(p.data)) for k, p in params.items()}
    worst = 0.0
    for k, p in params.items():
        flat = p.data.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            hi = build_loss().item()
            flat[i] = orig - eps
            lo = build_loss().item()
            flat[i] = orig
            fd = (hi - lo) / (2.0 * eps)
            worst = max(worst, guarded_rel_error(analytic[k].reshape(-1)[i], fd))
    return worst


def one_hot_labels(labels: np.ndarray, num_classes: int) -> np.ndarray:
    """(N, H, W) int labels -> (N, K, H, W) float64 one-hot planes."""
    n, h, w = labels.shape
    out = np.zeros((n, num_classes, h, w))
    np.put_along_axis(out, labels.reshape(n, 1, h, w).astype(np.int64), 1.0, axis=1)
    return out
