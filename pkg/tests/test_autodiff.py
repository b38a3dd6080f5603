import numpy as np
import pytest

from fitroom import autodiff as ad
from fitroom.autodiff import Tensor
from fitroom.nn import (Conv2d, Module, finite_difference_check, instance_norm,
                        one_hot_labels, out_size)

rng = np.random.default_rng(7)


def check(build, params, tol=1e-6):
    err = finite_difference_check(build, params)
    assert err < tol, f"worst relative error {err}"


def test_elementwise_and_broadcast_gradients():
    a = Tensor(rng.normal(size=(3, 4)), requires_grad=True)
    b = Tensor(rng.normal(size=(1, 4)), requires_grad=True)

    def build():
        h = a * b + b - a * 0.5
        h = ad.tanh(h) + ad.sigmoid(a) * ad.exp(b * 0.1)
        return (h * h).mean()

    check(build, {"a": a, "b": b})


def test_reductions_reshape_concat():
    a = Tensor(rng.normal(size=(2, 3, 4)), requires_grad=True)
    b = Tensor(rng.normal(size=(2, 1, 4)), requires_grad=True)

    def build():
        joined = ad.concat([a, b], axis=1)
        s = joined.sum(axis=2).mean(axis=0)
        return (ad.reshape(s, (4,)) ** 2).sum()

    check(build, {"a": a, "b": b})


def test_conv_and_pool_gradients():
    x = Tensor(rng.normal(size=(1, 2, 6, 5)), requires_grad=True)
    conv = Conv2d(2, 3, 3, stride=2, rng=rng)

    def build():
        h = ad.leaky_relu(conv(x))
        return (ad.block_mean(h, 2) ** 2).sum()

    check(build, {"x": x, "w": conv.w, "b": conv.b})


def test_warp_and_resize_gradients():
    x = Tensor(rng.normal(size=(1, 2, 5, 6)), requires_grad=True)
    flow = Tensor(rng.normal(size=(1, 2, 5, 6)) * 0.7, requires_grad=True)

    def build():
        h = ad.warp(x, flow)
        h = ad.resize_bilinear(h, 9, 4)
        return ad.absolute(h).mean()

    check(build, {"x": x, "flow": flow}, tol=1e-5)


def test_softmax_cross_entropy_uniform_logits():
    logits = Tensor(np.zeros((1, 20, 3, 4)))
    labels = rng.integers(0, 20, size=(1, 3, 4))
    loss = ad.softmax_cross_entropy(logits, labels)
    assert abs(loss.item() - np.log(20)) < 1e-12


def test_softmax_cross_entropy_gradient():
    logits = Tensor(rng.normal(size=(1, 5, 3, 2)), requires_grad=True)
    labels = rng.integers(0, 5, size=(1, 3, 2))
    check(lambda: ad.softmax_cross_entropy(logits, labels),
          {"logits": logits})


def test_instance_norm_zero_mean_unit_variance():
    x = Tensor(rng.normal(size=(2, 3, 6, 5)) * 4 + 2)
    out = instance_norm(x).data
    assert np.abs(out.mean(axis=(2, 3))).max() < 1e-10
    assert np.abs(out.var(axis=(2, 3)) - 1).max() < 1e-4


def test_block_mean_preserves_constants_on_ragged_edges():
    x = Tensor(np.full((1, 1, 5, 7), 3.25))
    out = ad.block_mean(x, 2)
    assert out.data.shape == (1, 1, 3, 4)
    assert np.all(out.data == 3.25)


def test_detach_blocks_gradients():
    a = Tensor(rng.normal(size=(3,)), requires_grad=True)
    loss = (a.detach() * 2.0).sum() + a.sum()
    loss.backward()
    assert np.allclose(a.grad, 1.0)


def test_backward_requires_scalar():
    a = Tensor(rng.normal(size=(3,)), requires_grad=True)
    with pytest.raises(ValueError):
        (a * 2).backward()


def test_one_hot_labels():
    labels = np.array([[[0, 2], [1, 2]]])
    oh = one_hot_labels(labels, 3)
    assert oh.shape == (1, 3, 2, 2)
    assert oh[0, :, 0, 0].tolist() == [1, 0, 0]
    assert oh[0, :, 1, 1].tolist() == [0, 0, 1]
    assert np.all(oh.sum(axis=1) == 1)


def test_out_size_formula():
    # floor((n + 2p - k) / s) + 1
    assert out_size(64, 4, 2, 1) == 32
    assert out_size(48, 4, 2, 1) == 24
    assert out_size(16, 4, 1, 1) == 15


def test_module_parameter_discovery_and_state_dict():
    class Block(Module):
        def __init__(self):
            self.conv = Conv2d(2, 2, 3, rng=np.random.default_rng(0))
            self.items = [Conv2d(2, 1, 1, pad=0,
                                 rng=np.random.default_rng(1))]

    block = Block()
    names = set(block.named_parameters())
    assert names == {"conv.w", "conv.b", "items.0.w", "items.0.b"}
    state = block.state_dict()
    other = Block()
    other.load_state_dict(state)
    for k, v in other.state_dict().items():
        assert np.array_equal(v, state[k])
    state.pop("conv.w")
    with pytest.raises(ValueError):
        other.load_state_dict(state)
