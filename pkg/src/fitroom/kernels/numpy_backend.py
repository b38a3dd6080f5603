"""Vectorized numpy implementations of the hot inner-loop kernels.

All arrays are float64, layout NCHW. Flow fields store per-pixel
(dx, dy) offsets in pixel units; samples falling outside the frame
contribute zero. Resampling uses half-pixel-centre (align-corners-off)
source coordinates clamped to the frame.
"""

import numpy as np

NAME = "numpy"


def conv2d_forward(x, w, stride, pad):
    n, ci, h, wd = x.shape
    co, _, kh, kw = w.shape
    ho = (h + 2 * pad - kh) // stride + 1
    wo = (wd + 2 * pad - kw) // stride + 1
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    y = np.zeros((n, co, ho, wo))
    for u in range(kh):
        for v in range(kw):
            patch = xp[:, :, u:u + stride * ho:stride, v:v + stride * wo:stride]
            y += np.einsum("nchw,oc->nohw", patch, w[:, :, u, v], optimize=True)
    return y


def conv2d_backward_input(gy, w, in_h, in_w, stride, pad):
    n, co, ho, wo = gy.shape
    _, ci, kh, kw = w.shape
    gxp = np.zeros((n, ci, in_h + 2 * pad, in_w + 2 * pad))
    for u in range(kh):
        for v in range(kw):
            gxp[:, :, u:u + stride * ho:stride, v:v + stride * wo:stride] += np.einsum(
                "nohw,oc->nchw", gy, w[:, :, u, v], optimize=True)
    if pad:
        return gxp[:, :, pad:pad + in_h, pad:pad + in_w]
    return gxp


def conv2d_backward_weight(x, gy, kh, kw, stride, pad):
    n, ci, h, wd = x.shape
    _, co, ho, wo = gy.shape
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    gw = np.zeros((co, ci, kh, kw))
    for u in range(kh):
        for v in range(kw):
            patch = xp[:, :, u:u + stride * ho:stride, v:v + stride * wo:stride]
            gw[:, :, u, v] = np.einsum("nohw,nchw->oc", gy, patch, optimize=True)
    return gw


def _corner_weights(flow, h, w):
    ys, xs = np.meshgrid(np.arange(h, dtype=np.float64),
                         np.arange(w, dtype=np.float64), indexing="ij")
    sx = xs[None] + flow[:, 0]
    sy = ys[None] + flow[:, 1]
    x0 = np.floor(sx).astype(np.int64)
    y0 = np.floor(sy).astype(np.int64)
    fx = sx - x0
    fy = sy - y0
    return x0, y0, fx, fy


def _gather(x, yi, xi, valid, w):
    n, c, h, _ = x.shape
    idx = np.clip(yi, 0, h - 1) * w + np.clip(xi, 0, w - 1)
    flat = x.reshape(n, c, -1)
    vals = np.take_along_axis(flat, idx.reshape(n, 1, -1), axis=2)
    vals = vals.reshape(n, c, *yi.shape[1:])
    return vals * valid[:, None]


def warp_forward(x, flow):
    n, c, h, w = x.shape
    x0, y0, fx, fy = _corner_weights(flow, h, w)
    out = np.zeros_like(x)
    for du, dv, wgt in ((0, 0, (1 - fx) * (1 - fy)), (1, 0, fx * (1 - fy)),
                        (0, 1, (1 - fx) * fy), (1, 1, fx * fy)):
        xi = x0 + du
        yi = y0 + dv
        valid = (xi >= 0) & (xi < w) & (yi >= 0) & (yi < h)
        out += wgt[:, None] * _gather(x, yi, xi, valid, w)
    return out


def warp_backward(x, flow, gy):
    n, c, h, w = x.shape
    x0, y0, fx, fy = _corner_weights(flow, h, w)
    gx = np.zeros_like(x)
    gflow = np.zeros_like(flow)
    corners = {}
    for du, dv in ((0, 0), (1, 0), (0, 1), (1, 1)):
        xi = x0 + du
        yi = y0 + dv
        valid = (xi >= 0) & (xi < w) & (yi >= 0) & (yi < h)
        corners[(du, dv)] = (xi, yi, valid, _gather(x, yi, xi, valid, w))
    weights = {(0, 0): (1 - fx) * (1 - fy), (1, 0): fx * (1 - fy),
               (0, 1): (1 - fx) * fy, (1, 1): fx * fy}
    flat_gx = gx.reshape(n, c, -1)
    for key, (xi, yi, valid, _) in corners.items():
        wgt = weights[key] * valid
        idx = (np.clip(yi, 0, h - 1) * w + np.clip(xi, 0, w - 1)).reshape(n, 1, -1)
        np.add.at(flat_gx, (np.arange(n)[:, None, None],
                            np.arange(c)[None, :, None], idx),
                  (gy * wgt[:, None]).reshape(n, c, -1))
    v00 = corners[(0, 0)][3]
    v10 = corners[(1, 0)][3]
    v01 = corners[(0, 1)][3]
    v11 = corners[(1, 1)][3]
    dx_term = (1 - fy)[:, None] * (v10 - v00) + fy[:, None] * (v11 - v01)
    dy_term = (1 - fx)[:, None] * (v01 - v00) + fx[:, None] * (v11 - v10)
    gflow[:, 0] = np.sum(gy * dx_term, axis=1)
    gflow[:, 1] = np.sum(gy * dy_term, axis=1)
    return gx, gflow


def _resize_axis(n_in, n_out):
    scale = n_in / n_out
    src = (np.arange(n_out, dtype=np.float64) + 0.5) * scale - 0.5
    src = np.clip(src, 0.0, n_in - 1.0)
    i0 = np.floor(src).astype(np.int64)
    i0 = np.minimum(i0, n_in - 1)
    frac = src - i0
    i1 = np.minimum(i0 + 1, n_in - 1)
    return i0, i1, frac


def resize_forward(x, out_h, out_w):
    n, c, h, w = x.shape
    y0, y1, fy = _resize_axis(h, out_h)
    x0, x1, fx = _resize_axis(w, out_w)
    rows0 = x[:, :, y0]
    rows1 = x[:, :, y1]
    top = rows0[:, :, :, x0] * (1 - fx) + rows0[:, :, :, x1] * fx
    bot = rows1[:, :, :, x0] * (1 - fx) + rows1[:, :, :, x1] * fx
    return top * (1 - fy[None, None, :, None]) + bot * fy[None, None, :, None]


def resize_backward(gy, in_h, in_w):
    n, c, out_h, out_w = gy.shape
    y0, y1, fy = _resize_axis(in_h, out_h)
    x0, x1, fx = _resize_axis(in_w, out_w)
    gx = np.zeros((n, c, in_h, in_w))
    wy = np.stack([1 - fy, fy])
    wx = np.stack([1 - fx, fx])
    ys = np.stack([y0, y1])
    xs = np.stack([x0, x1])
    for a in range(2):
        for b in range(2):
            contrib = gy * (wy[a][:, None] * wx[b][None, :])
            np.add.at(gx, (slice(None), slice(None), ys[a][:, None], xs[b][None, :]),
                      contrib)
    return gx
