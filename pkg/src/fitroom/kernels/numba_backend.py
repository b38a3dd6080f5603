"""Numba-jitted implementations of the hot kernels.

Same contracts as numpy_backend. Parallel loops only over axes whose
output slices are disjoint (batch for conv/warp/resize, out-channel for
weight gradients), so results are deterministic run to run.
"""

import numpy as np
from numba import njit, prange

NAME = "numba"


@njit(cache=True, parallel=True)
def conv2d_forward(x, w, stride, pad):
    n, ci, h, wd = x.shape
    co, _, kh, kw = w.shape
    ho = (h + 2 * pad - kh) // stride + 1
    wo = (wd + 2 * pad - kw) // stride + 1
    y = np.zeros((n, co, ho, wo))
    for nn in prange(n):
        for o in range(co):
            for i in range(ho):
                for j in range(wo):
                    acc = 0.0
                    for c in range(ci):
                        for u in range(kh):
                            ii = i * stride + u - pad
                            if 0 <= ii < h:
                                for v in range(kw):
                                    jj = j * stride + v - pad
                                    if 0 <= jj < wd:
                                        acc += x[nn, c, ii, jj] * w[o, c, u, v]
                    y[nn, o, i, j] = acc
    return y


@njit(cache=True, parallel=True)
def conv2d_backward_input(gy, w, in_h, in_w, stride, pad):
    n, co, ho, wo = gy.shape
    _, ci, kh, kw = w.shape
    gx = np.zeros((n, ci, in_h, in_w))
    for nn in prange(n):
        for o in range(co):
            for i in range(ho):
                for j in range(wo):
                    g = gy[nn, o, i, j]
                    for c in range(ci):
                        for u in range(kh):
                            ii = i * stride + u - pad
                            if 0 <= ii < in_h:
                                for v in range(kw):
                                    jj = j * stride + v - pad
                                    if 0 <= jj < in_w:
                                        gx[nn, c, ii, jj] += g * w[o, c, u, v]
    return gx


@njit(cache=True, parallel=True)
def conv2d_backward_weight(x, gy, kh, kw, stride, pad):
    n, ci, h, wd = x.shape
    _, co, ho, wo = gy.shape
    gw = np.zeros((co, ci, kh, kw))
    for o in prange(co):
        for nn in range(n):
            for i in range(ho):
                for j in range(wo):
                    g = gy[nn, o, i, j]
                    for c in range(ci):
                        for u in range(kh):
                            ii = i * stride + u - pad
                            if 0 <= ii < h:
                                for v in range(kw):
                                    jj = j * stride + v - pad
                                    if 0 <= jj < wd:
                                        gw[o, c, u, v] += g * x[nn, c, ii, jj]
    return gw


@njit(cache=True, parallel=True)
def warp_forward(x, flow):
    n, c, h, w = x.shape
    out = np.zeros_like(x)
    for nn in prange(n):
        for i in range(h):
            for j in range(w):
                sx = j + flow[nn, 0, i, j]
                sy = i + flow[nn, 1, i, j]
                x0 = int(np.floor(sx))
                y0 = int(np.floor(sy))
                fx = sx - x0
                fy = sy - y0
                for cc in range(c):
                    acc = 0.0
                    if 0 <= x0 < w and 0 <= y0 < h:
                        acc += (1 - fx) * (1 - fy) * x[nn, cc, y0, x0]
                    if 0 <= x0 + 1 < w and 0 <= y0 < h:
                        acc += fx * (1 - fy) * x[nn, cc, y0, x0 + 1]
                    if 0 <= x0 < w and 0 <= y0 + 1 < h:
                        acc += (1 - fx) * fy * x[nn, cc, y0 + 1, x0]
                    if 0 <= x0 + 1 < w and 0 <= y0 + 1 < h:
                        acc += fx * fy * x[nn, cc, y0 + 1, x0 + 1]
                    out[nn, cc, i, j] = acc
    return out


@njit(cache=True, parallel=True)
def warp_backward(x, flow, gy):
    n, c, h, w = x.shape
    gx = np.zeros_like(x)
    gflow = np.zeros_like(flow)
    for nn in prange(n):
        for i in range(h):
            for j in range(w):
                sx = j + flow[nn, 0, i, j]
                sy = i + flow[nn, 1, i, j]
                x0 = int(np.floor(sx))
                y0 = int(np.floor(sy))
                fx = sx - x0
                fy = sy - y0
                gdx = 0.0
                gdy = 0.0
                for cc in range(c):
                    g = gy[nn, cc, i, j]
                    v00 = x[nn, cc, y0, x0] if (0 <= x0 < w and 0 <= y0 < h) else 0.0
                    v10 = x[nn, cc, y0, x0 + 1] if (0 <= x0 + 1 < w and 0 <= y0 < h) else 0.0
                    v01 = x[nn, cc, y0 + 1, x0] if (0 <= x0 < w and 0 <= y0 + 1 < h) else 0.0
                    v11 = x[nn, cc, y0 + 1, x0 + 1] if (0 <= x0 + 1 < w and 0 <= y0 + 1 < h) else 0.0
                    if 0 <= x0 < w and 0 <= y0 < h:
                        gx[nn, cc, y0, x0] += g * (1 - fx) * (1 - fy)
                    if 0 <= x0 + 1 < w and 0 <= y0 < h:
                        gx[nn, cc, y0, x0 + 1] += g * fx * (1 - fy)
                    if 0 <= x0 < w and 0 <= y0 + 1 < h:
                        gx[nn, cc, y0 + 1, x0] += g * (1 - fx) * fy
                    if 0 <= x0 + 1 < w and 0 <= y0 + 1 < h:
                        gx[nn, cc, y0 + 1, x0 + 1] += g * fx * fy
                    gdx += g * ((1 - fy) * (v10 - v00) + fy * (v11 - v01))
                    gdy += g * ((1 - fx) * (v01 - v00) + fx * (v11 - v10))
                gflow[nn, 0, i, j] = gdx
                gflow[nn, 1, i, j] = gdy
    return gx, gflow


@njit(cache=True)
def _axis_coords(n_in, n_out):
    i0 = np.empty(n_out, dtype=np.int64)
    i1 = np.empty(n_out, dtype=np.int64)
    frac = np.empty(n_out)
    scale = n_in / n_out
    for k in range(n_out):
        src = (k + 0.5) * scale - 0.5
        if src < 0.0:
            src = 0.0
        if src > n_in - 1.0:
            src = n_in - 1.0
        a = int(np.floor(src))
        if a > n_in - 1:
            a = n_in - 1
        i0[k] = a
        i1[k] = a + 1 if a + 1 < n_in else n_in - 1
        frac[k] = src - a
    return i0, i1, frac


@njit(cache=True, parallel=True)
def resize_forward(x, out_h, out_w):
    n, c, h, w = x.shape
    y0, y1, fy = _axis_coords(h, out_h)
    x0, x1, fx = _axis_coords(w, out_w)
    out = np.zeros((n, c, out_h, out_w))
    for nn in prange(n):
        for cc in range(c):
            for i in range(out_h):
                for j in range(out_w):
                    top = x[nn, cc, y0[i], x0[j]] * (1 - fx[j]) + x[nn, cc, y0[i], x1[j]] * fx[j]
                    bot = x[nn, cc, y1[i], x0[j]] * (1 - fx[j]) + x[nn, cc, y1[i], x1[j]] * fx[j]
                    out[nn, cc, i, j] = top * (1 - fy[i]) + bot * fy[i]
    return out


@njit(cache=True, parallel=True)
def resize_backward(gy, in_h, in_w):
    n, c, out_h, out_w = gy.shape
    y0, y1, fy = _axis_coords(in_h, out_h)
    x0, x1, fx = _axis_coords(in_w, out_w)
    gx = np.zeros((n, c, in_h, in_w))
    for nn in prange(n):
        for cc in range(c):
            for i in range(out_h):
                for j in range(out_w):
                    g = gy[nn, cc, i, j]
                    gx[nn, cc, y0[i], x0[j]] += g * (1 - fy[i]) * (1 - fx[j])
                    gx[nn, cc, y0[i], x1[j]] += g * (1 - fy[i]) * fx[j]
                    gx[nn, cc, y1[i], x0[j]] += g * fy[i] * (1 - fx[j])
                    gx[nn, cc, y1[i], x1[j]] += g * fy[i] * fx[j]
    return gx
