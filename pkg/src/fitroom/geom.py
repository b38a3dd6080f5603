"""Tiny raster-geometry helpers shared by preprocessing and the
synthetic sample renderer."""

from __future__ import annotations

import numpy as np


def pixel_grid(height: int, width: int):
    """(ys, xs) float64 meshgrids of pixel-centre coordinates."""
    return np.meshgrid(np.arange(height, dtype=np.float64),
                       np.arange(width, dtype=np.float64), indexing="ij")


def segment_distance_field(height: int, width: int, p0, p1) -> np.ndarray:
    """Distance from every pixel centre to the segment p0-p1 (x, y points)."""
    ys, xs = pixel_grid(height, width)
    ax, ay = float(p0[0]), float(p0[1])
    bx, by = float(p1[0]), float(p1[1])
    dx, dy = bx - ax, by - ay
    seg_len2 = dx * dx + dy * dy
    if seg_len2 == 0.0:
        return np.hypot(xs - ax, ys - ay)
    t = ((xs - ax) * dx + (ys - ay) * dy) / seg_len2
    t = np.clip(t, 0.0, 1.0)
    return np.hypot(xs - (ax + t * dx), ys - (ay + t * dy))


def capsule_mask(height: int, width: int, p0, p1, radius: float) -> np.ndarray:
    return segment_distance_field(height, width, p0, p1) <= radius


def circle_mask(height: int, width: int, cx: float, cy: float,
                radius: float) -> np.ndarray:
    ys, xs = pixel_grid(height, width)
    return (xs - cx) ** 2 + (ys - cy) ** 2 <= radius * radius


def ellipse_mask(height: int, width: int, cx: float, cy: float,
                 rx: float, ry: float) -> np.ndarray:
    ys, xs = pixel_grid(height, width)
    return ((xs - cx) / rx) ** 2 + ((ys - cy) / ry) ** 2 <= 1.0


def trapezoid_mask(height: int, width: int, cx: float, y_top: float,
                   y_bot: float, hw_top: float, hw_bot: float) -> np.ndarray:
    """Vertical trapezoid: half-width interpolates linearly in y."""
    ys, xs = pixel_grid(height, width)
    span = max(y_bot - y_top, 1e-9)
    t = np.clip((ys - y_top) / span, 0.0, 1.0)
    hw = hw_top + (hw_bot - hw_top) * t
    return (ys >= y_top) & (ys <= y_bot) & (np.abs(xs - cx) <= hw)
