"""Raster types and pixel-level operations shared by every stage.

Images live in one of two modes:

* ``u8``   — uint8 intensities in [0, 255], the file-boundary format.
* ``norm`` — float64 in [-1, 1], the in-network format.

Conversions round half away from zero at the float-to-integer edge.
Flow fields hold per-pixel (dx, dy) offsets in pixel units; warping
samples bilinearly and treats everything outside the frame as zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from PIL import Image

from . import kernels
from .errors import InvalidInputError

GRAY_WEIGHTS = (0.299, 0.587, 0.114)  # ITU-R BT.601


def round_half_away(x: np.ndarray) -> np.ndarray:
    """Round half away from zero (np.round would round half to even)."""
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


@dataclass(frozen=True)
class RasterImage:
    """A height x width x channels pixel grid with an explicit mode flag."""

    data: np.ndarray
    mode: str = "u8"

    def __post_init__(self):
        if self.data.ndim != 3 or self.data.shape[2] not in (1, 3):
            raise InvalidInputError(
                f"image data must be (H, W, 1|3), got {self.data.shape}")
        if self.mode == "u8":
            if self.data.dtype != np.uint8:
                raise InvalidInputError("u8 images must have dtype uint8")
        elif self.mode == "norm":
            if self.data.dtype != np.float64:
                raise InvalidInputError("norm images must have dtype float64")
            amax = float(np.abs(self.data).max()) if self.data.size else 0.0
            if amax > 1.0 + 1e-9:
                raise InvalidInputError(
                    f"norm images must lie in [-1, 1], max |value| = {amax}")
        else:
            raise InvalidInputError(f"unknown image mode {self.mode!r}")

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]

    def to_norm(self) -> "RasterImage":
        if self.mode == "norm":
            return self
        return RasterImage(self.data.astype(np.float64) / 127.5 - 1.0, "norm")

    def to_u8(self) -> "RasterImage":
        if self.mode == "u8":
            return self
        vals = round_half_away((self.data + 1.0) * 127.5)
        return RasterImage(np.clip(vals, 0, 255).astype(np.uint8), "u8")


@dataclass(frozen=True)
class FlowField:
    """Per-pixel (dx, dy) offsets, pixel units, shape (H, W, 2)."""

    offsets: np.ndarray

    def __post_init__(self):
        if self.offsets.ndim != 3 or self.offsets.shape[2] != 2:
            raise InvalidInputError(
                f"flow must be (H, W, 2), got {self.offsets.shape}")
        if not np.isfinite(self.offsets).all():
            raise InvalidInputError("flow offsets must be finite")

    @property
    def height(self) -> int:
        return self.offsets.shape[0]

    @property
    def width(self) -> int:
        return self.offsets.shape[1]

    @classmethod
    def zero(cls, height: int, width: int) -> "FlowField":
        return cls(np.zeros((height, width, 2)))


def rgb_to_gray(img: RasterImage) -> RasterImage:
    """BT.601 luma; u8 output is rounded half away from zero."""
    if img.channels != 3:
        raise InvalidInputError("rgb_to_gray needs a 3-channel image")
    r, g, b = GRAY_WEIGHTS
    luma = (img.data[:, :, 0].astype(np.float64) * r
            + img.data[:, :, 1].astype(np.float64) * g
            + img.data[:, :, 2].astype(np.float64) * b)[:, :, None]
    if img.mode == "u8":
        return RasterImage(np.clip(round_half_away(luma), 0, 255).astype(np.uint8))
    return RasterImage(np.clip(luma, -1.0, 1.0), "norm")


def gray_to_rgb(img: RasterImage) -> RasterImage:
    if img.channels != 1:
        raise InvalidInputError("gray_to_rgb needs a 1-channel image")
    return RasterImage(np.repeat(img.data, 3, axis=2), img.mode)


def _to_nchw(img: RasterImage) -> np.ndarray:
    return np.ascontiguousarray(
        img.data.astype(np.float64).transpose(2, 0, 1)[None])


def _from_nchw(arr: np.ndarray, mode: str) -> RasterImage:
    hwc = arr[0].transpose(1, 2, 0)
    if mode == "u8":
        return RasterImage(np.clip(round_half_away(hwc), 0, 255).astype(np.uint8))
    return RasterImage(np.clip(hwc, -1.0, 1.0), "norm")


def resize_bilinear(img: RasterImage, width: int, height: int) -> RasterImage:
    """Bilinear resize with half-pixel-centre sampling; mode preserved."""
    if width < 1 or height < 1:
        raise InvalidInputError("target size must be at least 1x1")
    if width == img.width and height == img.height:
        return RasterImage(img.data.copy(), img.mode)
    out = kernels.resize_forward(_to_nchw(img), height, width)
    return _from_nchw(out, img.mode)


def downsample_pyramid(img: RasterImage, levels: int) -> list[RasterImage]:
    """Level 0 is the input; each level 2x2-mean-pools the previous one.

    Mean intensity is conserved exactly only while the pooled dimensions
    stay even; odd trailing rows/columns are trimmed.
    """
    if levels < 1:
        raise InvalidInputError("levels must be >= 1")
    need = 2 ** (levels - 1)
    if img.height < need or img.width < need:
        raise InvalidInputError(
            f"image {img.width}x{img.height} too small for {levels} levels")
    out = [img]
    for _ in range(levels - 1):
        prev = out[-1].data.astype(np.float64)
        h, w = prev.shape[0] // 2, prev.shape[1] // 2
        pooled = prev[:2 * h, :2 * w].reshape(h, 2, w, 2, -1).mean(axis=(1, 3))
        if img.mode == "u8":
            out.append(RasterImage(
                np.clip(round_half_away(pooled), 0, 255).astype(np.uint8)))
        else:
            out.append(RasterImage(np.clip(pooled, -1.0, 1.0), "norm"))
    return out


def warp_by_flow(img: RasterImage, flow: FlowField) -> RasterImage:
    """output(x, y) = bilinear sample of img at (x+dx, y+dy), zero outside."""
    if (flow.height, flow.width) != (img.height, img.width):
        raise InvalidInputError(
            f"flow {flow.width}x{flow.height} does not match "
            f"image {img.width}x{img.height}")
    flow_nchw = np.ascontiguousarray(flow.offsets.transpose(2, 0, 1)[None])
    out = kernels.warp_forward(_to_nchw(img), flow_nchw)
    return _from_nchw(out, img.mode)


def load_image(path, channels: int = 3) -> RasterImage:
    """Read a PNG/JPEG file into a u8 image with the requested channels."""
    try:
        with Image.open(path) as im:
            im = im.convert("L" if channels == 1 else "RGB")
            arr = np.asarray(im, dtype=np.uint8)
    except (OSError, ValueError) as exc:
        raise InvalidInputError(f"cannot decode image {path}: {exc}") from exc
    if arr.ndim == 2:
        arr = arr[:, :, None]
    return RasterImage(arr)


def save_image(img: RasterImage, path) -> None:
    u8 = img.to_u8()
    arr = u8.data[:, :, 0] if u8.channels == 1 else u8.data
    Image.fromarray(arr).save(path)


def decode_image(data: bytes, channels: int = 3) -> RasterImage:
    import io

    try:
        with Image.open(io.BytesIO(data)) as im:
            im = im.convert("L" if channels == 1 else "RGB")
            arr = np.asarray(im, dtype=np.uint8)
    except (OSError, ValueError) as exc:
        raise InvalidInputError(f"cannot decode image bytes: {exc}") from exc
    if arr.ndim == 2:
        arr = arr[:, :, None]
    return RasterImage(arr)


def encode_png(img: RasterImage) -> bytes:
    import io

    u8 = img.to_u8()
    arr = u8.data[:, :, 0] if u8.channels == 1 else u8.data
    buf = io.BytesIO()
    Image.fromarray(arr).save(buf, format="PNG")
    return buf.getvalue()
