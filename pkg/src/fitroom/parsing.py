"""Preprocessing artifacts: parse maps, keypoints, IUV maps, cloth masks,
and the deterministic post-processing built on top of pluggable
perception backends."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import (BackendError, ContractViolationError, InvalidInputError,
                     PoseIncompleteError)
from .geom import capsule_mask
from .imaging import RasterImage, rgb_to_gray

log = logging.getLogger("fitroom")

PARSE_CLASSES = (
    "background", "hat", "hair", "gloves", "sunglasses", "upper-clothes",
    "dress", "coat", "socks", "pants", "torso-skin", "scarf", "skirt",
    "face", "left-arm", "right-arm", "left-leg", "right-leg", "left-shoe",
    "right-shoe",
)
NUM_PARSE_CLASSES = 20

BACKGROUND, HAT, HAIR, GLOVES, SUNGLASSES = 0, 1, 2, 3, 4
UPPER_CLOTHES, DRESS, COAT, SOCKS, PANTS = 5, 6, 7, 8, 9
TORSO_SKIN, SCARF, SKIRT, FACE, LEFT_ARM = 10, 11, 12, 13, 14
RIGHT_ARM, LEFT_LEG, RIGHT_LEG, LEFT_SHOE, RIGHT_SHOE = 15, 16, 17, 18, 19

# upper garments plus torso skin: everything the new garment replaces
ERASED_CLASSES = (UPPER_CLOTHES, DRESS, COAT, TORSO_SKIN)

# display palette for the indexed parse PNG (CIHP-style colors)
PARSE_PALETTE = (
    (0, 0, 0), (128, 0, 0), (255, 0, 0), (0, 85, 0), (170, 0, 51),
    (255, 85, 0), (0, 0, 85), (0, 119, 221), (85, 85, 0), (0, 85, 85),
    (85, 51, 0), (52, 86, 128), (0, 128, 0), (0, 0, 255), (51, 170, 221),
    (0, 255, 255), (85, 255, 170), (170, 255, 85), (255, 255, 0),
    (255, 170, 0),
)

JOINT_NAMES = (
    "nose", "neck", "right_shoulder", "right_elbow", "right_wrist",
    "left_shoulder", "left_elbow", "left_wrist", "right_hip", "right_knee",
    "right_ankle", "left_hip", "left_knee", "left_ankle", "right_eye",
    "left_eye", "right_ear", "left_ear",
)
NUM_JOINTS = 18
DENSEPOSE_PARTS = 25  # 0 = not a body pixel


@dataclass(frozen=True)
class ParseMap:
    """Per-pixel class indices in 0..19."""

    labels: np.ndarray

    def __post_init__(self):
        if self.labels.ndim != 2:
            raise InvalidInputError(f"parse map must be 2-D, got {self.labels.shape}")
        if self.labels.dtype != np.uint8:
            raise InvalidInputError("parse labels must be uint8")
        if self.labels.size and self.labels.max() >= NUM_PARSE_CLASSES:
            raise InvalidInputError(
                f"parse labels must be < {NUM_PARSE_CLASSES}, max={self.labels.max()}")

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @property
    def width(self) -> int:
        return self.labels.shape[1]


@dataclass(frozen=True)
class PoseKeypoints:
    """18 joints, each (x, y, confidence); confidence 0 = undetected."""

    points: np.ndarray

    def __post_init__(self):
        if self.points.shape != (NUM_JOINTS, 3):
            raise InvalidInputError(
                f"pose must be ({NUM_JOINTS}, 3), got {self.points.shape}")
        conf = self.points[:, 2]
        if conf.min() < 0 or conf.max() > 1:
            raise InvalidInputError("joint confidences must lie in [0, 1]")

    def joint(self, name: str) -> np.ndarray:
        return self.points[JOINT_NAMES.index(name)]

    def detected(self, name: str) -> bool:
        return self.joint(name)[2] > 0

    def flat(self) -> list[float]:
        return [float(v) for v in self.points.reshape(-1)]

    @classmethod
    def from_flat(cls, values) -> "PoseKeypoints":
        arr = np.asarray(list(values), dtype=np.float64)
        if arr.size != NUM_JOINTS * 3:
            raise InvalidInputError(
                f"pose vector must hold {NUM_JOINTS * 3} numbers, got {arr.size}")
        return cls(arr.reshape(NUM_JOINTS, 3))

    @classmethod
    def empty(cls) -> "PoseKeypoints":
        return cls(np.zeros((NUM_JOINTS, 3)))


@dataclass(frozen=True)
class DenseposeMap:
    """Per-pixel body-surface coordinates: part index 0..24 plus (u, v)."""

    parts: np.ndarray
    u: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        if self.parts.ndim != 2 or self.parts.dtype != np.uint8:
            raise InvalidInputError("densepose parts must be 2-D uint8")
        if self.u.shape != self.parts.shape or self.v.shape != self.parts.shape:
            raise InvalidInputError("densepose u/v must match parts shape")
        if self.parts.size:
            if self.parts.max() >= DENSEPOSE_PARTS:
                raise InvalidInputError("densepose part index must be < 25")
            for name, ch in (("u", self.u), ("v", self.v)):
                if ch.min() < 0 or ch.max() > 1:
                    raise InvalidInputError(f"densepose {name} must lie in [0, 1]")
            off = self.parts == 0
            if np.any(self.u[off] != 0) or np.any(self.v[off] != 0):
                raise InvalidInputError("densepose u/v must be 0 off-body")

    @property
    def height(self) -> int:
        return self.parts.shape[0]

    @property
    def width(self) -> int:
        return self.parts.shape[1]

    @classmethod
    def empty(cls, height: int, width: int) -> "DenseposeMap":
        z = np.zeros((height, width))
        return cls(np.zeros((height, width), dtype=np.uint8), z, z.copy())


@dataclass(frozen=True)
class ClothMask:
    """Binary garment mask, same grid as the cloth image."""

    mask: np.ndarray

    def __post_init__(self):
        if self.mask.ndim != 2 or self.mask.dtype != np.uint8:
            raise InvalidInputError("cloth mask must be 2-D uint8")
        if self.mask.size and self.mask.max() > 1:
            raise InvalidInputError("cloth mask must be binary {0, 1}")

    @property
    def height(self) -> int:
        return self.mask.shape[0]

    @property
    def width(self) -> int:
        return self.mask.shape[1]

    def area(self) -> int:
        return int(self.mask.sum())


class PerceptionBackend:
    """Deterministic, read-only perception component.

    kind is one of 'segmenter', 'pose-detector', 'densepose-estimator';
    segmenters additionally declare target='human' or 'cloth'.
    """

    name: str = "abstract"
    kind: str = "abstract"
    target: str = "human"

    def parse_human(self, img: RasterImage) -> ParseMap:
        raise NotImplementedError

    def cloth_confidence(self, img: RasterImage) -> np.ndarray:
        raise NotImplementedError

    def detect_pose(self, img: RasterImage) -> PoseKeypoints:
        raise NotImplementedError

    def estimate_densepose(self, img: RasterImage) -> DenseposeMap:
        raise NotImplementedError


@dataclass
class TimingLog:
    """Per-call stage duration capture; one instance per request."""

    entries: list = field(default_factory=list)

    def add(self, stage: str, seconds: float) -> None:
        self.entries.append((stage, seconds))

    def as_dict(self) -> dict[str, float]:
        return {stage: seconds for stage, seconds in self.entries}

    def total(self) -> float:
        return sum(seconds for _, seconds in self.entries)


def _run_backend(backend: PerceptionBackend, method: str, img: RasterImage):
    start = time.perf_counter()
    try:
        result = getattr(backend, method)(img)
    except Exception as exc:  # noqa: BLE001 - contract: wrap with backend name
        raise BackendError(backend.name, str(exc)) from exc
    return result, time.perf_counter() - start


def segment_human(img: RasterImage, backend: PerceptionBackend,
                  timings: TimingLog | None = None) -> ParseMap:
    if backend.kind != "segmenter" or backend.target != "human":
        raise InvalidInputError(
            f"backend '{backend.name}' is not a human segmenter")
    parse, dt = _run_backend(backend, "parse_human", img)
    if timings is not None:
        timings.add("segment_human", dt)
    if (parse.height, parse.width) != (img.height, img.width):
        raise ContractViolationError(
            f"backend '{backend.name}' returned {parse.width}x{parse.height} "
            f"for a {img.width}x{img.height} image")
    return parse


def detect_pose(img: RasterImage, backend: PerceptionBackend,
                timings: TimingLog | None = None) -> PoseKeypoints:
    if backend.kind != "pose-detector":
        raise InvalidInputError(f"backend '{backend.name}' is not a pose detector")
    pose, dt = _run_backend(backend, "detect_pose", img)
    if timings is not None:
        timings.add("detect_pose", dt)
    return pose


def compute_densepose(img: RasterImage, backend: PerceptionBackend,
                      timings: TimingLog | None = None) -> DenseposeMap:
    if backend.kind != "densepose-estimator":
        raise InvalidInputError(
            f"backend '{backend.name}' is not a densepose estimator")
    dp, dt = _run_backend(backend, "estimate_densepose", img)
    if timings is not None:
        timings.add("compute_densepose", dt)
    if (dp.height, dp.width) != (img.height, img.width):
        raise ContractViolationError(
            f"backend '{backend.name}' returned a densepose map of wrong size")
    return dp


def remove_background(img: RasterImage, parse: ParseMap) -> RasterImage:
    """Whiten every pixel the parse map labels as background."""
    if (parse.height, parse.width) != (img.height, img.width):
        raise InvalidInputError("parse map size does not match image")
    out = img.data.copy()
    white = 255 if img.mode == "u8" else 1.0
    out[parse.labels == BACKGROUND] = white
    return RasterImage(out, img.mode)


def make_cloth_mask(cloth_img: RasterImage, backend: PerceptionBackend,
                    threshold: float = 0.5,
                    timings: TimingLog | None = None) -> ClothMask:
    """Segment the garment and binarize the confidence at `threshold`."""
    if backend.kind != "segmenter" or backend.target != "cloth":
        raise InvalidInputError(
            f"backend '{backend.name}' is not a cloth segmenter")
    conf, dt = _run_backend(backend, "cloth_confidence", cloth_img)
    if timings is not None:
        timings.add("make_cloth_mask", dt)
    if conf.shape != (cloth_img.height, cloth_img.width):
        raise ContractViolationError(
            f"backend '{backend.name}' returned confidence of wrong size")
    mask = (conf > threshold).astype(np.uint8)
    frac = mask.mean() if mask.size else 0.0
    if frac < 0.002:
        log.warning("cloth mask from backend '%s' is nearly empty "
                    "(%.4f%% foreground); low-contrast garment?",
                    backend.name, 100.0 * frac)
    return ClothMask(mask)


def arm_capsules(pose: PoseKeypoints, height: int, width: int,
                 radius: float) -> np.ndarray:
    """Union of capsules along shoulder->elbow and elbow->wrist segments."""
    mask = np.zeros((height, width), dtype=bool)
    for side in ("left", "right"):
        chain = [pose.joint(f"{side}_shoulder"), pose.joint(f"{side}_elbow"),
                 pose.joint(f"{side}_wrist")]
        for a, b in zip(chain[:-1], chain[1:]):
            if a[2] > 0 and b[2] > 0:
                mask |= capsule_mask(height, width, a[:2], b[:2], radius)
    return mask


def generate_agnostic(img: RasterImage, parse: ParseMap, pose: PoseKeypoints,
                      fill_value: int = 128, capsule_scale: float = 0.45,
                      grayscale: bool = True) -> tuple[RasterImage, ParseMap]:
    """Erase the person's upper garments so the generator cannot copy them.

    Erases classes {upper-clothes, dress, coat, torso-skin} plus arm
    capsules around the shoulder->elbow->wrist segments, then blacks out
    the background. The returned parse relabels every erased pixel 0.
    """
    if (parse.height, parse.width) != (img.height, img.width):
        raise InvalidInputError("parse map size does not match image")
    for name in ("neck", "left_shoulder", "right_shoulder"):
        if not pose.detected(name):
            raise PoseIncompleteError(f"joint '{name}' is required but undetected")

    base_img = img if img.mode == "u8" else img.to_u8()
    if grayscale:
        canvas = (rgb_to_gray(base_img) if base_img.channels == 3
                  else base_img).data.copy()
    else:
        canvas = base_img.data.copy()

    erased = np.isin(parse.labels, ERASED_CLASSES)
    ls, rs = pose.joint("left_shoulder"), pose.joint("right_shoulder")
    radius = capsule_scale * float(np.hypot(ls[0] - rs[0], ls[1] - rs[1]))
    erased |= arm_capsules(pose, img.height, img.width, radius)

    canvas[erased] = fill_value
    background = parse.labels == BACKGROUND
    canvas[background] = 0

    new_labels = parse.labels.copy()
    new_labels[erased] = BACKGROUND
    return RasterImage(canvas, "u8"), ParseMap(new_labels)
