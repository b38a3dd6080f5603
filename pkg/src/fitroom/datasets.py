"""Paired try-on datasets: a procedural fully-annotated sample generator,
the on-disk layout, and manifest loading/validation.

Layout (one directory per split under the dataset root):

    <root>/<split>/image/<id>.png           person photo
    <root>/<split>/cloth/<id>.png           flat garment photo
    <root>/<split>/cloth-mask/<id>.png      binary mask (0/255)
    <root>/<split>/image-parse/<id>.png     indexed PNG, labels 0..19
    <root>/<split>/openpose-json/<id>_keypoints.json
    <root>/<split>/image-densepose/<id>.png 3-channel: I, U*255, V*255
    <root>/<split>/truth-image/<id>.png     (synthetic) dressed composite
    <root>/<split>/truth-parse/<id>.png     (synthetic) dressed parse
    <root>/<split>_pairs.txt                lines "person_file cloth_file"
"""

from __future__ import annotations

import colorsys
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import InvalidInputError, NotFoundError, ValidationError
from .geom import capsule_mask, circle_mask, ellipse_mask, trapezoid_mask
from .imaging import RasterImage, load_image, save_image
from .parsing import (BACKGROUND, FACE, HAIR, HAT, LEFT_ARM, LEFT_SHOE,
                      NUM_JOINTS, NUM_PARSE_CLASSES, PANTS, PARSE_PALETTE,
                      RIGHT_ARM, RIGHT_SHOE, SUNGLASSES, TORSO_SKIN,
                      UPPER_CLOTHES, ClothMask, DenseposeMap, ParseMap,
                      PoseKeypoints)

# body-surface part ids used by the synthetic IUV renderer
REGION_PARTS = {
    "torso": 1, "head": 23,
    "right_upper_arm": 15, "left_upper_arm": 16,
    "right_lower_arm": 17, "left_lower_arm": 18,
    "right_hand": 3, "left_hand": 4,
    "right_leg": 9, "left_leg": 10,
    "right_foot": 5, "left_foot": 6,
}

SKIN_TONES = ((246, 212, 178), (230, 188, 150), (210, 160, 120),
              (180, 125, 90), (140, 90, 60), (100, 65, 45))
HAIR_TONES = ((25, 22, 18), (60, 45, 30), (90, 70, 45), (35, 35, 38),
              (120, 100, 70))


@dataclass(frozen=True)
class TryOnSample:
    """One paired unit: person photo, flat garment, annotations, and (for
    synthetic data) the ground-truth dressed composite."""

    person: RasterImage
    cloth: RasterImage
    cloth_mask: ClothMask
    parse: ParseMap
    pose: PoseKeypoints
    densepose: DenseposeMap
    dressed: RasterImage | None = None
    dressed_parse: ParseMap | None = None

    @property
    def resolution(self) -> tuple[int, int]:
        return (self.person.height, self.person.width)


@dataclass
class DatasetManifest:
    root: Path
    split: str
    pairs: list[tuple[str, str]]
    resolution: tuple[int, int]
    has_truth: bool = False

    def __len__(self) -> int:
        return len(self.pairs)


@dataclass
class SynthOptions:
    """Optional challenge decorations; all off by default."""

    hat: bool = False
    sunglasses: bool = False
    beard: bool = False
    tattoo: bool = False
    stripes: bool = False
    occlude_arm: str | None = None  # "left" | "right"


def image_fingerprint(img: RasterImage) -> str:
    h = hashlib.sha1()
    h.update(str(img.data.shape).encode())
    h.update(img.mode.encode())
    h.update(np.ascontiguousarray(img.data).tobytes())
    return h.hexdigest()


def _jittered(rng, base, spread):
    return base + rng.uniform(-spread, spread)


def _pick_color(rng, palette, jitter=8):
    base = np.array(palette[rng.integers(len(palette))], dtype=np.float64)
    col = base + rng.uniform(-jitter, jitter, size=3)
    return np.clip(col, 0, 255).astype(np.uint8)


def _hsv_color(rng, hue):
    s = rng.uniform(0.6, 0.95)
    v = rng.uniform(0.55, 0.9)
    r, g, b = colorsys.hsv_to_rgb(hue % 1.0, s, v)
    return np.array([r * 255, g * 255, b * 255], dtype=np.uint8)


class _Doll:
    """Randomized body geometry on an (H, W) canvas.

    Convention: the person's left side sits at +x (viewer's right)."""

    def __init__(self, rng: np.random.Generator, height: int, width: int):
        h, w = float(height), float(width)
        self.h, self.w = height, width
        self.cx = w * _jittered(rng, 0.5, 0.05)
        self.head_r = h * rng.uniform(0.075, 0.095)
        self.head_cy = h * rng.uniform(0.13, 0.16)
        self.shoulder_y = self.head_cy + self.head_r + h * rng.uniform(0.03, 0.05)
        self.torso_hw = w * rng.uniform(0.15, 0.19)
        self.hip_y = h * rng.uniform(0.52, 0.58)
        self.pant_end_y = h * rng.uniform(0.80, 0.84)
        self.arm_r = w * rng.uniform(0.050, 0.062)
        self.leg_r = w * rng.uniform(0.058, 0.070)
        upper_len = h * rng.uniform(0.15, 0.19)
        lower_len = h * rng.uniform(0.13, 0.16)
        self.joints: dict[str, np.ndarray] = {}
        for side, sgn in (("left", 1.0), ("right", -1.0)):
            shoulder = np.array([self.cx + sgn * self.torso_hw * 0.92,
                                 self.shoulder_y + h * 0.012])
            t1 = np.deg2rad(rng.uniform(12.0, 48.0))
            t2 = t1 + np.deg2rad(rng.uniform(-20.0, 38.0))
            elbow = shoulder + upper_len * np.array([sgn * np.sin(t1), np.cos(t1)])
            wrist = elbow + lower_len * np.array([sgn * np.sin(t2), np.cos(t2)])
            self.joints[f"{side}_shoulder"] = shoulder
            self.joints[f"{side}_elbow"] = elbow
            self.joints[f"{side}_wrist"] = wrist
            legx = self.cx + sgn * self.torso_hw * 0.5
            self.joints[f"{side}_hip"] = np.array([legx, self.hip_y - h * 0.01])
            self.joints[f"{side}_knee"] = np.array(
                [legx, (self.hip_y + self.pant_end_y) / 2.0])
            self.joints[f"{side}_ankle"] = np.array(
                [legx * 1.0 - sgn * self.torso_hw * 0.02, self.pant_end_y - h * 0.01])
            self.joints[f"{side}_eye"] = np.array(
                [self.cx + sgn * self.head_r * 0.35,
                 self.head_cy - self.head_r * 0.15])
            self.joints[f"{side}_ear"] = np.array(
                [self.cx + sgn * self.head_r * 0.85, self.head_cy])
        self.joints["nose"] = np.array([self.cx, self.head_cy + self.head_r * 0.1])
        self.joints["neck"] = np.array([self.cx, self.shoulder_y])

    # region masks ---------------------------------------------------
    def torso(self):
        return trapezoid_mask(self.h, self.w, self.cx, self.shoulder_y,
                              self.hip_y, self.torso_hw, self.torso_hw * 1.05)

    def neck_band(self):
        return trapezoid_mask(self.h, self.w, self.cx,
                              self.head_cy + self.head_r * 0.7,
                              self.shoulder_y + 1.0, self.head_r * 0.62,
                              self.head_r * 0.75)

    def face(self):
        return circle_mask(self.h, self.w, self.cx, self.head_cy, self.head_r)

    def hair(self):
        crown = circle_mask(self.h, self.w, self.cx,
                            self.head_cy - self.head_r * 0.3,
                            self.head_r * 1.32)
        ys = np.arange(self.h, dtype=np.float64)[:, None]
        return crown & ~self.face() & (ys <= self.head_cy + self.head_r * 0.65)

    def sleeve(self, side):
        return capsule_mask(self.h, self.w, self.joints[f"{side}_shoulder"],
                            self.joints[f"{side}_elbow"], self.arm_r * 1.35)

    def forearm(self, side):
        lower = capsule_mask(self.h, self.w, self.joints[f"{side}_elbow"],
                             self.joints[f"{side}_wrist"], self.arm_r)
        hand = circle_mask(self.h, self.w, *self.joints[f"{side}_wrist"],
                           self.arm_r * 1.15)
        return lower | hand

    def upper_arm(self, side):
        return capsule_mask(self.h, self.w, self.joints[f"{side}_shoulder"],
                            self.joints[f"{side}_elbow"], self.arm_r)

    def leg(self, side):
        return capsule_mask(self.h, self.w, self.joints[f"{side}_hip"],
                            self.joints[f"{side}_ankle"], self.leg_r)

    def shoe(self, side):
        ank = self.joints[f"{side}_ankle"]
        sgn = 1.0 if side == "left" else -1.0
        return ellipse_mask(self.h, self.w, ank[0] + sgn * self.w * 0.014,
                            self.pant_end_y + self.h * 0.045,
                            self.w * 0.082, self.h * 0.040)

    def garment_region(self):
        return self.torso() | self.sleeve("left") | self.sleeve("right")


def _paint(img, parse, mask, color, label):
    img[mask] = color
    parse[mask] = label


def _keypoints(doll: _Doll) -> np.ndarray:
    order = ("nose", "neck", "right_shoulder", "right_elbow", "right_wrist",
             "left_shoulder", "left_elbow", "left_wrist", "right_hip",
             "right_knee", "right_ankle", "left_hip", "left_knee",
             "left_ankle", "right_eye", "left_eye", "right_ear", "left_ear")
    pts = np.zeros((NUM_JOINTS, 3))
    for i, name in enumerate(order):
        xy = doll.joints[name]
        pts[i, 0] = float(np.clip(xy[0], 0, doll.w - 1))
        pts[i, 1] = float(np.clip(xy[1], 0, doll.h - 1))
        pts[i, 2] = 1.0
    return pts


def _region_iuv(parts, u, v, mask, part_id):
    if not mask.any():
        return
    ys, xs = np.nonzero(mask)
    x0, x1 = xs.min(), max(xs.max(), xs.min() + 1)
    y0, y1 = ys.min(), max(ys.max(), ys.min() + 1)
    parts[mask] = part_id
    uq = np.round((xs - x0) / (x1 - x0) * 255.0) / 255.0
    vq = np.round((ys - y0) / (y1 - y0) * 255.0) / 255.0
    u[mask] = uq
    v[mask] = vq


def _densepose(doll: _Doll, occluder=None) -> DenseposeMap:
    parts = np.zeros((doll.h, doll.w), dtype=np.uint8)
    u = np.zeros((doll.h, doll.w))
    v = np.zeros((doll.h, doll.w))
    _region_iuv(parts, u, v, doll.torso() | doll.neck_band(), REGION_PARTS["torso"])
    _region_iuv(parts, u, v, doll.face() | doll.hair(), REGION_PARTS["head"])
    for side in ("left", "right"):
        _region_iuv(parts, u, v, doll.leg(side), REGION_PARTS[f"{side}_leg"])
        _region_iuv(parts, u, v, doll.shoe(side), REGION_PARTS[f"{side}_foot"])
        _region_iuv(parts, u, v, doll.upper_arm(side),
                    REGION_PARTS[f"{side}_upper_arm"])
        _region_iuv(parts, u, v,
                    capsule_mask(doll.h, doll.w, doll.joints[f"{side}_elbow"],
                                 doll.joints[f"{side}_wrist"], doll.arm_r),
                    REGION_PARTS[f"{side}_lower_arm"])
        _region_iuv(parts, u, v,
                    circle_mask(doll.h, doll.w, *doll.joints[f"{side}_wrist"],
                                doll.arm_r * 1.15),
                    REGION_PARTS[f"{side}_hand"])
    if occluder is not None:
        parts[occluder] = 0
        u[occluder] = 0.0
        v[occluder] = 0.0
    return DenseposeMap(parts, u, v)


def _flat_cloth(rng, height, width, color, stripes):
    """Catalog-style garment photo: canonical pose on a white ground."""
    h, w = float(height), float(width)
    img = np.full((height, width, 3), 255, dtype=np.uint8)
    cx = w / 2.0
    hw = w * rng.uniform(0.17, 0.20)
    y0, y1 = h * 0.32, h * rng.uniform(0.60, 0.66)
    body = trapezoid_mask(height, width, cx, y0, y1, hw, hw * 1.08)
    mask = body.copy()
    ang = np.deg2rad(rng.uniform(38.0, 50.0))
    slen = h * rng.uniform(0.15, 0.18)
    srad = w * rng.uniform(0.052, 0.062)
    for sgn in (1.0, -1.0):
        a = np.array([cx + sgn * hw * 0.92, y0 + h * 0.015])
        b = a + slen * np.array([sgn * np.sin(ang), np.cos(ang)])
        mask |= capsule_mask(height, width, a, b, srad)
    img[mask] = color
    if stripes:
        ys = np.arange(height)[:, None]
        band = (ys // max(2, height // 16)) % 2 == 0
        dark = np.clip(color.astype(np.int64) - 60, 0, 255).astype(np.uint8)
        img[mask & np.broadcast_to(band, mask.shape)] = dark
    return RasterImage(img), ClothMask(mask.astype(np.uint8))


def _stripe_overlay(img, mask, color, height):
    ys = np.arange(img.shape[0])[:, None]
    band = (ys // max(2, height // 16)) % 2 == 0
    dark = np.clip(color.astype(np.int64) - 60, 0, 255).astype(np.uint8)
    img[mask & np.broadcast_to(band, mask.shape)] = dark


def synth_sample(seed: int, resolution: tuple[int, int] = (256, 192),
                 options: SynthOptions | None = None) -> TryOnSample:
    """Render one deterministic, fully annotated paper-doll sample."""
    height, width = resolution
    if height < 32 or width < 24:
        raise InvalidInputError("resolution must be at least 32x24")
    opts = options or SynthOptions()
    rng = np.random.default_rng(seed)
    doll = _Doll(rng, height, width)

    skin = _pick_color(rng, SKIN_TONES)
    hair = _pick_color(rng, HAIR_TONES)
    bg = np.clip(rng.uniform(205, 240, size=3), 0, 255).astype(np.uint8)
    shirt_hue = rng.uniform(0.0, 1.0)
    shirt = _hsv_color(rng, shirt_hue)
    garment_hue = shirt_hue + rng.uniform(0.18, 0.82)
    garment = _hsv_color(rng, garment_hue)
    pants = np.array([rng.integers(40, 80), rng.integers(40, 85),
                      rng.integers(80, 140)], dtype=np.uint8)
    shoes = np.clip(rng.uniform(15, 70, size=3), 0, 255).astype(np.uint8)

    def paint_doll(canvas_bg, shirt_color, with_decorations):
        img = np.empty((height, width, 3), dtype=np.uint8)
        img[:] = canvas_bg
        parse = np.zeros((height, width), dtype=np.uint8)
        _paint(img, parse, doll.torso(), shirt_color, UPPER_CLOTHES)
        for side, label in (("left", LEFT_SHOE), ("right", RIGHT_SHOE)):
            _paint(img, parse, doll.leg(side), pants, PANTS)
            _paint(img, parse, doll.shoe(side), shoes, label)
        _paint(img, parse, doll.neck_band(), skin, TORSO_SKIN)
        _paint(img, parse, doll.face(), skin, FACE)
        if with_decorations and opts.beard:
            ys = np.arange(height, dtype=np.float64)[:, None]
            beard = doll.face() & (ys > doll.head_cy + doll.head_r * 0.45)
            img[beard] = np.clip(hair.astype(np.int64) + 15, 0, 255).astype(np.uint8)
        _paint(img, parse, doll.hair(), hair, HAIR)
        if with_decorations and opts.hat:
            cap = circle_mask(height, width, doll.cx,
                              doll.head_cy - doll.head_r * 0.55,
                              doll.head_r * 1.1)
            ys = np.arange(height, dtype=np.float64)[:, None]
            cap &= ys <= doll.head_cy - doll.head_r * 0.35
            _paint(img, parse, cap, np.array([40, 60, 40], dtype=np.uint8), HAT)
        if with_decorations and opts.sunglasses:
            ys = np.arange(height, dtype=np.float64)[:, None]
            band = doll.face() & (np.abs(ys - (doll.head_cy - doll.head_r * 0.15))
                                  <= doll.head_r * 0.22)
            _paint(img, parse, band, np.array([25, 25, 25], dtype=np.uint8),
                   SUNGLASSES)
        for side, label in (("left", LEFT_ARM), ("right", RIGHT_ARM)):
            _paint(img, parse, doll.sleeve(side), shirt_color, UPPER_CLOTHES)
            _paint(img, parse, doll.forearm(side), skin, label)
        if with_decorations and opts.tattoo:
            elbow = doll.joints["left_elbow"]
            wrist = doll.joints["left_wrist"]
            mid = (elbow + wrist) / 2.0
            spot = circle_mask(height, width, mid[0], mid[1], doll.arm_r * 0.6)
            img[spot & doll.forearm("left")] = np.array([60, 40, 90],
                                                        dtype=np.uint8)
        if opts.stripes:
            _stripe_overlay(img, parse == UPPER_CLOTHES, shirt_color, height)
        return img, parse

    person_img, person_parse = paint_doll(bg, shirt, with_decorations=True)

    occluder = None
    pts = _keypoints(doll)
    if opts.occlude_arm in ("left", "right"):
        side = opts.occlude_arm
        elbow = doll.joints[f"{side}_elbow"]
        wrist = doll.joints[f"{side}_wrist"]
        mid = (elbow + wrist) / 2.0
        half = max(abs(wrist[0] - elbow[0]), abs(wrist[1] - elbow[1])) * 0.8 \
            + doll.arm_r * 2.0
        ys44, xs44 = np.meshgrid(np.arange(height), np.arange(width),
                                 indexing="ij")
        occluder = (np.abs(xs44 - mid[0]) <= half) & (np.abs(ys44 - mid[1]) <= half)
        person_img[occluder] = np.array([200, 60, 40], dtype=np.uint8)
        person_parse[occluder] = BACKGROUND
        wrist_idx = 4 if side == "right" else 7
        pts[wrist_idx, 2] = 0.0

    cloth_img, cloth_mask = _flat_cloth(rng, height, width, garment,
                                        opts.stripes)
    white = np.array([255, 255, 255], dtype=np.uint8)
    dressed_img, dressed_parse = paint_doll(white, garment,
                                            with_decorations=True)

    return TryOnSample(
        person=RasterImage(person_img),
        cloth=cloth_img,
        cloth_mask=cloth_mask,
        parse=ParseMap(person_parse),
        pose=PoseKeypoints(pts),
        densepose=_densepose(doll, occluder),
        dressed=RasterImage(dressed_img),
        dressed_parse=ParseMap(dressed_parse),
    )


def cloth_on_person(sample: TryOnSample) -> tuple[np.ndarray, np.ndarray]:
    """Garment-only crop of the dressed composite, in [-1, 1], plus mask."""
    if sample.dressed is None or sample.dressed_parse is None:
        raise InvalidInputError("sample carries no dressed ground truth")
    mask = (sample.dressed_parse.labels == UPPER_CLOTHES).astype(np.float64)
    norm = sample.dressed.to_norm().data
    return norm * mask[:, :, None], mask


# ----------------------------------------------------------------- IO --

def save_parse(parse: ParseMap, path) -> None:
    im = Image.fromarray(parse.labels, mode="P")
    palette = []
    for rgb in PARSE_PALETTE:
        palette.extend(rgb)
    palette.extend([0] * (768 - len(palette)))
    im.putpalette(palette)
    im.save(path)


def load_parse(path) -> ParseMap:
    try:
        with Image.open(path) as im:
            if im.mode not in ("P", "L"):
                raise ValidationError(f"{path}: parse PNG must be indexed")
            arr = np.asarray(im, dtype=np.uint8)
    except (OSError, ValueError) as exc:
        raise ValidationError(f"{path}: {exc}") from exc
    if arr.max(initial=0) >= NUM_PARSE_CLASSES:
        raise ValidationError(f"{path}: label exceeds {NUM_PARSE_CLASSES - 1}")
    return ParseMap(arr)


def save_pose(pose: PoseKeypoints, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump({"pose_keypoints_2d": pose.flat()}, fh)


def load_pose(path) -> PoseKeypoints:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ValidationError(f"{path}: {exc}") from exc
    if "pose_keypoints_2d" in data:
        flat = data["pose_keypoints_2d"]
    elif data.get("people"):
        flat = data["people"][0].get("pose_keypoints_2d", [])
    else:
        raise ValidationError(f"{path}: no pose_keypoints_2d key")
    try:
        return PoseKeypoints.from_flat(flat)
    except InvalidInputError as exc:
        raise ValidationError(f"{path}: {exc}") from exc


def save_densepose(dp: DenseposeMap, path) -> None:
    arr = np.stack([dp.parts,
                    np.round(dp.u * 255.0).astype(np.uint8),
                    np.round(dp.v * 255.0).astype(np.uint8)], axis=2)
    Image.fromarray(arr).save(path)


def load_densepose(path) -> DenseposeMap:
    try:
        with Image.open(path) as im:
            arr = np.asarray(im.convert("RGB"), dtype=np.uint8)
    except (OSError, ValueError) as exc:
        raise ValidationError(f"{path}: {exc}") from exc
    parts = arr[:, :, 0]
    if parts.max(initial=0) >= 25:
        raise ValidationError(f"{path}: part index exceeds 24")
    u = arr[:, :, 1].astype(np.float64) / 255.0
    v = arr[:, :, 2].astype(np.float64) / 255.0
    off = parts == 0
    u[off] = 0.0
    v[off] = 0.0
    return DenseposeMap(parts.copy(), u, v)


def save_cloth_mask(mask: ClothMask, path) -> None:
    Image.fromarray(mask.mask * 255).save(path)


def load_cloth_mask(path) -> ClothMask:
    try:
        with Image.open(path) as im:
            arr = np.asarray(im.convert("L"), dtype=np.uint8)
    except (OSError, ValueError) as exc:
        raise ValidationError(f"{path}: {exc}") from exc
    return ClothMask((arr > 127).astype(np.uint8))


_DIRS = ("image", "cloth", "cloth-mask", "image-parse", "openpose-json",
         "image-densepose")
_TRUTH_DIRS = ("truth-image", "truth-parse")


def export_dataset(samples: list[TryOnSample], root,
                   split: str = "train") -> DatasetManifest:
    """Write samples in the directory layout above and return a manifest."""
    if not samples:
        raise ValidationError("empty split: no samples to export")
    res = samples[0].resolution
    for i, s in enumerate(samples):
        if s.resolution != res:
            raise InvalidInputError(
                f"sample {i} resolution {s.resolution} != {res}")
    root = Path(root)
    base = root / split
    has_truth = all(s.dressed is not None for s in samples)
    for d in _DIRS + (_TRUTH_DIRS if has_truth else ()):
        (base / d).mkdir(parents=True, exist_ok=True)
    pairs = []
    for i, s in enumerate(samples):
        sid = f"{i:05d}"
        save_image(s.person, base / "image" / f"{sid}.png")
        save_image(s.cloth, base / "cloth" / f"{sid}.png")
        save_cloth_mask(s.cloth_mask, base / "cloth-mask" / f"{sid}.png")
        save_parse(s.parse, base / "image-parse" / f"{sid}.png")
        save_pose(s.pose, base / "openpose-json" / f"{sid}_keypoints.json")
        save_densepose(s.densepose, base / "image-densepose" / f"{sid}.png")
        if has_truth:
            save_image(s.dressed, base / "truth-image" / f"{sid}.png")
            save_parse(s.dressed_parse, base / "truth-parse" / f"{sid}.png")
        pairs.append((f"{sid}.png", f"{sid}.png"))
    with open(root / f"{split}_pairs.txt", "w", encoding="utf-8") as fh:
        for person, cloth in pairs:
            fh.write(f"{person} {cloth}\n")
    return DatasetManifest(root=root, split=split, pairs=pairs,
                           resolution=res, has_truth=has_truth)


def load_manifest(root, split: str) -> DatasetManifest:
    """Parse and validate a split: every referenced file must exist and
    decode, and every raster must share one resolution."""
    root = Path(root)
    if not root.exists():
        raise NotFoundError(f"dataset root {root} does not exist")
    pairs_path = root / f"{split}_pairs.txt"
    if not pairs_path.exists():
        raise NotFoundError(f"pairs file {pairs_path} does not exist")
    pairs = []
    for line in pairs_path.read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if not line:
            continue
        fields = line.split()
        if len(fields) != 2:
            raise ValidationError(f"{pairs_path}: malformed line {line!r}")
        pairs.append((fields[0], fields[1]))
    if not pairs:
        raise ValidationError(f"{pairs_path}: empty split")

    base = root / split
    resolution = None
    mismatched = []
    has_truth = (base / "truth-image").is_dir()
    for person_file, cloth_file in pairs:
        sid = Path(person_file).stem
        needed = [base / "image" / person_file,
                  base / "cloth" / cloth_file,
                  base / "cloth-mask" / cloth_file,
                  base / "image-parse" / f"{sid}.png",
                  base / "openpose-json" / f"{sid}_keypoints.json",
                  base / "image-densepose" / f"{sid}.png"]
        if has_truth:
            needed += [base / "truth-image" / f"{sid}.png",
                       base / "truth-parse" / f"{sid}.png"]
        for path in needed:
            if not path.exists():
                raise NotFoundError(f"missing dataset file: {path}")
        img = load_image(base / "image" / person_file)
        if resolution is None:
            resolution = (img.height, img.width)
        parse = load_parse(base / "image-parse" / f"{sid}.png")
        load_pose(base / "openpose-json" / f"{sid}_keypoints.json")
        dp = load_densepose(base / "image-densepose" / f"{sid}.png")
        for path, shape in ((base / "image" / person_file,
                             (img.height, img.width)),
                            (base / "image-parse" / f"{sid}.png",
                             (parse.height, parse.width)),
                            (base / "image-densepose" / f"{sid}.png",
                             (dp.height, dp.width))):
            if shape != resolution:
                mismatched.append(f"{path} is {shape[1]}x{shape[0]}")
    if mismatched:
        raise ValidationError("resolution mismatch: " + "; ".join(mismatched))
    return DatasetManifest(root=root, split=split, pairs=pairs,
                           resolution=resolution, has_truth=has_truth)


def load_sample(manifest: DatasetManifest, index: int) -> TryOnSample:
    person_file, cloth_file = manifest.pairs[index]
    sid = Path(person_file).stem
    base = manifest.root / manifest.split
    dressed = dressed_parse = None
    if manifest.has_truth:
        dressed = load_image(base / "truth-image" / f"{sid}.png")
        dressed_parse = load_parse(base / "truth-parse" / f"{sid}.png")
    return TryOnSample(
        person=load_image(base / "image" / person_file),
        cloth=load_image(base / "cloth" / cloth_file),
        cloth_mask=load_cloth_mask(base / "cloth-mask" / cloth_file),
        parse=load_parse(base / "image-parse" / f"{sid}.png"),
        pose=load_pose(base / "openpose-json" / f"{sid}_keypoints.json"),
        densepose=load_densepose(base / "image-densepose" / f"{sid}.png"),
        dressed=dressed,
        dressed_parse=dressed_parse,
    )
