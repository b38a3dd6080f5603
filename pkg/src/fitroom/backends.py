"""Shipped perception backends and the registry used to swap them.

No pretrained third-party networks are bundled. The `oracle` backends
look stored ground truth up by image fingerprint (synthetic data only);
the remaining backends are small trainable or derived models good enough
to exercise every pipeline contract:

* segmenter:   oracle | toy (small trained FCN) | oracle-coarse
* cloth:       oracle | threshold (border-color distance)
* pose:        oracle
* densepose:   oracle | parse-derived (geometric IUV from a parse map)
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .datasets import DatasetManifest, TryOnSample, image_fingerprint, load_sample
from .errors import ConfigurationError, InvalidInputError
from .imaging import RasterImage
from .nn import Conv2d, Module, one_hot_labels
from .parsing import (BACKGROUND, FACE, HAIR, HAT, LEFT_ARM, LEFT_LEG,
                      LEFT_SHOE, NUM_PARSE_CLASSES, PANTS, RIGHT_ARM,
                      RIGHT_LEG, RIGHT_SHOE, SCARF, SKIRT, SUNGLASSES,
                      TORSO_SKIN, UPPER_CLOTHES, ClothMask, DenseposeMap,
                      ParseMap, PerceptionBackend, PoseKeypoints)


# --------------------------------------------------------------- oracle --

@dataclass
class OracleStore:
    """Ground-truth lookup keyed by image fingerprint."""

    person: dict[str, tuple[ParseMap, PoseKeypoints, DenseposeMap]] = \
        field(default_factory=dict)
    cloth: dict[str, ClothMask] = field(default_factory=dict)

    def add_sample(self, sample: TryOnSample) -> None:
        self.person[image_fingerprint(sample.person)] = (
            sample.parse, sample.pose, sample.densepose)
        self.cloth[image_fingerprint(sample.cloth)] = sample.cloth_mask

    @classmethod
    def from_samples(cls, samples) -> "OracleStore":
        store = cls()
        for s in samples:
            store.add_sample(s)
        return store

    @classmethod
    def from_manifest(cls, manifest: DatasetManifest) -> "OracleStore":
        store = cls()
        for i in range(len(manifest)):
            store.add_sample(load_sample(manifest, i))
        return store


class OracleSegmenter(PerceptionBackend):
    """Returns stored truth; unknown images parse as an empty scene."""

    name = "oracle"
    kind = "segmenter"
    target = "human"

    def __init__(self, store: OracleStore):
        self.store = store

    def parse_human(self, img: RasterImage) -> ParseMap:
        hit = self.store.person.get(image_fingerprint(img))
        if hit is None:
            return ParseMap(np.zeros((img.height, img.width), dtype=np.uint8))
        return hit[0]


class OracleCoarseSegmenter(OracleSegmenter):
    """Oracle truth degraded by 4x block majority; a deterministic
    stand-in for a weaker segmentation model."""

    name = "oracle-coarse"

    def parse_human(self, img: RasterImage) -> ParseMap:
        fine = super().parse_human(img).labels
        h, w = fine.shape
        coarse = fine.copy()
        for y in range(0, h, 4):
            for x in range(0, w, 4):
                block = fine[y:y + 4, x:x + 4]
                counts = np.bincount(block.reshape(-1),
                                     minlength=NUM_PARSE_CLASSES)
                coarse[y:y + 4, x:x + 4] = np.argmax(counts)
        return ParseMap(coarse)


class OraclePoseDetector(PerceptionBackend):
    name = "oracle"
    kind = "pose-detector"

    def __init__(self, store: OracleStore):
        self.store = store

    def detect_pose(self, img: RasterImage) -> PoseKeypoints:
        hit = self.store.person.get(image_fingerprint(img))
        if hit is None:
            return PoseKeypoints.empty()
        return hit[1]


class OracleDenseposeEstimator(PerceptionBackend):
    name = "oracle"
    kind = "densepose-estimator"

    def __init__(self, store: OracleStore):
        self.store = store

    def estimate_densepose(self, img: RasterImage) -> DenseposeMap:
        hit = self.store.person.get(image_fingerprint(img))
        if hit is None:
            return DenseposeMap.empty(img.height, img.width)
        return hit[2]


class OracleClothSegmenter(PerceptionBackend):
    name = "oracle"
    kind = "segmenter"
    target = "cloth"

    def __init__(self, store: OracleStore):
        self.store = store

    def cloth_confidence(self, img: RasterImage) -> np.ndarray:
        hit = self.store.cloth.get(image_fingerprint(img))
        if hit is None:
            return np.zeros((img.height, img.width))
        return hit.mask.astype(np.float64)


# ------------------------------------------------------- threshold cloth --

class ThresholdClothSegmenter(PerceptionBackend):
    """Foreground confidence from color distance to the border-estimated
    background. Fails on low-contrast cases (white garment on a white
    ground), which is exactly the weakness the segmentation-based
    backend exists to fix."""

    name = "threshold"
    kind = "segmenter"
    target = "cloth"

    def __init__(self, scale: float = 64.0):
        self.scale = scale

    def cloth_confidence(self, img: RasterImage) -> np.ndarray:
        data = img.to_u8().data.astype(np.float64)
        border = np.concatenate([data[0].reshape(-1, img.channels),
                                 data[-1].reshape(-1, img.channels),
                                 data[:, 0].reshape(-1, img.channels),
                                 data[:, -1].reshape(-1, img.channels)])
        bg = np.median(border, axis=0)
        dist = np.abs(data - bg).max(axis=2)
        return np.clip(dist / self.scale, 0.0, 1.0)


# ------------------------------------------------------------------ toy --

class ToySegmenterNet(Module):
    """Small FCN over RGB plus normalized coordinate channels."""

    def __init__(self, width: int = 16, seed: int = 0):
        rng = np.random.default_rng(seed)
        self.width = width
        self.conv1 = Conv2d(5, width, 3, rng=rng)
        self.conv2 = Conv2d(width, 2 * width, 3, stride=2, rng=rng)
        self.conv3 = Conv2d(2 * width, 2 * width, 3, rng=rng)
        self.conv4 = Conv2d(3 * width, 2 * width, 3, rng=rng)
        self.head = Conv2d(2 * width, NUM_PARSE_CLASSES, 1, pad=0, rng=rng)

    @staticmethod
    def features(img: RasterImage) -> np.ndarray:
        norm = img.to_norm().data.transpose(2, 0, 1)
        h, w = norm.shape[1:]
        ys = np.linspace(-1.0, 1.0, h)[:, None] * np.ones((1, w))
        xs = np.ones((h, 1)) * np.linspace(-1.0, 1.0, w)[None, :]
        return np.concatenate([norm, ys[None], xs[None]])

    def forward(self, x: Tensor) -> Tensor:
        h, w = x.data.shape[2], x.data.shape[3]
        f1 = ad.leaky_relu(self.conv1(x))
        f2 = ad.leaky_relu(self.conv2(f1))
        f2 = ad.leaky_relu(self.conv3(f2))
        up = ad.resize_bilinear(f2, h, w)
        fused = ad.leaky_relu(self.conv4(ad.concat([f1, up], axis=1)))
        return self.head(fused)


class ToySegmenter(PerceptionBackend):
    name = "toy"
    kind = "segmenter"
    target = "human"

    def __init__(self, net: ToySegmenterNet):
        self.net = net

    def parse_human(self, img: RasterImage) -> ParseMap:
        x = Tensor(self.net.features(img)[None])
        logits = self.net.forward(x).data[0]
        return ParseMap(logits.argmax(axis=0).astype(np.uint8))


def train_toy_segmenter(samples, steps: int = 400, batch_size: int = 4,
                        lr: float = 2e-3, width: int = 16,
                        seed: int = 11) -> tuple[ToySegmenterNet, list[float]]:
    """Cross-entropy training of the toy parser on annotated samples."""
    from .training import Adam  # local import to avoid a module cycle

    net = ToySegmenterNet(width=width, seed=seed)
    opt = Adam(net.named_parameters(), lr=lr, betas=(0.9, 0.999))
    feats = [ToySegmenterNet.features(s.person) for s in samples]
    labels = [s.parse.labels.astype(np.int64) for s in samples]
    rng = np.random.default_rng(seed + 1)
    losses = []
    for _ in range(steps):
        idx = rng.integers(0, len(samples), size=batch_size)
        x = Tensor(np.stack([feats[i] for i in idx]))
        y = np.stack([labels[i] for i in idx])
        net.zero_grad()
        loss = ad.softmax_cross_entropy(net.forward(x), y)
        loss.backward()
        opt.step()
        losses.append(float(loss.data))
    return net, losses


def toy_segmenter_checkpoint(net: ToySegmenterNet, seed: int = 0):
    from .training import Checkpoint

    return Checkpoint(kind="toy-segmenter",
                      config={"width": net.width}, seed=seed,
                      step=0, params=net.state_dict())


def toy_segmenter_from_checkpoint(ckpt) -> ToySegmenter:
    net = ToySegmenterNet(width=int(ckpt.config["width"]))
    net.load_state_dict(ckpt.params)
    return ToySegmenter(net)


# -------------------------------------------------- parse-derived IUV --

_PART_OF_CLASS = {
    FACE: 23, HAIR: 23, HAT: 23, SUNGLASSES: 23,
    UPPER_CLOTHES: 1, TORSO_SKIN: 1, SCARF: 1, SKIRT: 1,
    LEFT_ARM: 16, RIGHT_ARM: 15,
    LEFT_LEG: 10, RIGHT_LEG: 9,
    LEFT_SHOE: 6, RIGHT_SHOE: 5,
}


class ParseDerivedDensepose(PerceptionBackend):
    """Geometric IUV from a human parse: each class group becomes one
    body part with bounding-box-normalized surface coordinates. A
    deterministic stand-in for a weaker estimator."""

    name = "parse-derived"
    kind = "densepose-estimator"

    def __init__(self, segmenter: PerceptionBackend):
        self.segmenter = segmenter

    def estimate_densepose(self, img: RasterImage) -> DenseposeMap:
        labels = self.segmenter.parse_human(img).labels
        h, w = labels.shape
        parts = np.zeros((h, w), dtype=np.uint8)
        u = np.zeros((h, w))
        v = np.zeros((h, w))
        for cls, part in _PART_OF_CLASS.items():
            mask = labels == cls
            if cls == PANTS:
                continue
            if not mask.any():
                continue
            ys, xs = np.nonzero(mask)
            x0, x1 = xs.min(), max(xs.max(), xs.min() + 1)
            y0, y1 = ys.min(), max(ys.max(), ys.min() + 1)
            parts[mask] = part
            u[mask] = np.round((xs - x0) / (x1 - x0) * 255.0) / 255.0
            v[mask] = np.round((ys - y0) / (y1 - y0) * 255.0) / 255.0
        pants = labels == PANTS
        if pants.any():
            ys, xs = np.nonzero(pants)
            mid = (xs.min() + xs.max()) / 2.0
            for side_mask, part in ((pants & (np.arange(w)[None, :] > mid), 10),
                                    (pants & (np.arange(w)[None, :] <= mid), 9)):
                if not side_mask.any():
                    continue
                ys, xs = np.nonzero(side_mask)
                x0, x1 = xs.min(), max(xs.max(), xs.min() + 1)
                y0, y1 = ys.min(), max(ys.max(), ys.min() + 1)
                parts[side_mask] = part
                u[side_mask] = np.round((xs - x0) / (x1 - x0) * 255.0) / 255.0
                v[side_mask] = np.round((ys - y0) / (y1 - y0) * 255.0) / 255.0
        return DenseposeMap(parts, u, v)


# --------------------------------------------------------------- registry --

@dataclass
class BackendContext:
    """Everything a backend builder may need."""

    oracle_store: OracleStore | None = None
    toy_segmenter_ckpt: object | None = None


_REGISTRY: dict[tuple[str, str], callable] = {}


def register_backend(role: str, name: str, builder) -> None:
    _REGISTRY[(role, name)] = builder


def create_backend(role: str, name: str,
                   ctx: BackendContext) -> PerceptionBackend:
    builder = _REGISTRY.get((role, name))
    if builder is None:
        raise ConfigurationError(f"no backend '{name}' registered for {role}")
    return builder(ctx)


def registered_backends(role: str) -> list[str]:
    return sorted(name for r, name in _REGISTRY if r == role)


def _need_store(ctx: BackendContext) -> OracleStore:
    if ctx.oracle_store is None:
        raise ConfigurationError("oracle backends need an oracle store "
                                 "(annotated dataset root)")
    return ctx.oracle_store


register_backend("segmenter", "oracle",
                 lambda ctx: OracleSegmenter(_need_store(ctx)))
register_backend("segmenter", "oracle-coarse",
                 lambda ctx: OracleCoarseSegmenter(_need_store(ctx)))


def _build_toy(ctx: BackendContext) -> ToySegmenter:
    if ctx.toy_segmenter_ckpt is None:
        raise ConfigurationError("toy segmenter needs a trained checkpoint")
    return toy_segmenter_from_checkpoint(ctx.toy_segmenter_ckpt)


register_backend("segmenter", "toy", _build_toy)
register_backend("cloth-segmenter", "oracle",
                 lambda ctx: OracleClothSegmenter(_need_store(ctx)))
register_backend("cloth-segmenter", "threshold",
                 lambda ctx: ThresholdClothSegmenter())
register_backend("pose-detector", "oracle",
                 lambda ctx: OraclePoseDetector(_need_store(ctx)))
register_backend("densepose-estimator", "oracle",
                 lambda ctx: OracleDenseposeEstimator(_need_store(ctx)))
register_backend("densepose-estimator", "parse-derived",
                 lambda ctx: ParseDerivedDensepose(OracleSegmenter(_need_store(ctx))))
