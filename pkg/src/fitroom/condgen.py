"""Condition generator: predicts the appearance flow that warps the flat
garment onto the body plus the segmentation map of the dressed person.

Two 5-block residual encoders (cloth and segmentation) feed a decoder of
five fusion stages. Each stage upsamples both pathways, refines a
running coarse-to-fine flow with a 3x3 convolution on the flow-pathway
features, warps the cloth-encoder skip features by that flow, and
exchanges information between the pathways by channel concatenation.
Flow heads are zero-initialized so the untrained model is an identity
warp.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import InvalidInputError, NumericError
from .imaging import FlowField, RasterImage
from .losses import lsgan_generator_loss, masked_l1, perceptual_loss
from .nn import Conv2d, Module, one_hot_labels
from .parsing import (NUM_PARSE_CLASSES, UPPER_CLOTHES, ClothMask,
                      DenseposeMap, ParseMap)

CLOTH_CHANNELS = 4          # RGB + mask
DENSEPOSE_CHANNELS = 3      # part/24, u, v
SEG_CHANNELS = NUM_PARSE_CLASSES + DENSEPOSE_CHANNELS
COORD_CHANNELS = 2          # constant x/y grid appended inside the model


def _coord_grid(n: int, h: int, w: int) -> np.ndarray:
    """Constant positional planes in [-1, 1]; convolutions alone cannot
    tell left from right, and the body classes are side-specific."""
    ys = np.linspace(-1.0, 1.0, h)[:, None] * np.ones((1, w))
    xs = np.ones((h, 1)) * np.linspace(-1.0, 1.0, w)[None, :]
    return np.broadcast_to(np.stack([ys, xs])[None], (n, 2, h, w)).copy()


@dataclass
class CondGenConfig:
    resolution: tuple[int, int] = (256, 192)
    stages: int = 5
    widths: tuple[int, ...] = (64, 128, 256, 512, 512)
    seed: int = 0

    def __post_init__(self):
        self.widths = tuple(self.widths)
        self.resolution = tuple(self.resolution)
        if len(self.widths) != self.stages:
            raise InvalidInputError("widths must list one channel count per stage")

    def stage_sizes(self) -> list[tuple[int, int]]:
        """Resolution per level, full size first; stride-2 convs take
        ceil(n/2)."""
        sizes = [self.resolution]
        h, w = self.resolution
        for _ in range(self.stages):
            h, w = -(-h // 2), -(-w // 2)
            sizes.append((h, w))
        return sizes


class ResidualDown(Module):
    """Stride-2 residual block: conv/2 -> lrelu -> conv + 1x1 skip."""

    def __init__(self, cin, cout, rng):
        self.conv1 = Conv2d(cin, cout, 3, stride=2, rng=rng)
        self.conv2 = Conv2d(cout, cout, 3, stride=1, rng=rng)
        self.proj = Conv2d(cin, cout, 1, stride=2, pad=0, rng=rng)

    def __call__(self, x: Tensor) -> Tensor:
        h = self.conv2(ad.leaky_relu(self.conv1(x)))
        return ad.leaky_relu(h + self.proj(x))


class CondGenModel(Module):
    def __init__(self, config: CondGenConfig):
        rng = np.random.default_rng(config.seed)
        self.config = config
        w = config.widths
        self.cloth_blocks = []
        self.seg_blocks = []
        cin_c, cin_s = CLOTH_CHANNELS, SEG_CHANNELS + COORD_CHANNELS
        for width in w:
            self.cloth_blocks.append(ResidualDown(cin_c, width, rng))
            self.seg_blocks.append(ResidualDown(cin_s, width, rng))
            cin_c = cin_s = width
        # decoder stage s consumes skips from level stages-s (raw inputs at
        # the final stage); feature width follows the mirrored encoder
        dec_w = [w[max(0, config.stages - 1 - s)] for s in range(config.stages)]
        self.flow_heads = []
        self.fuse_flow = []
        self.fuse_seg = []
        feat = w[-1]
        for s in range(config.stages):
            skip_level = config.stages - 1 - s
            skip_c = w[skip_level - 1] if skip_level >= 1 else CLOTH_CHANNELS
            seg_skip_c = w[skip_level - 1] if skip_level >= 1 \
                else SEG_CHANNELS + COORD_CHANNELS
            self.flow_heads.append(Conv2d(feat, 2, 3, rng=rng, zero_init=True))
            self.fuse_flow.append(Conv2d(feat + feat + skip_c, dec_w[s], 3, rng=rng))
            self.fuse_seg.append(Conv2d(feat + feat + skip_c + seg_skip_c,
                                        dec_w[s], 3, rng=rng))
            feat = dec_w[s]
        # the raw conditioning joins the head so visible classes have a
        # direct copy path; capacity goes to the erased regions
        self.seg_head = Conv2d(feat + SEG_CHANNELS + COORD_CHANNELS,
                               NUM_PARSE_CLASSES, 3, rng=rng)

    def forward(self, cloth: Tensor, cloth_mask: Tensor, seg_cond: Tensor,
                collect_internals: bool = False):
        """cloth (N,3,H,W), cloth_mask (N,1,H,W), seg_cond (N,23,H,W).

        Returns dict with flow, seg_logits, warped_cloth Tensors (and the
        per-stage flows/refinements when collect_internals)."""
        cfg = self.config
        sizes = cfg.stage_sizes()
        n, _, h, w = cloth.data.shape
        cloth_in = ad.concat([cloth, cloth_mask], axis=1)
        seg_in = ad.concat([seg_cond, Tensor(_coord_grid(n, h, w))], axis=1)
        cloth_feats = [cloth_in]
        seg_feats = [seg_in]
        for cb, sb in zip(self.cloth_blocks, self.seg_blocks):
            cloth_feats.append(cb(cloth_feats[-1]))
            seg_feats.append(sb(seg_feats[-1]))

        hc, wc = sizes[cfg.stages]
        flow = Tensor(np.zeros((n, 2, hc, wc)))
        flow_feat = cloth_feats[-1]
        seg_feat = seg_feats[-1]
        stage_flows, refinements = [], []
        for s in range(cfg.stages):
            level = cfg.stages - 1 - s
            th, tw = sizes[level]
            sh, sw = flow_feat.data.shape[2], flow_feat.data.shape[3]
            flow_feat = ad.resize_bilinear(flow_feat, th, tw)
            seg_feat = ad.resize_bilinear(seg_feat, th, tw)
            scale = Tensor(np.array([tw / sw, th / sh]).reshape(1, 2, 1, 1))
            flow = ad.resize_bilinear(flow, th, tw) * scale
            delta = self.flow_heads[s](flow_feat)
            flow = flow + delta
            warped_skip = ad.warp(cloth_feats[level], flow)
            seg_skip = seg_feats[level]
            new_flow_feat = ad.leaky_relu(self.fuse_flow[s](
                ad.concat([flow_feat, seg_feat, warped_skip], axis=1)))
            seg_feat = ad.leaky_relu(self.fuse_seg[s](
                ad.concat([seg_feat, flow_feat, warped_skip, seg_skip], axis=1)))
            flow_feat = new_flow_feat
            if collect_internals:
                stage_flows.append(flow)
                refinements.append(delta)

        seg_logits = self.seg_head(ad.concat([seg_feat, seg_in], axis=1))
        warped_cloth = ad.warp(cloth, flow)
        out = {"flow": flow, "seg_logits": seg_logits,
               "warped_cloth": warped_cloth}
        if collect_internals:
            out["stage_flows"] = stage_flows
            out["refinements"] = refinements
        return out


@dataclass(frozen=True)
class CondGenOutput:
    """Full-resolution flow, 20-class logits, warped cloth and its mask."""

    flow: FlowField
    seg_logits: np.ndarray          # (H, W, 20)
    warped_cloth: RasterImage       # norm mode
    warped_mask: ClothMask

    def __post_init__(self):
        shapes = {(self.flow.height, self.flow.width),
                  self.seg_logits.shape[:2],
                  (self.warped_cloth.height, self.warped_cloth.width),
                  (self.warped_mask.height, self.warped_mask.width)}
        if len(shapes) != 1:
            raise InvalidInputError("CondGenOutput fields disagree on size")


def densepose_channels(dp: DenseposeMap) -> np.ndarray:
    """(3, H, W): part index scaled to [0,1], then u, then v."""
    return np.stack([dp.parts.astype(np.float64) / 24.0, dp.u, dp.v])


def seg_condition(agnostic_parse: ParseMap, dp: DenseposeMap) -> np.ndarray:
    onehot = one_hot_labels(agnostic_parse.labels[None], NUM_PARSE_CLASSES)[0]
    return np.concatenate([onehot, densepose_channels(dp)], axis=0)


def condgen_forward(model: CondGenModel, cloth: RasterImage,
                    cloth_mask: ClothMask, agnostic_parse: ParseMap,
                    densepose: DenseposeMap) -> CondGenOutput:
    """Single-sample inference wrapper around the batched forward."""
    h, w = model.config.resolution
    for name, obj in (("cloth", cloth), ("cloth_mask", cloth_mask),
                      ("agnostic_parse", agnostic_parse),
                      ("densepose", densepose)):
        if (obj.height, obj.width) != (h, w):
            raise InvalidInputError(
                f"{name} is {obj.width}x{obj.height}, expected {w}x{h}")
    cloth_t = Tensor(cloth.to_norm().data.transpose(2, 0, 1)[None])
    mask_t = Tensor(cloth_mask.mask.astype(np.float64)[None, None])
    seg_t = Tensor(seg_condition(agnostic_parse, densepose)[None])
    out = model.forward(cloth_t, mask_t, seg_t)
    for key in ("flow", "seg_logits", "warped_cloth"):
        if not np.isfinite(out[key].data).all():
            raise NumericError(f"non-finite values in condgen {key}")
    flow_hw2 = out["flow"].data[0].transpose(1, 2, 0)
    warped_mask = ad.warp(mask_t, out["flow"].detach()).data[0, 0]
    return CondGenOutput(
        flow=FlowField(flow_hw2),
        seg_logits=out["seg_logits"].data[0].transpose(1, 2, 0),
        warped_cloth=RasterImage(
            np.clip(out["warped_cloth"].data[0].transpose(1, 2, 0), -1, 1),
            "norm"),
        warped_mask=ClothMask((warped_mask > 0.5).astype(np.uint8)),
    )


def conditional_align(out: CondGenOutput) -> CondGenOutput:
    """Keep warped-cloth pixels only where the predicted segmentation says
    the garment is visible; body parts in front punch holes in the cloth."""
    seg = out.seg_logits.argmax(axis=2)
    keep = (out.warped_mask.mask == 1) & (seg == UPPER_CLOTHES)
    new_mask = keep.astype(np.uint8)
    cloth = out.warped_cloth.data.copy()
    cloth[~keep] = 0.0
    return CondGenOutput(flow=out.flow, seg_logits=out.seg_logits,
                         warped_cloth=RasterImage(cloth, "norm"),
                         warped_mask=ClothMask(new_mask))


@dataclass
class LossWeights:
    ce: float = 1.0
    l1: float = 1.0
    perceptual: float = 1.0
    adversarial: float = 0.1


def condgen_loss(seg_logits: Tensor, warped_cloth: Tensor,
                 truth_parse: np.ndarray, cloth_on_person: np.ndarray,
                 truth_mask: np.ndarray, d_scores,
                 weights: LossWeights | None = None,
                 extractor=None):
    """total = ce + l1 + perceptual + adversarial, each weighted.

    truth_parse (N,H,W) labels; cloth_on_person (N,3,H,W) garment crop in
    [-1,1] (zero outside mask); truth_mask (N,1,H,W). d_scores is a list
    of discriminator score Tensors on the fake sample. Returns (total,
    components) as graph Tensors."""
    w = weights or LossWeights()
    mask_t = Tensor(truth_mask)
    masked_warp = warped_cloth * mask_t
    target = Tensor(cloth_on_person)
    ce = ad.softmax_cross_entropy(seg_logits, truth_parse)
    l1 = masked_l1(warped_cloth, target, truth_mask,
                   channels=warped_cloth.data.shape[1])
    perc = perceptual_loss(masked_warp, target, extractor)
    adv = lsgan_generator_loss(d_scores)
    total = w.ce * ce + w.l1 * l1 + w.perceptual * perc + w.adversarial * adv
    if not np.isfinite(total.data):
        raise NumericError("non-finite condgen loss")
    components = {"ce": ce, "l1": l1, "perceptual": perc, "adversarial": adv,
                  "total": total}
    return total, components
