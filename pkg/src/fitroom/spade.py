"""Final image synthesis: SPADE-normalized residual generator, the
multi-scale patch discriminators, and the realism rejection filter."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import InvalidInputError, NumericError
from .imaging import RasterImage
from .nn import Conv2d, Module, instance_norm, one_hot_labels, out_size
from .parsing import NUM_PARSE_CLASSES, ClothMask, DenseposeMap, ParseMap
from .condgen import densepose_channels

# conditioning stack: gray agnostic + one-hot parse + IUV + warped cloth
COND_CHANNELS = 1 + NUM_PARSE_CLASSES + 3 + 3


@dataclass
class SpadeGenConfig:
    resolution: tuple[int, int] = (256, 192)
    blocks: int = 5
    widths: tuple[int, ...] = (512, 256, 128, 64, 32)
    spade_hidden: int = 64
    seed: int = 0

    def __post_init__(self):
        self.widths = tuple(self.widths)
        self.resolution = tuple(self.resolution)
        if self.blocks < 3:
            raise InvalidInputError("generator needs at least 3 blocks")
        if len(self.widths) != self.blocks:
            raise InvalidInputError("widths must list one channel count per block")

    def block_sizes(self) -> list[tuple[int, int]]:
        """Coarse-to-fine resolutions, ceil-halved from the output size."""
        sizes = [self.resolution]
        for _ in range(self.blocks - 1):
            h, w = sizes[-1]
            sizes.append((-(-h // 2), -(-w // 2)))
        return list(reversed(sizes))


class SpadeParams(Module):
    """Shared 3x3 trunk on the conditioning map with gamma/beta heads.

    gamma head bias starts at 1 so a fresh layer is near-identity."""

    def __init__(self, channels, cond_channels, hidden, rng):
        self.trunk = Conv2d(cond_channels, hidden, 3, rng=rng)
        self.gamma = Conv2d(hidden, channels, 3, rng=rng, bias_value=1.0)
        self.beta = Conv2d(hidden, channels, 3, rng=rng)

    def maps(self, cond: Tensor) -> tuple[Tensor, Tensor]:
        h = ad.relu(self.trunk(cond))
        return self.gamma(h), self.beta(h)


def spade_normalize(x: Tensor, cond: Tensor, params: SpadeParams,
                    eps: float = 1e-5) -> Tensor:
    """Instance-normalize x, then modulate with per-pixel gamma/beta maps
    computed from the conditioning tensor."""
    if cond.data.shape[2:] != x.data.shape[2:]:
        raise InvalidInputError(
            f"conditioning {cond.data.shape} does not match activation "
            f"{x.data.shape} spatially")
    gamma, beta = params.maps(cond)
    return gamma * instance_norm(x, eps) + beta


class SpadeResBlock(Module):
    """Residual block with two SPADE layers; plain 1x1 skip on width change."""

    def __init__(self, cin, cout, cond_channels, hidden, rng):
        self.spade1 = SpadeParams(cin, cond_channels, hidden, rng)
        self.conv1 = Conv2d(cin, cout, 3, rng=rng)
        self.spade2 = SpadeParams(cout, cond_channels, hidden, rng)
        self.conv2 = Conv2d(cout, cout, 3, rng=rng)
        self.proj = Conv2d(cin, cout, 1, pad=0, rng=rng) if cin != cout else None

    def __call__(self, x: Tensor, cond: Tensor) -> Tensor:
        h = self.conv1(ad.leaky_relu(spade_normalize(x, cond, self.spade1)))
        h = self.conv2(ad.leaky_relu(spade_normalize(h, cond, self.spade2)))
        skip = self.proj(x) if self.proj is not None else x
        return h + skip


class SpadeGenModel(Module):
    def __init__(self, config: SpadeGenConfig):
        rng = np.random.default_rng(config.seed)
        self.config = config
        w = config.widths
        self.stem = Conv2d(COND_CHANNELS, w[0], 3, rng=rng)
        self.blocks = []
        cin = w[0]
        for width in w:
            self.blocks.append(SpadeResBlock(cin, width, COND_CHANNELS,
                                             config.spade_hidden, rng))
            cin = width
        self.head = Conv2d(cin, 3, 3, rng=rng)

    def forward(self, cond_full: Tensor) -> Tensor:
        """cond_full: (N, 27, H, W) at the working resolution; returns a
        (N, 3, H, W) image in [-1, 1]."""
        sizes = self.config.block_sizes()
        cond0 = ad.resize_bilinear(cond_full, *sizes[0])
        x = self.stem(cond0)
        for i, block in enumerate(self.blocks):
            th, tw = sizes[i]
            x = ad.resize_bilinear(x, th, tw)
            cond = ad.resize_bilinear(cond_full, th, tw)
            x = block(x, cond)
        return ad.tanh(self.head(ad.leaky_relu(x)))


def build_imggen_condition(agnostic: RasterImage, parse: ParseMap,
                           densepose: DenseposeMap,
                           warped_cloth: RasterImage) -> np.ndarray:
    """(27, H, W) conditioning stack shared by generator, discriminator
    and the rejection filter."""
    agn = agnostic.to_norm().data.transpose(2, 0, 1)
    if agn.shape[0] != 1:
        raise InvalidInputError("agnostic image must be single-channel")
    onehot = one_hot_labels(parse.labels[None], NUM_PARSE_CLASSES)[0]
    cloth = warped_cloth.to_norm().data.transpose(2, 0, 1)
    return np.concatenate([agn, onehot, densepose_channels(densepose), cloth])


def imggen_forward(model: SpadeGenModel, agnostic: RasterImage,
                   parse: ParseMap, densepose: DenseposeMap,
                   warped_cloth: RasterImage) -> RasterImage:
    h, w = model.config.resolution
    for name, obj in (("agnostic", agnostic), ("parse", parse),
                      ("densepose", densepose), ("warped_cloth", warped_cloth)):
        if (obj.height, obj.width) != (h, w):
            raise InvalidInputError(
                f"{name} is {obj.width}x{obj.height}, expected {w}x{h}")
    cond = Tensor(build_imggen_condition(agnostic, parse, densepose,
                                         warped_cloth)[None])
    out = model.forward(cond)
    if not np.isfinite(out.data).all():
        raise NumericError("non-finite values in generated image")
    return RasterImage(out.data[0].transpose(1, 2, 0), "norm")


@dataclass
class DiscriminatorConfig:
    scales: int = 2
    in_channels: int = 3 + COND_CHANNELS
    width: int = 64
    layers: int = 3
    kernel: int = 4
    seed: int = 0


def _patch_pad(kernel: int) -> int:
    """PatchGAN padding: 1 for the classic k=4, centered for odd kernels."""
    return kernel // 2 - 1 if kernel % 2 == 0 else kernel // 2


class PatchDiscriminator(Module):
    def __init__(self, cfg: DiscriminatorConfig, rng):
        self.convs = []
        cin = cfg.in_channels
        width = cfg.width
        for _ in range(cfg.layers):
            self.convs.append(Conv2d(cin, width, cfg.kernel, stride=2,
                                     pad=_patch_pad(cfg.kernel), rng=rng))
            cin = width
            width = min(width * 2, 8 * cfg.width)
        self.head = Conv2d(cin, 1, cfg.kernel, stride=1,
                           pad=_patch_pad(cfg.kernel), rng=rng)

    def __call__(self, x: Tensor) -> Tensor:
        for conv in self.convs:
            x = ad.leaky_relu(conv(x))
        return self.head(x)

    def score_map_size(self, h: int, w: int, cfg: DiscriminatorConfig):
        """Stride arithmetic: n -> floor((n + 2p - k)/s) + 1 per layer."""
        p = _patch_pad(cfg.kernel)
        for _ in range(cfg.layers):
            h, w = out_size(h, cfg.kernel, 2, p), out_size(w, cfg.kernel, 2, p)
        return out_size(h, cfg.kernel, 1, p), out_size(w, cfg.kernel, 1, p)


class MultiScaleDiscriminator(Module):
    """Identical patch classifiers applied to a 2x mean-pooled pyramid;
    architectures match, parameters do not."""

    def __init__(self, cfg: DiscriminatorConfig):
        rng = np.random.default_rng(cfg.seed)
        self.config = cfg
        self.discs = [PatchDiscriminator(cfg, rng) for _ in range(cfg.scales)]


def multiscale_discriminate(d: MultiScaleDiscriminator, img: Tensor,
                            cond: Tensor) -> list[Tensor]:
    """One patch-score map per scale; scale k sees the k-times 2x2
    mean-pooled image concatenated with the conditioning resized to it."""
    scores = []
    level = img
    for k, disc in enumerate(d.discs):
        if k > 0:
            level = ad.block_mean(level, 2)
        h, w = level.data.shape[2], level.data.shape[3]
        cond_k = ad.resize_bilinear(cond, h, w)
        scores.append(disc(ad.concat([level, cond_k], axis=1)))
    return scores


def realism_score(d: MultiScaleDiscriminator, img: np.ndarray,
                  cond: np.ndarray) -> float:
    """Mean over scales and patches of the logistic-squashed raw scores."""
    scores = multiscale_discriminate(d, Tensor(img), Tensor(cond))
    per_scale = [float(ad.sigmoid(s).data.mean()) for s in scores]
    return float(np.mean(per_scale))


def rejection_filter(d: MultiScaleDiscriminator, img: RasterImage,
                     cond: np.ndarray, threshold: float = 0.3
                     ) -> tuple[bool, float]:
    """Accept iff the realism score reaches the threshold.

    Returns (accepted, score); the score is logged either way so callers
    can retry or surface it."""
    if not 0.0 <= threshold <= 1.0:
        raise InvalidInputError("rejection threshold must lie in [0, 1]")
    img_nchw = img.to_norm().data.transpose(2, 0, 1)[None]
    score = realism_score(d, img_nchw, cond[None])
    return score >= threshold, score
