"""Loss functions for the adversarial training of both stages."""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor


def lsgan_losses(d_real, d_fake):
    """Least-squares GAN objectives.

    d_real/d_fake are patch-score maps or lists of them (one per scale).
    Per-scale means are averaged so each scale weighs equally:
    loss_d = 0.5*mean((d_real-1)^2) + 0.5*mean(d_fake^2)
    loss_g = 0.5*mean((d_fake-1)^2)
    """
    reals = d_real if isinstance(d_real, (list, tuple)) else [d_real]
    fakes = d_fake if isinstance(d_fake, (list, tuple)) else [d_fake]
    if len(reals) != len(fakes):
        raise ValueError("real/fake score lists must have equal length")
    loss_d = None
    loss_g = None
    for dr, df in zip(reals, fakes):
        dr, df = ad.as_tensor(dr), ad.as_tensor(df)
        term_d = ((dr - 1.0) ** 2).mean() * 0.5 + (df ** 2).mean() * 0.5
        term_g = ((df - 1.0) ** 2).mean() * 0.5
        loss_d = term_d if loss_d is None else loss_d + term_d
        loss_g = term_g if loss_g is None else loss_g + term_g
    scale = 1.0 / len(reals)
    return loss_d * scale, loss_g * scale


def lsgan_generator_loss(d_fake):
    """0.5*mean((d_fake-1)^2) averaged over scales."""
    fakes = d_fake if isinstance(d_fake, (list, tuple)) else [d_fake]
    loss = None
    for df in fakes:
        df = ad.as_tensor(df)
        term = ((df - 1.0) ** 2).mean() * 0.5
        loss = term if loss is None else loss + term
    return loss * (1.0 / len(fakes))


class PyramidExtractor:
    """Desk-scale perceptual feature stack: the image itself plus its
    2x and 4x block-mean-pooled copies. Needs no pretrained weights and
    preserves constants exactly, so constant offsets cost the same at
    every layer."""

    factors = (1, 2, 4)

    def __call__(self, img: Tensor) -> list[Tensor]:
        layers = [img]
        for f in self.factors[1:]:
            layers.append(ad.block_mean(img, f))
        return layers


class IdentityExtractor:
    """Single raw-pixel layer; perceptual loss collapses to plain L1."""

    def __call__(self, img: Tensor) -> list[Tensor]:
        return [img]


def perceptual_loss(a, b, extractor=None):
    """Sum over extractor layers of mean absolute feature difference."""
    extractor = extractor or PyramidExtractor()
    a, b = ad.as_tensor(a), ad.as_tensor(b)
    total = None
    for fa, fb in zip(extractor(a), extractor(b)):
        term = ad.absolute(fa - fb).mean()
        total = term if total is None else total + term
    return total


def masked_l1(a, b, mask, channels: int):
    """Mean absolute difference restricted to mask pixels.

    mask is an (N,1,H,W) constant array/Tensor of {0,1}; the mean is
    taken over mask pixels times channels. Empty mask gives 0."""
    mask = ad.as_tensor(mask)
    count = float(mask.data.sum()) * channels
    if count == 0:
        return ad.as_tensor(0.0)
    diff = ad.absolute(a - b) * mask
    return diff.sum() * (1.0 / count)
