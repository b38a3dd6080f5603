import numpy as np
import pytest

from fitroom import autodiff as ad
from fitroom.autodiff import Tensor
from fitroom.condgen import (CondGenConfig, CondGenModel, CondGenOutput,
                             LossWeights, condgen_forward, condgen_loss,
                             conditional_align, seg_condition)
from fitroom.errors import InvalidInputError
from fitroom.imaging import FlowField, RasterImage
from fitroom.nn import finite_difference_check, one_hot_labels
from fitroom.parsing import LEFT_ARM, NUM_PARSE_CLASSES, UPPER_CLOTHES, ClothMask
from fitroom.spade import DiscriminatorConfig, MultiScaleDiscriminator, \
    multiscale_discriminate

RES = (64, 48)
TOY = dict(resolution=RES, stages=5, widths=(8, 16, 24, 32, 32), seed=0)


@pytest.fixture(scope="module")
def toy_model():
    return CondGenModel(CondGenConfig(**TOY))


def _inputs(sample):
    cloth = Tensor(sample.cloth.to_norm().data.transpose(2, 0, 1)[None])
    mask = Tensor(sample.cloth_mask.mask.astype(np.float64)[None, None])
    seg = Tensor(seg_condition(sample.parse, sample.densepose)[None])
    return cloth, mask, seg


class TestForward:
    def test_output_shapes(self, toy_model, samples64):
        s = samples64[0]
        out = condgen_forward(toy_model, s.cloth, s.cloth_mask, s.parse,
                              s.densepose)
        assert out.flow.offsets.shape == (64, 48, 2)
        assert out.seg_logits.shape == (64, 48, 20)
        assert out.warped_cloth.data.shape == (64, 48, 3)
        assert out.warped_mask.mask.shape == (64, 48)

    def test_zero_initialized_flow_head_gives_identity_warp(self, toy_model,
                                                            samples64):
        s = samples64[1]
        out = condgen_forward(toy_model, s.cloth, s.cloth_mask, s.parse,
                              s.densepose)
        assert np.all(out.flow.offsets == 0)
        assert np.array_equal(out.warped_cloth.data, s.cloth.to_norm().data)
        assert np.array_equal(out.warped_mask.mask, s.cloth_mask.mask)

    def test_deterministic_given_seed_and_config(self, samples64):
        s = samples64[2]
        outs = []
        for _ in range(2):
            model = CondGenModel(CondGenConfig(**TOY))
            out = condgen_forward(model, s.cloth, s.cloth_mask, s.parse,
                                  s.densepose)
            outs.append(out)
        assert np.array_equal(outs[0].seg_logits, outs[1].seg_logits)
        assert np.array_equal(outs[0].flow.offsets, outs[1].flow.offsets)

    def test_resolution_mismatch_rejected(self, toy_model):
        from fitroom.datasets import synth_sample

        small = synth_sample(0, (32, 24))
        with pytest.raises(InvalidInputError):
            condgen_forward(toy_model, small.cloth, small.cloth_mask,
                            small.parse, small.densepose)

    def test_telescoping_flow_refinement(self, samples64):
        """final flow must equal the sum of per-stage refinements pushed
        through the same upsample-and-rescale chain."""
        cfg = CondGenConfig(**{**TOY, "seed": 3})
        model = CondGenModel(cfg)
        # give the zero-initialized flow heads nonzero weights
        rng = np.random.default_rng(5)
        for head in model.flow_heads:
            head.w.data = rng.normal(0, 0.05, size=head.w.data.shape)
            head.b.data = rng.normal(0, 0.05, size=head.b.data.shape)
        s = samples64[3]
        out = model.forward(*_inputs(s), collect_internals=True)
        sizes = cfg.stage_sizes()
        total = None
        for s_idx, delta in enumerate(out["refinements"]):
            flow = delta
            for nxt in range(s_idx + 1, cfg.stages):
                th, tw = sizes[cfg.stages - 1 - nxt]
                sh, sw = flow.data.shape[2], flow.data.shape[3]
                scale = np.array([tw / sw, th / sh]).reshape(1, 2, 1, 1)
                flow = ad.resize_bilinear(flow, th, tw) * Tensor(scale)
            total = flow.data if total is None else total + flow.data
        assert np.abs(total - out["flow"].data).max() < 1e-9


def _random_output(rng, h=8, w=6):
    logits = rng.normal(size=(h, w, NUM_PARSE_CLASSES))
    mask = (rng.random((h, w)) > 0.4).astype(np.uint8)
    cloth = rng.uniform(-1, 1, (h, w, 3))
    return CondGenOutput(flow=FlowField.zero(h, w), seg_logits=logits,
                         warped_cloth=RasterImage(cloth, "norm"),
                         warped_mask=ClothMask(mask))


class TestConditionalAlign:
    def test_everywhere_garment_leaves_output_unchanged(self):
        rng = np.random.default_rng(0)
        out = _random_output(rng)
        logits = np.full((8, 6, NUM_PARSE_CLASSES), -5.0)
        logits[:, :, UPPER_CLOTHES] = 5.0
        out = CondGenOutput(out.flow, logits, out.warped_cloth,
                            out.warped_mask)
        aligned = conditional_align(out)
        assert np.array_equal(aligned.warped_mask.mask, out.warped_mask.mask)
        inside = out.warped_mask.mask == 1
        assert np.array_equal(aligned.warped_cloth.data[inside],
                              out.warped_cloth.data[inside])

    def test_body_part_in_front_punches_hole(self):
        rng = np.random.default_rng(1)
        out = _random_output(rng)
        logits = np.full((8, 6, NUM_PARSE_CLASSES), -5.0)
        logits[:, :, UPPER_CLOTHES] = 5.0
        logits[2, 3, :] = -5.0
        logits[2, 3, LEFT_ARM] = 5.0
        mask = out.warped_mask.mask.copy()
        mask[2, 3] = 1
        out = CondGenOutput(out.flow, logits, out.warped_cloth,
                            ClothMask(mask))
        aligned = conditional_align(out)
        assert aligned.warped_mask.mask[2, 3] == 0
        assert np.all(aligned.warped_cloth.data[2, 3] == 0)

    def test_matches_per_pixel_reference(self):
        rng = np.random.default_rng(2)
        for _ in range(10):
            out = _random_output(rng)
            aligned = conditional_align(out)
            h, w = out.warped_mask.mask.shape
            for y in range(h):
                for x in range(w):
                    keep = (out.warped_mask.mask[y, x] == 1
                            and out.seg_logits[y, x].argmax() == UPPER_CLOTHES)
                    assert aligned.warped_mask.mask[y, x] == int(keep)
                    if keep:
                        assert np.array_equal(aligned.warped_cloth.data[y, x],
                                              out.warped_cloth.data[y, x])
                    else:
                        assert np.all(aligned.warped_cloth.data[y, x] == 0)

    def test_never_adds_mask_pixels(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            out = _random_output(rng)
            aligned = conditional_align(out)
            added = (aligned.warped_mask.mask == 1) & (out.warped_mask.mask == 0)
            assert not added.any()
            assert aligned.warped_mask.area() <= out.warped_mask.area()


class TestLoss:
    def _perfect_setup(self):
        rng = np.random.default_rng(4)
        h, w = 8, 6
        parse = rng.integers(0, NUM_PARSE_CLASSES, size=(1, h, w))
        logits = Tensor(50.0 * one_hot_labels(parse, NUM_PARSE_CLASSES))
        mask = (rng.random((1, 1, h, w)) > 0.5).astype(np.float64)
        cop = rng.uniform(-1, 1, (1, 3, h, w)) * mask
        warped = Tensor(cop.copy())
        d_scores = [Tensor(np.ones((1, 1, 3, 2)))]
        return logits, warped, parse, cop, mask, d_scores

    def test_perfect_prediction_zeroes_every_term(self):
        logits, warped, parse, cop, mask, d_scores = self._perfect_setup()
        total, comps = condgen_loss(logits, warped, parse, cop, mask,
                                    d_scores)
        for name in ("ce", "l1", "perceptual", "adversarial"):
            assert abs(comps[name].item()) < 1e-6, name
        assert abs(total.item()) < 1e-6

    def test_uniform_logits_give_log_20(self):
        logits, warped, parse, cop, mask, d_scores = self._perfect_setup()
        uniform = Tensor(np.zeros_like(logits.data))
        _, comps = condgen_loss(uniform, warped, parse, cop, mask, d_scores)
        assert abs(comps["ce"].item() - np.log(20)) < 1e-9

    def test_zero_weights_zero_total(self):
        rng = np.random.default_rng(5)
        logits = Tensor(rng.normal(size=(1, NUM_PARSE_CLASSES, 8, 6)))
        warped = Tensor(rng.uniform(-1, 1, (1, 3, 8, 6)))
        parse = rng.integers(0, NUM_PARSE_CLASSES, size=(1, 8, 6))
        cop = rng.uniform(-1, 1, (1, 3, 8, 6))
        mask = np.ones((1, 1, 8, 6))
        d_scores = [Tensor(rng.normal(size=(1, 1, 3, 2)))]
        total, _ = condgen_loss(logits, warped, parse, cop, mask, d_scores,
                                LossWeights(0.0, 0.0, 0.0, 0.0))
        assert total.item() == 0.0

    def test_total_is_weighted_sum_of_components(self):
        rng = np.random.default_rng(6)
        logits = Tensor(rng.normal(size=(1, NUM_PARSE_CLASSES, 8, 6)))
        warped = Tensor(rng.uniform(-1, 1, (1, 3, 8, 6)))
        parse = rng.integers(0, NUM_PARSE_CLASSES, size=(1, 8, 6))
        cop = rng.uniform(-1, 1, (1, 3, 8, 6))
        mask = np.ones((1, 1, 8, 6))
        d_scores = [Tensor(rng.normal(size=(1, 1, 3, 2)))]
        w = LossWeights(ce=0.7, l1=1.3, perceptual=0.5, adversarial=0.2)
        total, comps = condgen_loss(logits, warped, parse, cop, mask,
                                    d_scores, w)
        explicit = (w.ce * comps["ce"].item() + w.l1 * comps["l1"].item()
                    + w.perceptual * comps["perceptual"].item()
                    + w.adversarial * comps["adversarial"].item())
        assert abs(total.item() - explicit) < 1e-6
        assert all(comps[k].item() >= 0 for k in
                   ("ce", "l1", "perceptual", "adversarial"))


def micro_gradcheck_setup():
    """Tiny condgen + discriminator on 8x6 inputs for FD checking."""
    cfg = CondGenConfig(resolution=(8, 6), stages=2, widths=(1, 1), seed=9)
    model = CondGenModel(cfg)
    rng = np.random.default_rng(10)
    # randomize the zero-initialized flow heads so their gradients are live
    for head in model.flow_heads:
        head.w.data = rng.normal(0, 0.1, size=head.w.data.shape)
        head.b.data = rng.normal(0, 0.1, size=head.b.data.shape)
    disc = MultiScaleDiscriminator(DiscriminatorConfig(
        scales=1, in_channels=3 + NUM_PARSE_CLASSES + 3, width=1, layers=1,
        kernel=3, seed=11))
    cloth = Tensor(rng.uniform(-1, 1, (1, 3, 8, 6)))
    mask = Tensor((rng.random((1, 1, 8, 6)) > 0.4).astype(np.float64))
    seg_cond = Tensor(rng.normal(size=(1, 23, 8, 6)) * 0.5)
    parse = rng.integers(0, NUM_PARSE_CLASSES, size=(1, 8, 6))
    cop = rng.uniform(-1, 1, (1, 3, 8, 6))
    cop_mask = (rng.random((1, 1, 8, 6)) > 0.3).astype(np.float64)
    dp = rng.random((1, 3, 8, 6))

    def build_loss():
        out = model.forward(cloth, mask, seg_cond)
        fake_cond = ad.concat([ad.softmax(out["seg_logits"]), Tensor(dp)],
                              axis=1)
        d_scores = multiscale_discriminate(disc, out["warped_cloth"],
                                           fake_cond)
        total, _ = condgen_loss(out["seg_logits"], out["warped_cloth"],
                                parse, cop, cop_mask, d_scores)
        return total

    params = dict(model.named_parameters())
    params.update({f"disc.{k}": v for k, v in disc.named_parameters().items()})
    return build_loss, params


def test_condgen_loss_gradient_check_micro():
    build_loss, params = micro_gradcheck_setup()
    err = finite_difference_check(build_loss, params)
    assert err < 1e-4, f"worst relative error {err}"
