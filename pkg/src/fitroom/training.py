"""Desk-scale adversarial training for both generator stages, with
reproducible seeding, a deterministic checkpoint format, and CSV loss
histories (rows of step, component, value)."""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .condgen import (CondGenConfig, CondGenModel, LossWeights, condgen_loss,
                      densepose_channels, seg_condition)
from .datasets import TryOnSample, cloth_on_person
from .errors import InvalidInputError, NumericError, ValidationError
from .losses import lsgan_losses, lsgan_generator_loss, perceptual_loss
from .nn import Module, one_hot_labels
from .parsing import (NUM_PARSE_CLASSES, UPPER_CLOTHES, generate_agnostic,
                      remove_background)
from .spade import (COND_CHANNELS, DiscriminatorConfig, MultiScaleDiscriminator,
                    SpadeGenConfig, SpadeGenModel, multiscale_discriminate)

CKPT_MAGIC = b"FITROOMCKPT1\n"


@dataclass
class TrainConfig:
    seed: int = 7
    resolution: tuple[int, int] = (256, 192)
    batch_size: int = 8
    steps: int = 2000
    lr: float = 2e-4
    beta1: float = 0.5
    beta2: float = 0.999
    weights: LossWeights = field(default_factory=LossWeights)
    disc_scales: int = 2
    disc_width: int = 64
    condgen_stages: int = 5
    condgen_widths: tuple[int, ...] = (64, 128, 256, 512, 512)
    imggen_blocks: int = 5
    imggen_widths: tuple[int, ...] = (512, 256, 128, 64, 32)
    spade_hidden: int = 64
    checkpoint_every: int = 0
    checkpoint_dir: str | None = None

    def __post_init__(self):
        if self.lr <= 0 or self.batch_size < 1 or self.steps < 0:
            raise InvalidInputError("rates and sizes must be positive")
        self.resolution = tuple(self.resolution)
        self.condgen_widths = tuple(self.condgen_widths)
        self.imggen_widths = tuple(self.imggen_widths)

    @classmethod
    def toy(cls, seed: int = 7, steps: int = 300) -> "TrainConfig":
        return cls(seed=seed, resolution=(64, 48), batch_size=2, steps=steps,
                   disc_width=12, condgen_widths=(16, 16, 24, 32, 32),
                   imggen_blocks=3, imggen_widths=(48, 32, 24),
                   spade_hidden=16)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["weights"] = asdict(self.weights)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        d = dict(d)
        d["weights"] = LossWeights(**d.get("weights", {}))
        d["resolution"] = tuple(d["resolution"])
        d["condgen_widths"] = tuple(d["condgen_widths"])
        d["imggen_widths"] = tuple(d["imggen_widths"])
        return cls(**d)


class Adam:
    """Decoupled-moment adaptive update with bias correction."""

    def __init__(self, params: dict[str, Tensor], lr=2e-4,
                 betas=(0.5, 0.999), eps=1e-8):
        self.params = params
        self.lr = lr
        self.b1, self.b2 = betas
        self.eps = eps
        self.t = 0
        self.m = {k: np.zeros_like(p.data) for k, p in params.items()}
        self.v = {k: np.zeros_like(p.data) for k, p in params.items()}

    def step(self):
        self.t += 1
        bc1 = 1.0 - self.b1 ** self.t
        bc2 = 1.0 - self.b2 ** self.t
        for k, p in self.params.items():
            g = p.grad if p.grad is not None else np.zeros_like(p.data)
            self.m[k] = self.b1 * self.m[k] + (1.0 - self.b1) * g
            self.v[k] = self.b2 * self.v[k] + (1.0 - self.b2) * g * g
            mhat = self.m[k] / bc1
            vhat = self.v[k] / bc2
            p.data -= self.lr * mhat / (np.sqrt(vhat) + self.eps)

    def state_arrays(self, prefix: str) -> dict[str, np.ndarray]:
        out = {f"{prefix}.t": np.array([self.t], dtype=np.float64)}
        for k in self.params:
            out[f"{prefix}.m.{k}"] = self.m[k]
            out[f"{prefix}.v.{k}"] = self.v[k]
        return out


# ------------------------------------------------------------ checkpoint --

@dataclass
class Checkpoint:
    kind: str
    config: dict
    seed: int
    step: int
    params: dict[str, np.ndarray]
    opt_state: dict[str, np.ndarray] = field(default_factory=dict)
    extra: dict = field(default_factory=dict)


def save_checkpoint(ckpt: Checkpoint, path) -> None:
    """Self-describing deterministic binary: magic, JSON header with array
    metadata, then raw little-endian blobs in header order."""
    entries = []
    blobs = []
    for group, arrays in (("params", ckpt.params), ("opt", ckpt.opt_state)):
        for name in sorted(arrays):
            arr = np.ascontiguousarray(arrays[name])
            entries.append({"group": group, "name": name,
                            "dtype": str(arr.dtype), "shape": list(arr.shape)})
            blobs.append(arr.tobytes())
    header = json.dumps({"kind": ckpt.kind, "config": ckpt.config,
                         "seed": ckpt.seed, "step": ckpt.step,
                         "extra": ckpt.extra, "arrays": entries},
                        sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(CKPT_MAGIC)
        fh.write(len(header).to_bytes(8, "little"))
        fh.write(header)
        for blob in blobs:
            fh.write(blob)


def load_checkpoint(path) -> Checkpoint:
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise ValidationError(f"cannot read checkpoint {path}: {exc}") from exc
    if not raw.startswith(CKPT_MAGIC):
        raise ValidationError(f"{path}: not a checkpoint file")
    off = len(CKPT_MAGIC)
    hlen = int.from_bytes(raw[off:off + 8], "little")
    off += 8
    try:
        header = json.loads(raw[off:off + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ValidationError(f"{path}: corrupt header: {exc}") from exc
    off += hlen
    groups = {"params": {}, "opt": {}}
    for entry in header["arrays"]:
        count = int(np.prod(entry["shape"])) if entry["shape"] else 1
        dtype = np.dtype(entry["dtype"])
        nbytes = count * dtype.itemsize
        arr = np.frombuffer(raw[off:off + nbytes], dtype=dtype).reshape(
            entry["shape"]).copy()
        groups[entry["group"]][entry["name"]] = arr
        off += nbytes
    return Checkpoint(kind=header["kind"], config=header["config"],
                      seed=header["seed"], step=header["step"],
                      params=groups["params"], opt_state=groups["opt"],
                      extra=header.get("extra", {}))


def write_history(history: list[dict], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "component", "value"])
        for row in history:
            step = row["step"]
            for key, value in row.items():
                if key != "step":
                    writer.writerow([step, key, repr(float(value))])


# --------------------------------------------------------- data plumbing --

@dataclass
class PreparedSample:
    cloth: np.ndarray          # (3,H,W) in [-1,1]
    cloth_mask: np.ndarray     # (1,H,W)
    seg_cond: np.ndarray       # (23,H,W)
    dp: np.ndarray             # (3,H,W)
    agnostic: np.ndarray       # (1,H,W) in [-1,1]
    truth_parse: np.ndarray    # (H,W) int labels of the dressed person
    truth_onehot: np.ndarray   # (20,H,W)
    cop: np.ndarray            # (3,H,W) garment crop on the person
    cop_mask: np.ndarray       # (1,H,W)
    dressed: np.ndarray        # (3,H,W) in [-1,1]


def prepare_sample(sample: TryOnSample) -> PreparedSample:
    if sample.dressed is None or sample.dressed_parse is None:
        raise InvalidInputError("training needs samples with dressed truth")
    no_bg = remove_background(sample.person, sample.parse)
    agn_img, agn_parse = generate_agnostic(no_bg, sample.parse, sample.pose)
    cop, cop_mask = cloth_on_person(sample)
    truth_labels = sample.dressed_parse.labels.astype(np.int64)
    return PreparedSample(
        cloth=sample.cloth.to_norm().data.transpose(2, 0, 1),
        cloth_mask=sample.cloth_mask.mask.astype(np.float64)[None],
        seg_cond=seg_condition(agn_parse, sample.densepose),
        dp=densepose_channels(sample.densepose),
        agnostic=agn_img.to_norm().data.transpose(2, 0, 1),
        truth_parse=truth_labels,
        truth_onehot=one_hot_labels(truth_labels[None], NUM_PARSE_CLASSES)[0],
        cop=cop.transpose(2, 0, 1),
        cop_mask=cop_mask[None],
        dressed=sample.dressed.to_norm().data.transpose(2, 0, 1),
    )


def _stack(prep: list[PreparedSample], idx, attr) -> np.ndarray:
    return np.stack([getattr(prep[i], attr) for i in idx])


@dataclass
class TrainResult:
    checkpoint: Checkpoint
    history: list[dict]
    aborted: bool = False


def _zero_all(*modules: Module):
    for m in modules:
        m.zero_grad()


def _finite(*values: float) -> bool:
    return all(np.isfinite(v) for v in values)


def _maybe_save(cfg: TrainConfig, ckpt: Checkpoint, step: int) -> None:
    if cfg.checkpoint_every and cfg.checkpoint_dir and \
            step % cfg.checkpoint_every == 0:
        out = Path(cfg.checkpoint_dir)
        out.mkdir(parents=True, exist_ok=True)
        save_checkpoint(ckpt, out / f"{ckpt.kind}_{step:06d}.ckpt")


def _bundle(kind: str, cfg: TrainConfig, gen: Module,
            disc: Module, opts: list[tuple[str, Adam]], step: int,
            aborted: bool = False) -> Checkpoint:
    params = {f"gen.{k}": v for k, v in gen.state_dict().items()}
    params.update({f"disc.{k}": v for k, v in disc.state_dict().items()})
    opt_state = {}
    for prefix, opt in opts:
        opt_state.update(opt.state_arrays(prefix))
    return Checkpoint(kind=kind, config=cfg.to_dict(), seed=cfg.seed,
                      step=step, params=params, opt_state=opt_state,
                      extra={"aborted": aborted})


def condgen_models(cfg: TrainConfig) -> tuple[CondGenModel, MultiScaleDiscriminator]:
    gen = CondGenModel(CondGenConfig(resolution=cfg.resolution,
                                     stages=cfg.condgen_stages,
                                     widths=cfg.condgen_widths,
                                     seed=cfg.seed))
    disc = MultiScaleDiscriminator(DiscriminatorConfig(
        scales=cfg.disc_scales, in_channels=3 + NUM_PARSE_CLASSES + 3,
        width=cfg.disc_width, seed=cfg.seed + 1))
    return gen, disc


def imggen_models(cfg: TrainConfig) -> tuple[SpadeGenModel, MultiScaleDiscriminator]:
    gen = SpadeGenModel(SpadeGenConfig(resolution=cfg.resolution,
                                       blocks=cfg.imggen_blocks,
                                       widths=cfg.imggen_widths,
                                       spade_hidden=cfg.spade_hidden,
                                       seed=cfg.seed))
    disc = MultiScaleDiscriminator(DiscriminatorConfig(
        scales=cfg.disc_scales, in_channels=3 + COND_CHANNELS,
        width=cfg.disc_width, seed=cfg.seed + 1))
    return gen, disc


def condgen_from_checkpoint(ckpt: Checkpoint):
    cfg = TrainConfig.from_dict(ckpt.config)
    gen, disc = condgen_models(cfg)
    gen.load_state_dict({k[4:]: v for k, v in ckpt.params.items()
                         if k.startswith("gen.")})
    disc.load_state_dict({k[5:]: v for k, v in ckpt.params.items()
                          if k.startswith("disc.")})
    return gen, disc, cfg


def imggen_from_checkpoint(ckpt: Checkpoint):
    cfg = TrainConfig.from_dict(ckpt.config)
    gen, disc = imggen_models(cfg)
    gen.load_state_dict({k[4:]: v for k, v in ckpt.params.items()
                         if k.startswith("gen.")})
    disc.load_state_dict({k[5:]: v for k, v in ckpt.params.items()
                          if k.startswith("disc.")})
    return gen, disc, cfg


# ------------------------------------------------------------- training --

def train_condgen(cfg: TrainConfig, samples: list[TryOnSample]) -> TrainResult:
    """Alternating generator/discriminator optimization of the condition
    generator. Deterministic given cfg.seed."""
    prep = [prepare_sample(s) for s in samples]
    gen, disc = condgen_models(cfg)
    opt_g = Adam(gen.named_parameters(), cfg.lr, (cfg.beta1, cfg.beta2))
    opt_d = Adam(disc.named_parameters(), cfg.lr, (cfg.beta1, cfg.beta2))
    rng = np.random.default_rng(cfg.seed + 2)
    history: list[dict] = []
    aborted = False

    for step in range(1, cfg.steps + 1):
        idx = rng.integers(0, len(prep), size=cfg.batch_size)
        cloth = Tensor(_stack(prep, idx, "cloth"))
        cmask = Tensor(_stack(prep, idx, "cloth_mask"))
        seg_cond = Tensor(_stack(prep, idx, "seg_cond"))
        dp = _stack(prep, idx, "dp")
        cop = _stack(prep, idx, "cop")
        cop_mask = _stack(prep, idx, "cop_mask")
        truth_parse = _stack(prep, idx, "truth_parse")
        truth_onehot = _stack(prep, idx, "truth_onehot")

        try:
            out = gen.forward(cloth, cmask, seg_cond)
            fake_img = out["warped_cloth"]
            fake_cond = ad.concat([ad.softmax(out["seg_logits"]), Tensor(dp)],
                                  axis=1)
            real_cond = Tensor(np.concatenate([truth_onehot, dp], axis=1))

            _zero_all(gen, disc)
            d_real = multiscale_discriminate(disc, Tensor(cop), real_cond)
            d_fake_det = multiscale_discriminate(disc, fake_img.detach(),
                                                 fake_cond.detach())
            loss_d, _ = lsgan_losses(d_real, d_fake_det)
            loss_d.backward()
            opt_d.step()

            _zero_all(gen, disc)
            d_fake = multiscale_discriminate(disc, fake_img, fake_cond)
            total, comps = condgen_loss(out["seg_logits"], fake_img,
                                        truth_parse, cop, cop_mask, d_fake,
                                        cfg.weights)
            total.backward()
            opt_g.step()
        except NumericError:
            aborted = True
            break

        row = {"step": step, **{k: float(v.data) for k, v in comps.items()},
               "loss_d": float(loss_d.data)}
        history.append(row)
        if not _finite(*row.values()):
            aborted = True
            break
        _maybe_save(cfg, _bundle("condgen", cfg, gen, disc,
                                 [("adam_g", opt_g), ("adam_d", opt_d)],
                                 step), step)

    ckpt = _bundle("condgen", cfg, gen, disc,
                   [("adam_g", opt_g), ("adam_d", opt_d)],
                   len(history), aborted)
    return TrainResult(ckpt, history, aborted)


def condgen_infer_batch(gen: CondGenModel, prep: list[PreparedSample],
                        idx) -> tuple[np.ndarray, np.ndarray]:
    """Frozen condition-generator pass: returns (aligned warped cloth
    (N,3,H,W), predicted parse labels (N,H,W))."""
    cloth = Tensor(_stack(prep, idx, "cloth"))
    cmask = Tensor(_stack(prep, idx, "cloth_mask"))
    seg_cond = Tensor(_stack(prep, idx, "seg_cond"))
    out = gen.forward(cloth, cmask, seg_cond)
    pred_parse = out["seg_logits"].data.argmax(axis=1)
    warped_mask = ad.warp(cmask, Tensor(out["flow"].data)).data > 0.5
    keep = warped_mask & (pred_parse[:, None] == UPPER_CLOTHES)
    warped = out["warped_cloth"].data * keep
    return warped, pred_parse


def train_imggen(cfg: TrainConfig, samples: list[TryOnSample],
                 condgen_ckpt: Checkpoint) -> TrainResult:
    """Train the SPADE generator against the frozen condition generator."""
    prep = [prepare_sample(s) for s in samples]
    cond_gen, _, _ = condgen_from_checkpoint(condgen_ckpt)
    gen, disc = imggen_models(cfg)
    opt_g = Adam(gen.named_parameters(), cfg.lr, (cfg.beta1, cfg.beta2))
    opt_d = Adam(disc.named_parameters(), cfg.lr, (cfg.beta1, cfg.beta2))
    rng = np.random.default_rng(cfg.seed + 3)
    history: list[dict] = []
    aborted = False

    for step in range(1, cfg.steps + 1):
        idx = rng.integers(0, len(prep), size=cfg.batch_size)
        try:
            warped, pred_parse = condgen_infer_batch(cond_gen, prep, idx)
            agn = _stack(prep, idx, "agnostic")
            dp = _stack(prep, idx, "dp")
            onehot = one_hot_labels(pred_parse, NUM_PARSE_CLASSES)
            cond = Tensor(np.concatenate([agn, onehot, dp, warped], axis=1))
            real = _stack(prep, idx, "dressed")

            fake = gen.forward(cond)

            _zero_all(gen, disc)
            d_real = multiscale_discriminate(disc, Tensor(real), cond)
            d_fake_det = multiscale_discriminate(disc, fake.detach(), cond)
            loss_d, _ = lsgan_losses(d_real, d_fake_det)
            loss_d.backward()
            opt_d.step()

            _zero_all(gen, disc)
            d_fake = multiscale_discriminate(disc, fake, cond)
            l1 = ad.absolute(fake - Tensor(real)).mean()
            perc = perceptual_loss(fake, Tensor(real))
            adv = lsgan_generator_loss(d_fake)
            w = cfg.weights
            total = w.l1 * l1 + w.perceptual * perc + w.adversarial * adv
            total.backward()
            opt_g.step()
        except NumericError:
            aborted = True
            break

        row = {"step": step, "l1": float(l1.data),
               "perceptual": float(perc.data),
               "adversarial": float(adv.data), "total": float(total.data),
               "loss_d": float(loss_d.data)}
        history.append(row)
        if not _finite(*row.values()):
            aborted = True
            break
        _maybe_save(cfg, _bundle("imggen", cfg, gen, disc,
                                 [("adam_g", opt_g), ("adam_d", opt_d)],
                                 step), step)

    ckpt = _bundle("imggen", cfg, gen, disc,
                   [("adam_g", opt_g), ("adam_d", opt_d)],
                   len(history), aborted)
    return TrainResult(ckpt, history, aborted)
