"""End-to-end try-on orchestration: backends + checkpoints in, dressed
image out, with per-stage wall-clock capture."""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .backends import BackendContext, OracleStore, create_backend
from .condgen import CondGenModel, condgen_forward, conditional_align
from .datasets import load_manifest
from .errors import (ConfigurationError, FitroomError, InvalidInputError,
                     StageFailure)
from .imaging import RasterImage, resize_bilinear
from .parsing import (ClothMask, ParseMap, TimingLog, compute_densepose,
                      detect_pose, generate_agnostic, make_cloth_mask,
                      remove_background, segment_human)
from .spade import (MultiScaleDiscriminator, SpadeGenModel,
                    build_imggen_condition, imggen_forward, rejection_filter)
from .training import (Checkpoint, condgen_from_checkpoint,
                       imggen_from_checkpoint, load_checkpoint)

# canonical stage order of the try-on pass
PIPELINE_STAGES = (
    "segment_human", "remove_background", "detect_pose", "compute_densepose",
    "generate_agnostic", "make_cloth_mask", "condgen_forward",
    "conditional_align", "imggen_forward", "rejection_filter",
)


@dataclass
class PipelineConfig:
    condgen_checkpoint: str
    imggen_checkpoint: str
    segmenter: str = "oracle"
    pose: str = "oracle"
    densepose: str = "oracle"
    cloth_segmenter: str = "oracle"
    rejection_threshold: float = 0.3
    timing: bool = True
    catalog_dir: str | None = None
    oracle_root: str | None = None
    oracle_split: str = "train"
    toy_segmenter_checkpoint: str | None = None

    def __post_init__(self):
        if not 0.0 <= self.rejection_threshold <= 1.0:
            raise ConfigurationError("rejection_threshold must lie in [0, 1]")

    @classmethod
    def from_file(cls, path) -> "PipelineConfig":
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"{path} is not valid JSON: {exc}") from exc
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
        missing = {"condgen_checkpoint", "imggen_checkpoint"} - set(data)
        if missing:
            raise ConfigurationError(f"config must set {sorted(missing)}")
        return cls(**data)


@dataclass
class TryOnResult:
    accepted: bool
    score: float
    image: RasterImage | None
    timings: list[tuple[str, float]]
    total_seconds: float

    def timing_dict(self) -> dict[str, float]:
        return {stage: sec for stage, sec in self.timings}


@dataclass
class PipelineRuntime:
    """Loaded models and backends; read-only after construction, safe to
    share across concurrent request handlers."""

    config: PipelineConfig
    condgen: CondGenModel
    imggen: SpadeGenModel
    discriminator: MultiScaleDiscriminator
    condgen_meta: dict
    imggen_meta: dict
    seg_backend: object
    pose_backend: object
    densepose_backend: object
    cloth_backend: object
    resolution: tuple[int, int] = field(init=False)

    def __post_init__(self):
        self.resolution = tuple(self.condgen.config.resolution)
        if tuple(self.imggen.config.resolution) != self.resolution:
            raise ConfigurationError(
                "condition generator and image generator were trained at "
                "different working resolutions")

    def tryon(self, person: RasterImage, cloth: RasterImage) -> TryOnResult:
        t_start = time.perf_counter()
        timings = TimingLog()
        h, w = self.resolution

        def run(stage, fn):
            t0 = time.perf_counter()
            try:
                result = fn()
            except FitroomError as exc:
                raise StageFailure(stage, exc) from exc
            timings.add(stage, time.perf_counter() - t0)
            return result

        t0 = time.perf_counter()
        person_r = resize_bilinear(person, w, h)
        cloth_r = resize_bilinear(cloth, w, h)
        timings.add("resize_inputs", time.perf_counter() - t0)

        parse = run("segment_human",
                    lambda: segment_human(person_r, self.seg_backend))
        no_bg = run("remove_background",
                    lambda: remove_background(person_r, parse))
        pose = run("detect_pose",
                   lambda: detect_pose(person_r, self.pose_backend))
        dp = run("compute_densepose",
                 lambda: compute_densepose(person_r, self.densepose_backend))
        agn_img, agn_parse = run(
            "generate_agnostic",
            lambda: generate_agnostic(no_bg, parse, pose))
        cloth_mask = run("make_cloth_mask",
                         lambda: make_cloth_mask(cloth_r, self.cloth_backend))
        cond_out = run("condgen_forward",
                       lambda: condgen_forward(self.condgen, cloth_r,
                                               cloth_mask, agn_parse, dp))
        aligned = run("conditional_align", lambda: conditional_align(cond_out))

        def synthesize():
            new_parse = ParseMap(
                aligned.seg_logits.argmax(axis=2).astype(np.uint8))
            img = imggen_forward(self.imggen, agn_img, new_parse, dp,
                                 aligned.warped_cloth)
            return img, new_parse

        generated, new_parse = run("imggen_forward", synthesize)

        def decide():
            cond_stack = build_imggen_condition(agn_img, new_parse, dp,
                                                aligned.warped_cloth)
            return rejection_filter(self.discriminator, generated, cond_stack,
                                    self.config.rejection_threshold)

        accepted, score = run("rejection_filter", decide)

        image = None
        if accepted:
            t0 = time.perf_counter()
            out = generated.to_u8()
            if (person.height, person.width) != (h, w):
                out = resize_bilinear(out, person.width, person.height)
            image = out
            timings.add("resize_output", time.perf_counter() - t0)
        return TryOnResult(accepted=accepted, score=score, image=image,
                           timings=list(timings.entries),
                           total_seconds=time.perf_counter() - t_start)


def _backend_context(cfg: PipelineConfig) -> BackendContext:
    store = None
    if cfg.oracle_root is not None:
        manifest = load_manifest(cfg.oracle_root, cfg.oracle_split)
        store = OracleStore.from_manifest(manifest)
    toy_ckpt = None
    if cfg.toy_segmenter_checkpoint:
        toy_ckpt = load_checkpoint(cfg.toy_segmenter_checkpoint)
    return BackendContext(oracle_store=store, toy_segmenter_ckpt=toy_ckpt)


def load_runtime(cfg: PipelineConfig,
                 ctx: BackendContext | None = None) -> PipelineRuntime:
    """Load checkpoints and build backends; fails fast on any bad binding."""
    condgen_ckpt = load_checkpoint(cfg.condgen_checkpoint)
    imggen_ckpt = load_checkpoint(cfg.imggen_checkpoint)
    if condgen_ckpt.kind != "condgen" or imggen_ckpt.kind != "imggen":
        raise ConfigurationError("checkpoint kinds do not match their roles")
    cond_gen, _, _ = condgen_from_checkpoint(condgen_ckpt)
    img_gen, img_disc, _ = imggen_from_checkpoint(imggen_ckpt)
    ctx = ctx or _backend_context(cfg)
    return PipelineRuntime(
        config=cfg,
        condgen=cond_gen,
        imggen=img_gen,
        discriminator=img_disc,
        condgen_meta={"kind": "condgen", "seed": condgen_ckpt.seed,
                      "step": condgen_ckpt.step},
        imggen_meta={"kind": "imggen", "seed": imggen_ckpt.seed,
                     "step": imggen_ckpt.step},
        seg_backend=create_backend("segmenter", cfg.segmenter, ctx),
        pose_backend=create_backend("pose-detector", cfg.pose, ctx),
        densepose_backend=create_backend("densepose-estimator",
                                         cfg.densepose, ctx),
        cloth_backend=create_backend("cloth-segmenter", cfg.cloth_segmenter,
                                     ctx),
    )


def tryon_pipeline(runtime: PipelineRuntime, person: RasterImage,
                   cloth: RasterImage) -> TryOnResult:
    """Functional entry point; see PipelineRuntime.tryon."""
    if person.channels != 3 or cloth.channels != 3:
        raise InvalidInputError("person and cloth images must be RGB")
    return runtime.tryon(person, cloth)
