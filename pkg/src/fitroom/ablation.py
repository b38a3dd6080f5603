"""Wires the six-row ablation grid to the try-on pipeline.

Config file schema (JSON):

    {
      "pipeline": { ... PipelineConfig fields ... },
      "eval_root": "path/to/dataset", "eval_split": "test",
      "limit": 8,
      "bindings": {
        "segmentation": {"original": "oracle-coarse", "new": "oracle"},
        "cloth_mask":   {"original": "threshold",     "new": "oracle"},
        "densepose":    {"original": "parse-derived", "new": "oracle"}
      }
    }

The evaluation set is required: published scores depend on the image
set, so the harness never assumes one. Rejection is bypassed (threshold
0) while generating the metric set.
"""

from __future__ import annotations

import dataclasses
import json
from pathlib import Path

from .datasets import load_manifest, load_sample
from .errors import ConfigurationError
from .metrics import (AblationConfig, AblationReport, FeatureEmbedder,
                      ablation_grid, run_ablation)
from .pipeline import PipelineConfig, _backend_context, load_runtime

DEFAULT_BINDINGS = {
    "segmentation": {"original": "oracle-coarse", "new": "oracle"},
    "cloth_mask": {"original": "threshold", "new": "oracle"},
    "densepose": {"original": "parse-derived", "new": "oracle"},
}


def run_ablation_over_pipeline(pipeline_cfg: PipelineConfig,
                               bindings: dict, eval_samples,
                               embedder: FeatureEmbedder | None = None
                               ) -> AblationReport:
    grid = ablation_grid(bindings)
    real = [s.dressed for s in eval_samples]
    if any(img is None for img in real):
        raise ConfigurationError(
            "ablation needs an evaluation split with dressed ground truth")
    ctx = _backend_context(pipeline_cfg)

    def generate(config: AblationConfig):
        cfg = dataclasses.replace(
            pipeline_cfg,
            segmenter=config.backends["segmentation"],
            cloth_segmenter=config.backends["cloth_mask"],
            densepose=config.backends["densepose"],
            rejection_threshold=0.0)
        runtime = load_runtime(cfg, ctx)
        return [runtime.tryon(s.person, s.cloth).image for s in eval_samples]

    return run_ablation(grid, generate, real, embedder)


def run_ablation_config(path) -> AblationReport:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigurationError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{path} is not valid JSON: {exc}") from exc
    for key in ("pipeline", "eval_root", "eval_split"):
        if key not in data:
            raise ConfigurationError(f"ablation config must set '{key}'")
    pipeline_cfg = PipelineConfig(**data["pipeline"])
    manifest = load_manifest(data["eval_root"], data["eval_split"])
    limit = int(data.get("limit", len(manifest)))
    samples = [load_sample(manifest, i)
               for i in range(min(limit, len(manifest)))]
    bindings = data.get("bindings", DEFAULT_BINDINGS)
    return run_ablation_over_pipeline(pipeline_cfg, bindings, samples)
