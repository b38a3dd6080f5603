"""HTTP try-on service.

Endpoints:
  POST /tryon    multipart (person, cloth | cloth_id) -> PNG, or 422 with
                 the rejection score; 400 on bad input; 500 with the
                 failing stage name.
  GET  /catalog  server-side garment list with inline thumbnails.
  GET  /health   readiness + loaded model versions (503 until ready).
  GET  /metrics  per-stage latency summaries over completed requests.
"""

from __future__ import annotations

import base64
import json
import threading
from pathlib import Path

from fastapi import FastAPI, File, Form, UploadFile
from fastapi.responses import JSONResponse, Response

from .errors import FitroomError, InvalidInputError, StageFailure
from .imaging import decode_image, encode_png, load_image, resize_bilinear
from .pipeline import PipelineConfig, PipelineRuntime, load_runtime

CATALOG_EXTENSIONS = (".png", ".jpg", ".jpeg")


class MetricsLog:
    """Append-only stage-duration log reduced on read."""

    def __init__(self):
        self._lock = threading.Lock()
        self._entries: list[tuple[str, float]] = []

    def record(self, timings):
        with self._lock:
            self._entries.extend(timings)

    def summary(self) -> dict:
        with self._lock:
            entries = list(self._entries)
        stages: dict[str, list[float]] = {}
        for stage, sec in entries:
            stages.setdefault(stage, []).append(sec)
        return {stage: {"count": len(vals),
                        "total_seconds": sum(vals),
                        "mean_seconds": sum(vals) / len(vals),
                        "min_seconds": min(vals),
                        "max_seconds": max(vals)}
                for stage, vals in stages.items()}


def _catalog_items(catalog_dir: str | None) -> list[dict]:
    if not catalog_dir:
        return []
    root = Path(catalog_dir)
    if not root.is_dir():
        return []
    items = []
    for path in sorted(root.iterdir()):
        if path.suffix.lower() not in CATALOG_EXTENSIONS:
            continue
        img = load_image(path)
        scale = 64 / max(img.width, img.height)
        thumb = resize_bilinear(img, max(1, round(img.width * scale)),
                                max(1, round(img.height * scale)))
        items.append({
            "id": path.stem,
            "filename": path.name,
            "width": img.width,
            "height": img.height,
            "thumbnail_png_base64":
                base64.b64encode(encode_png(thumb)).decode("ascii"),
        })
    return items


def _error(status: int, stage: str, message: str, **extra) -> JSONResponse:
    return JSONResponse(status_code=status,
                        content={"detail": {"stage": stage,
                                            "message": message, **extra}})


def create_app(runtime: PipelineRuntime | None = None) -> FastAPI:
    app = FastAPI(title="fitroom", version="0.1.0")
    app.state.runtime = runtime
    app.state.metrics = MetricsLog()

    @app.get("/health")
    def health():
        rt = app.state.runtime
        if rt is None:
            return JSONResponse(status_code=503,
                                content={"status": "not_ready"})
        return {"status": "ready",
                "model_versions": {"condgen": rt.condgen_meta,
                                   "imggen": rt.imggen_meta},
                "working_resolution": list(rt.resolution)}

    @app.get("/catalog")
    def catalog():
        rt = app.state.runtime
        if rt is None:
            return JSONResponse(status_code=503,
                                content={"status": "not_ready"})
        return {"garments": _catalog_items(rt.config.catalog_dir)}

    @app.get("/metrics")
    def metrics():
        return {"stages": app.state.metrics.summary()}

    @app.post("/tryon")
    def tryon(person: UploadFile | None = File(default=None),
              cloth: UploadFile | None = File(default=None),
              cloth_id: str | None = Form(default=None)):
        rt = app.state.runtime
        if rt is None:
            return JSONResponse(status_code=503,
                                content={"status": "not_ready"})
        if person is None:
            return _error(400, "decode_input", "missing field 'person'")
        if cloth is None and not cloth_id:
            return _error(400, "decode_input",
                          "missing field 'cloth' (or 'cloth_id')")
        try:
            person_img = decode_image(person.file.read())
        except InvalidInputError as exc:
            return _error(400, "decode_input", f"person: {exc}")
        if cloth is not None:
            try:
                cloth_img = decode_image(cloth.file.read())
            except InvalidInputError as exc:
                return _error(400, "decode_input", f"cloth: {exc}")
        else:
            path = _catalog_path(rt.config.catalog_dir, cloth_id)
            if path is None:
                return _error(400, "decode_input",
                              f"unknown cloth_id '{cloth_id}'")
            cloth_img = load_image(path)

        try:
            result = rt.tryon(person_img, cloth_img)
        except StageFailure as exc:
            return _error(500, exc.stage, str(exc.cause))
        except FitroomError as exc:
            return _error(500, "pipeline", str(exc))

        app.state.metrics.record(result.timings)
        if not result.accepted:
            return _error(422, "rejection_filter",
                          "generated image fell below the realism threshold",
                          score=result.score,
                          threshold=rt.config.rejection_threshold)
        headers = {
            "X-Rejection-Score": f"{result.score:.6f}",
            "X-Total-Seconds": f"{result.total_seconds:.6f}",
            "X-Stage-Timings": json.dumps(
                [{"stage": s, "seconds": round(t, 6)}
                 for s, t in result.timings]),
        }
        return Response(content=encode_png(result.image),
                        media_type="image/png", headers=headers)

    return app


def _catalog_path(catalog_dir: str | None, cloth_id: str) -> Path | None:
    if not catalog_dir:
        return None
    root = Path(catalog_dir)
    for ext in CATALOG_EXTENSIONS:
        candidate = root / f"{cloth_id}{ext}"
        if candidate.exists():
            return candidate
    return None


def serve(config: PipelineConfig, port: int = 8321,
          host: str = "127.0.0.1") -> None:
    """Load models, then expose the service (models load before bind)."""
    import uvicorn

    runtime = load_runtime(config)
    app = create_app(runtime)
    uvicorn.run(app, host=host, port=port, log_level="warning")
