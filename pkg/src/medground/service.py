"""HTTP inference service: phrase grounding over a small wire API.

Endpoints:
    POST /api/ground   multipart (image, text, model_id) or JSON with a
                       base64 image; responds {box_xyxy, model_id, stage,
                       latency_ms}
    GET  /api/models   registry listing with stage tags
    GET  /healthz      liveness

Checkpoint weights are immutable and shared read-only across requests, so a
given (model_id, image, text) always maps to the same box. No confidence
score is returned: the single-box head emits none, and fabricating one would
mislead.
"""

from __future__ import annotations

import base64
import binascii
import io
import logging
import threading
import time
from pathlib import Path

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, PlainTextResponse
from PIL import Image

from medground.model.checkpoint import Checkpoint, load_checkpoint, model_from_checkpoint
from medground.model.inference import predict_box
from medground.model.network import GroundingNet
from medground.model.tokenizer import EmptyTextError

logger = logging.getLogger("medground.service")

MAX_IMAGE_SIDE = 4096


class CheckpointRegistry:
    """Named checkpoints plus their loaded models, behind a loading lock."""

    def __init__(self) -> None:
        self._entries: dict[str, tuple[Checkpoint, GroundingNet]] = {}
        self._lock = threading.Lock()
        self.ready = False

    def add(self, model_id: str, ckpt: Checkpoint) -> None:
        with self._lock:
            model = model_from_checkpoint(ckpt)
            model.eval()
            self._entries[model_id] = (ckpt, model)
            self.ready = True

    def load_directory(self, path: str | Path) -> int:
        path = Path(path)
        files = sorted(path.glob("*.ckpt"))
        if not files:
            raise FileNotFoundError(f"no *.ckpt files under {path}")
        for f in files:
            self.add(f.stem, load_checkpoint(f))
        return len(files)

    def get(self, model_id: str) -> tuple[Checkpoint, GroundingNet]:
        return self._entries[model_id]

    def __contains__(self, model_id: str) -> bool:
        return model_id in self._entries

    def listing(self) -> list[dict]:
        return [
            {
                "model_id": model_id,
                "stage": ckpt.stage,
                "config": ckpt.config.summary(),
            }
            for model_id, (ckpt, _) in sorted(self._entries.items())
        ]


def _error(status: int, field: str, message: str) -> JSONResponse:
    return JSONResponse(
        status_code=status, content={"error": {"field": field, "message": message}}
    )


def _decode_image(data: bytes) -> np.ndarray:
    try:
        with Image.open(io.BytesIO(data)) as img:
            img.load()
            if img.width > MAX_IMAGE_SIDE or img.height > MAX_IMAGE_SIDE:
                raise ValueError(
                    f"image {img.width}x{img.height} exceeds {MAX_IMAGE_SIDE} px per side"
                )
            arr = np.asarray(img.convert("L"), dtype=np.float32) / 255.0
    except ValueError:
        raise
    except Exception as exc:
        raise ValueError(f"undecodable image: {exc}") from exc
    return arr


async def _parse_ground_request(request: Request) -> tuple[bytes, str, str]:
    content_type = request.headers.get("content-type", "")
    if content_type.startswith("multipart/form-data"):
        form = await request.form()
        upload = form.get("image")
        if upload is None or isinstance(upload, str):
            raise KeyError("image")
        image_bytes = await upload.read()
        text = form.get("text")
        model_id = form.get("model_id")
    else:
        try:
            body = await request.json()
        except Exception as exc:
            raise ValueError(f"body is neither multipart nor valid JSON: {exc}") from exc
        image_b64 = body.get("image_b64")
        if image_b64 is None:
            raise KeyError("image_b64")
        try:
            image_bytes = base64.b64decode(image_b64, validate=True)
        except (binascii.Error, ValueError) as exc:
            raise ValueError(f"image_b64 is not valid base64: {exc}") from exc
        text = body.get("text")
        model_id = body.get("model_id")
    if text is None:
        raise KeyError("text")
    if model_id is None:
        raise KeyError("model_id")
    return image_bytes, str(text), str(model_id)


def create_app(registry: CheckpointRegistry) -> FastAPI:
    app = FastAPI(title="medground", docs_url=None, redoc_url=None)

    @app.get("/healthz")
    def healthz() -> PlainTextResponse:
        return PlainTextResponse("ok")

    @app.get("/api/models")
    def models() -> JSONResponse:
        if not registry.ready:
            return _error(503, "registry", "checkpoints are still loading")
        return JSONResponse(registry.listing())

    @app.post("/api/ground")
    async def ground(request: Request):
        if not registry.ready:
            return _error(503, "registry", "checkpoints are still loading")
        try:
            image_bytes, text, model_id = await _parse_ground_request(request)
        except KeyError as exc:
            return _error(400, str(exc).strip("'"), "field is required")
        except ValueError as exc:
            return _error(400, "image", str(exc))

        if model_id not in registry:
            return _error(404, "model_id", f"unknown model {model_id!r}")
        if not text.strip():
            return _error(400, "text", "text must be non-empty")
        try:
            image = _decode_image(image_bytes)
        except ValueError as exc:
            return _error(400, "image", str(exc))

        ckpt, model = registry.get(model_id)
        start = time.perf_counter()
        try:
            box, clamped = predict_box(model, image, text)
        except EmptyTextError:
            return _error(400, "text", "text tokenizes to all padding")
        latency_ms = (time.perf_counter() - start) * 1000.0
        if clamped:
            logger.info("clamped out-of-frame prediction for model %s", model_id)
        return JSONResponse(
            {
                "box_xyxy": list(box),
                "model_id": model_id,
                "stage": ckpt.stage,
                "latency_ms": latency_ms,
            }
        )

    return app


def serve(registry_dir: str | Path, bind: str = "127.0.0.1:8000") -> None:
    """Load every checkpoint under ``registry_dir`` and serve forever."""
    import uvicorn

    registry = CheckpointRegistry()
    n = registry.load_directory(registry_dir)
    logger.info("loaded %d checkpoint(s) from %s", n, registry_dir)
    host, _, port = bind.partition(":")
    uvicorn.run(create_app(registry), host=host or "127.0.0.1", port=int(port or 8000))
