"""HTTP surface: JSON (base64 images) or multipart in, enveloped JSON out.

Every embedding response declares its dimension and comes unit-normalized;
every payload carries ``schema_version``. Errors use a ``{code, message}``
envelope: 400 undecodable image or malformed box, 401 bad token (when a
shared token is configured via EMBED_SERVICE_TOKEN), 413 oversized payload,
503 before models finish loading. All endpoints are stateless; nothing is
persisted.
"""

from __future__ import annotations

import base64
import binascii
import os
from contextlib import asynccontextmanager

import numpy as np
from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse

from .models import ModelRegistry, decode_image, landmarks_for_box

SCHEMA_VERSION = 1
MAX_PAYLOAD_BYTES = int(os.environ.get("EMBED_SERVICE_MAX_BYTES", 10 * 1024 * 1024))


class ServiceError(Exception):
    def __init__(self, status: int, code: str, message: str):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message


def _error(status: int, code: str, message: str) -> JSONResponse:
    return JSONResponse(status_code=status, content={"code": code, "message": message})


async def _read_payload(request: Request) -> dict:
    """Accept JSON with base64 fields or multipart with a file part."""
    body = await request.body()
    if len(body) > MAX_PAYLOAD_BYTES:
        raise ServiceError(413, "payload_too_large", f"payload exceeds {MAX_PAYLOAD_BYTES} bytes")
    content_type = request.headers.get("content-type", "")
    if content_type.startswith("multipart/form-data"):
        form = await request.form()
        payload: dict = {key: value for key, value in form.items() if isinstance(value, str)}
        upload = form.get("image")
        if upload is not None and not isinstance(upload, str):
            payload["image_bytes"] = await upload.read()
        return payload
    try:
        import json

        return json.loads(body or b"{}")
    except ValueError as exc:
        raise ServiceError(400, "invalid_payload", f"body is not valid JSON: {exc}") from exc


def _image_from(payload: dict) -> np.ndarray:
    raw = payload.get("image_bytes")
    if raw is None:
        encoded = payload.get("image_b64")
        if not encoded:
            raise ServiceError(400, "invalid_payload", "missing image_b64 (or multipart image)")
        try:
            raw = base64.b64decode(encoded, validate=True)
        except (binascii.Error, ValueError) as exc:
            raise ServiceError(400, "invalid_payload", f"bad base64 image: {exc}") from exc
    if len(raw) > MAX_PAYLOAD_BYTES:
        raise ServiceError(413, "payload_too_large", f"image exceeds {MAX_PAYLOAD_BYTES} bytes")
    try:
        return decode_image(raw)
    except ValueError as exc:
        raise ServiceError(400, "undecodable_image", str(exc)) from exc


def _box_from(payload: dict) -> tuple[int, int, int, int]:
    box = payload.get("box")
    if isinstance(box, str):
        import json

        try:
            box = json.loads(box)
        except ValueError:
            box = None
    if not isinstance(box, dict):
        raise ServiceError(400, "malformed_box", "missing box {x, y, width, height}")
    try:
        return int(box["x"]), int(box["y"]), int(box["width"]), int(box["height"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ServiceError(400, "malformed_box", f"bad box: {exc}") from exc


def _vector_response(vector: np.ndarray) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "vector": [float(x) for x in vector],
        "dim": int(vector.shape[0]),
        "norm": float(np.linalg.norm(vector)),
    }


def create_app(registry: ModelRegistry | None = None) -> FastAPI:
    models = registry or ModelRegistry()
    token = os.environ.get("EMBED_SERVICE_TOKEN")

    @asynccontextmanager
    async def _lifespan(_app: FastAPI):
        if not models.loaded:
            models.load()
        yield

    app = FastAPI(title="embed-service", version="0.1.0", lifespan=_lifespan)

    @app.exception_handler(ServiceError)
    async def _service_error(_request, exc: ServiceError):
        return _error(exc.status, exc.code, exc.message)

    @app.exception_handler(RequestValidationError)
    async def _validation_error(_request, exc: RequestValidationError):
        return _error(400, "invalid_payload", str(exc))

    def _check_auth(request: Request) -> None:
        if token and request.headers.get("x-auth-token") != token:
            raise ServiceError(401, "unauthorized", "missing or wrong X-Auth-Token")

    def _require_models() -> None:
        if not models.loaded:
            raise ServiceError(503, "model_not_loaded", "models are still loading")

    @app.get("/healthz")
    def healthz() -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "status": "ok" if models.loaded else "loading",
            "models": models.identifiers(),
            "dimensions": {
                "image": models.image_embedder.dimension if models.loaded else None,
                "face": models.image_embedder.dimension if models.loaded else None,
                "text": models.text_embedder.dimension if models.loaded else None,
            },
            "limits": {"max_payload_bytes": MAX_PAYLOAD_BYTES},
        }

    @app.post("/detect/faces")
    async def detect_faces(request: Request) -> dict:
        _check_auth(request)
        _require_models()
        image = _image_from(await _read_payload(request))
        faces = []
        for box in models.detector.detect(image):
            landmarks = landmarks_for_box(box.x, box.y, box.width, box.height)
            faces.append(
                {
                    "box": {"x": box.x, "y": box.y, "width": box.width, "height": box.height},
                    "landmarks": landmarks,
                    "landmark_count": len(landmarks),
                }
            )
        return {"schema_version": SCHEMA_VERSION, "faces": faces, "count": len(faces)}

    @app.post("/embed/face")
    async def embed_face(request: Request) -> dict:
        _check_auth(request)
        _require_models()
        payload = await _read_payload(request)
        image = _image_from(payload)
        x, y, width, height = _box_from(payload)
        try:
            vector = models.image_embedder.embed_region(image, x, y, width, height)
        except ValueError as exc:
            raise ServiceError(400, "malformed_box", str(exc)) from exc
        return _vector_response(vector)

    @app.post("/embed/image")
    async def embed_image(request: Request) -> dict:
        _check_auth(request)
        _require_models()
        image = _image_from(await _read_payload(request))
        return _vector_response(models.image_embedder.embed(image))

    @app.post("/embed/text")
    async def embed_text(request: Request) -> dict:
        _check_auth(request)
        _require_models()
        payload = await _read_payload(request)
        text = payload.get("text")
        if not isinstance(text, str) or not text.strip():
            raise ServiceError(400, "invalid_payload", "missing or empty text")
        return _vector_response(models.text_embedder.embed(text))

    @app.post("/classify/style")
    async def classify_style(request: Request) -> dict:
        _check_auth(request)
        _require_models()
        payload = await _read_payload(request)
        image = _image_from(payload)
        categories = payload.get("categories")
        if isinstance(categories, str):
            categories = [c.strip() for c in categories.split(",") if c.strip()]
        if not categories:
            from .models import STYLE_CATEGORIES

            categories = list(STYLE_CATEGORIES)
        try:
            label = models.style_classifier.classify(image, list(categories))
        except ValueError as exc:
            raise ServiceError(400, "invalid_payload", str(exc)) from exc
        return {"schema_version": SCHEMA_VERSION, "label": label}

    return app
