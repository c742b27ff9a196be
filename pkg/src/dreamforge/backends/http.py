"""Hosted HTTP clients, one per capability.

Chat/vision/image clients speak the common OpenAI-style JSON routes; the
video and embed clients speak the small JSON protocols documented in the
README. All calls retry (3 attempts, exponential backoff from 1s), carry
per-capability timeouts, and can log request hash + latency to a run's
``calls.log``.
"""

from __future__ import annotations

import base64
import hashlib
import io
import json
import os
import threading
import time
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np
import requests
from PIL import Image

from ..errors import BackendError, BackendUnavailableError
from ..storage import utc_now_iso
from .base import (
    ChatBackend,
    EmbedBackend,
    FaceRegion,
    ImageGenBackend,
    Message,
    VideoClip,
    VideoGenBackend,
    VisionBackend,
)

GENERATION_TIMEOUT_SEC = 120.0
EMBED_TIMEOUT_SEC = 30.0
RETRY_ATTEMPTS = 3
RETRY_BACKOFF_SEC = 1.0


class CallLogger:
    """Append-only JSONL log of hosted calls (request hash, latency, status)."""

    def __init__(self, path: Path):
        self.path = Path(path)
        self._lock = threading.Lock()

    def log(self, capability: str, request_material: bytes, latency_ms: float, status: str, **extra) -> None:
        line = {
            "ts": utc_now_iso(),
            "capability": capability,
            "request_sha256": hashlib.sha256(request_material).hexdigest(),
            "latency_ms": round(latency_ms, 3),
            "status": status,
        }
        line.update(extra)
        with self._lock:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with open(self.path, "a", encoding="utf-8") as handle:
                handle.write(json.dumps(line, sort_keys=True) + "\n")


class _HttpClient:
    """Shared POST-with-retry plumbing for the per-capability clients."""

    capability = "http"

    def __init__(
        self,
        base_url: str,
        api_key_env: Optional[str] = None,
        timeout: float = GENERATION_TIMEOUT_SEC,
        attempts: int = RETRY_ATTEMPTS,
        backoff_sec: float = RETRY_BACKOFF_SEC,
        logger: Optional[CallLogger] = None,
        sleep: Callable[[float], None] = time.sleep,
        session: Optional[requests.Session] = None,
    ):
        self.base_url = base_url.rstrip("/")
        self.api_key_env = api_key_env
        self.timeout = timeout
        self.attempts = attempts
        self.backoff_sec = backoff_sec
        self.logger = logger
        self._sleep = sleep
        self._session = session or requests.Session()

    def _headers(self) -> dict:
        headers = {"Content-Type": "application/json"}
        if self.api_key_env:
            key = os.environ.get(self.api_key_env)
            if key:
                headers["Authorization"] = f"Bearer {key}"
        return headers

    def ping(self) -> None:
        try:
            self._session.get(self.base_url + "/", timeout=min(self.timeout, 10.0))
        except requests.RequestException as exc:
            raise BackendUnavailableError(f"{self.capability}: {self.base_url} unreachable: {exc}") from exc

    def _post(self, route: str, payload: dict) -> dict:
        url = self.base_url + route
        material = json.dumps(payload, sort_keys=True).encode("utf-8")
        last_error: Exception | None = None
        started = time.monotonic()
        for attempt in range(1, self.attempts + 1):
            try:
                response = self._session.post(
                    url, json=payload, headers=self._headers(), timeout=self.timeout
                )
                response.raise_for_status()
                body = response.json()
                if self.logger:
                    self.logger.log(
                        self.capability,
                        material,
                        (time.monotonic() - started) * 1000.0,
                        "ok",
                        attempts=attempt,
                    )
                return body
            except (requests.RequestException, ValueError) as exc:
                last_error = exc
                if attempt < self.attempts:
                    self._sleep(self.backoff_sec * (2 ** (attempt - 1)))
        if self.logger:
            self.logger.log(
                self.capability,
                material,
                (time.monotonic() - started) * 1000.0,
                "error",
                attempts=self.attempts,
            )
        raise BackendError(
            f"{self.capability}: POST {url} failed after {self.attempts} attempts: {last_error}"
        )


class HttpChatBackend(_HttpClient, ChatBackend):
    capability = "chat"

    def __init__(self, base_url: str, model: str = "default", **kwargs):
        super().__init__(base_url, **kwargs)
        self.model = model

    def complete(self, messages: Sequence[Message]) -> str:
        body = self._post(
            "/chat/completions",
            {"model": self.model, "messages": [dict(m) for m in messages]},
        )
        try:
            return body["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise BackendError(f"chat: malformed completion payload: {exc}") from exc


class HttpVisionBackend(_HttpClient, VisionBackend):
    capability = "vision"

    def __init__(self, base_url: str, model: str = "default", **kwargs):
        super().__init__(base_url, **kwargs)
        self.model = model

    def describe(self, image: bytes, prompt: str, system: Optional[str] = None) -> str:
        image_b64 = base64.b64encode(image).decode("ascii")
        messages: list[dict] = []
        if system:
            messages.append({"role": "system", "content": system})
        messages.append(
            {
                "role": "user",
                "content": [
                    {"type": "text", "text": prompt},
                    {
                        "type": "image_url",
                        "image_url": {"url": f"data:image/png;base64,{image_b64}"},
                    },
                ],
            }
        )
        body = self._post("/chat/completions", {"model": self.model, "messages": messages})
        try:
            return body["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise BackendError(f"vision: malformed completion payload: {exc}") from exc


class HttpImageGenBackend(_HttpClient, ImageGenBackend):
    capability = "image_gen"

    def __init__(self, base_url: str, model: str = "default", size: str = "1024x1024", **kwargs):
        super().__init__(base_url, **kwargs)
        self.model = model
        self.size = size

    def generate(self, prompt: str) -> bytes:
        body = self._post(
            "/images/generations",
            {"model": self.model, "prompt": prompt, "size": self.size, "response_format": "b64_json"},
        )
        try:
            raw = base64.b64decode(body["data"][0]["b64_json"])
        except (KeyError, IndexError, TypeError, ValueError) as exc:
            raise BackendError(f"image_gen: malformed generation payload: {exc}") from exc
        return _ensure_png(raw)


class HttpVideoGenBackend(_HttpClient, VideoGenBackend):
    capability = "video_gen"

    def __init__(self, base_url: str, model: str = "default", **kwargs):
        super().__init__(base_url, **kwargs)
        self.model = model

    def generate(self, image: bytes, prompt: str) -> VideoClip:
        body = self._post(
            "/videos/generations",
            {
                "model": self.model,
                "prompt": prompt,
                "image_b64": base64.b64encode(image).decode("ascii"),
            },
        )
        try:
            data = base64.b64decode(body["video_b64"])
            duration = float(body.get("duration_sec", 0.0))
        except (KeyError, TypeError, ValueError) as exc:
            raise BackendError(f"video_gen: malformed generation payload: {exc}") from exc
        if not data:
            raise BackendError("video_gen: backend returned an empty clip")
        return VideoClip(data=data, duration_sec=duration)


class HttpEmbedBackend(_HttpClient, EmbedBackend):
    """Client for the embed HTTP service (see the backend profile's `embed` entry)."""

    capability = "embed"

    def __init__(self, base_url: str, token_env: Optional[str] = None, **kwargs):
        kwargs.setdefault("timeout", EMBED_TIMEOUT_SEC)
        super().__init__(base_url, **kwargs)
        self.token_env = token_env
        self.dimension = 512

    def _headers(self) -> dict:
        headers = super()._headers()
        if self.token_env:
            token = os.environ.get(self.token_env)
            if token:
                headers["X-Auth-Token"] = token
        return headers

    def ping(self) -> None:
        try:
            response = self._session.get(self.base_url + "/healthz", timeout=10.0)
            response.raise_for_status()
        except requests.RequestException as exc:
            raise BackendUnavailableError(f"embed: {self.base_url} unhealthy: {exc}") from exc

    def health(self) -> dict:
        response = self._session.get(self.base_url + "/healthz", timeout=10.0)
        response.raise_for_status()
        return response.json()

    def _vector(self, body: dict) -> np.ndarray:
        vec = np.asarray(body["vector"], dtype=float)
        self.dimension = int(body.get("dim", vec.shape[0]))
        return vec

    def detect_faces(self, image: bytes) -> list[FaceRegion]:
        body = self._post("/detect/faces", {"image_b64": base64.b64encode(image).decode("ascii")})
        regions = []
        for face in body.get("faces", []):
            box = face["box"]
            regions.append(
                FaceRegion(
                    x=int(box["x"]),
                    y=int(box["y"]),
                    width=int(box["width"]),
                    height=int(box["height"]),
                    landmark_count=int(face.get("landmark_count", 0)),
                )
            )
        return regions

    def embed_face(self, image: bytes, region: FaceRegion) -> np.ndarray:
        body = self._post(
            "/embed/face",
            {
                "image_b64": base64.b64encode(image).decode("ascii"),
                "box": {"x": region.x, "y": region.y, "width": region.width, "height": region.height},
            },
        )
        return self._vector(body)

    def embed_image(self, image: bytes) -> np.ndarray:
        body = self._post("/embed/image", {"image_b64": base64.b64encode(image).decode("ascii")})
        return self._vector(body)

    def embed_text(self, text: str) -> np.ndarray:
        body = self._post("/embed/text", {"text": text})
        return self._vector(body)

    def classify_style(self, image: bytes, categories: Sequence[str]) -> str:
        body = self._post(
            "/classify/style",
            {"image_b64": base64.b64encode(image).decode("ascii"), "categories": list(categories)},
        )
        return str(body["label"])


def _ensure_png(raw: bytes) -> bytes:
    """Validate the backend's image and normalize it to RGB PNG."""
    try:
        image = Image.open(io.BytesIO(raw))
        image.load()
    except Exception as exc:
        raise BackendError(f"image_gen: backend returned an undecodable image: {exc}") from exc
    if image.width <= 0 or image.height <= 0:
        raise BackendError("image_gen: backend returned a degenerate image")
    if image.format == "PNG" and image.mode == "RGB":
        return raw
    buf = io.BytesIO()
    image.convert("RGB").save(buf, format="PNG")
    return buf.getvalue()
