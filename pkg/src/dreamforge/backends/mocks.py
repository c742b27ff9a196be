"""Deterministic mock backends with capture ledgers.

Scripted mocks replay a fixed response list and record every request, which
makes prompt-threading assertions possible without any live model. Ledger
appends are serialized internally, so mocks are safe under the pipeline's
concurrent clip generation.
"""

from __future__ import annotations

import hashlib
import io
import threading
from typing import Callable, Optional, Sequence

import numpy as np
from PIL import Image

from ..errors import BackendUnavailableError, ScriptExhaustedError
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


def _digest(*parts: bytes) -> bytes:
    h = hashlib.sha256()
    for part in parts:
        h.update(part)
        h.update(b"\x00")
    return h.digest()


def _rng_from(*parts: bytes) -> np.random.Generator:
    seed = int.from_bytes(_digest(*parts)[:8], "big")
    return np.random.default_rng(seed)


class MockChatBackend(ChatBackend):
    """Replays a fixed response script, in order; errors past the end."""

    def __init__(self, script: Sequence[str], dead: bool = False, name: str = "mock-chat"):
        if not script:
            raise ValueError("mock chat script must be nonempty")
        self.script = list(script)
        self.name = name
        self.calls: list[dict] = []
        self._dead = dead
        self._lock = threading.Lock()

    def ping(self) -> None:
        if self._dead:
            raise BackendUnavailableError(f"{self.name} is configured dead")

    def complete(self, messages: Sequence[Message]) -> str:
        if self._dead:
            raise BackendUnavailableError(f"{self.name} is configured dead")
        with self._lock:
            index = len(self.calls)
            if index >= len(self.script):
                raise ScriptExhaustedError(
                    f"{self.name}: script exhausted after {len(self.script)} responses"
                )
            response = self.script[index]
            self.calls.append({"messages": [dict(m) for m in messages], "response": response})
        return response


class MockVisionBackend(VisionBackend):
    """Scripted (image + text) -> text; the ledger records the image hash."""

    def __init__(self, script: Sequence[str], name: str = "mock-vision"):
        if not script:
            raise ValueError("mock vision script must be nonempty")
        self.script = list(script)
        self.name = name
        self.calls: list[dict] = []
        self._lock = threading.Lock()

    def describe(self, image: bytes, prompt: str, system: Optional[str] = None) -> str:
        with self._lock:
            index = len(self.calls)
            if index >= len(self.script):
                raise ScriptExhaustedError(
                    f"{self.name}: script exhausted after {len(self.script)} responses"
                )
            response = self.script[index]
            self.calls.append(
                {
                    "image_sha256": hashlib.sha256(image).hexdigest(),
                    "prompt": prompt,
                    "system": system,
                    "response": response,
                }
            )
        return response


class MockImageGenBackend(ImageGenBackend):
    """Procedural image generator: pixels are a pure function of (seed, prompt)."""

    def __init__(self, seed: int = 0, size: tuple[int, int] = (64, 64)):
        self.seed = seed
        self.size = size
        self.calls: list[dict] = []
        self._lock = threading.Lock()

    def generate(self, prompt: str) -> bytes:
        rng = _rng_from(str(self.seed).encode(), prompt.encode("utf-8"))
        width, height = self.size
        pixels = rng.integers(0, 256, size=(height, width, 3), dtype=np.uint8)
        buf = io.BytesIO()
        Image.fromarray(pixels, mode="RGB").save(buf, format="PNG")
        data = buf.getvalue()
        with self._lock:
            self.calls.append({"prompt": prompt, "image_sha256": hashlib.sha256(data).hexdigest()})
        return data


class MockVideoGenBackend(VideoGenBackend):
    """Emits a deterministic placeholder clip derived from the inputs."""

    def __init__(self, seed: int = 0, duration_sec: float = 4.0, size_bytes: int = 4096):
        self.seed = seed
        self.duration_sec = duration_sec
        self.size_bytes = size_bytes
        self.calls: list[dict] = []
        self._lock = threading.Lock()

    def generate(self, image: bytes, prompt: str) -> VideoClip:
        material = _digest(str(self.seed).encode(), image, prompt.encode("utf-8"))
        blocks = [material]
        while sum(len(b) for b in blocks) < self.size_bytes:
            blocks.append(hashlib.sha256(blocks[-1]).digest())
        data = b"DFCLIP01" + b"".join(blocks)[: self.size_bytes]
        with self._lock:
            self.calls.append(
                {
                    "image_sha256": hashlib.sha256(image).hexdigest(),
                    "prompt": prompt,
                    "clip_sha256": hashlib.sha256(data).hexdigest(),
                }
            )
        return VideoClip(data=data, duration_sec=self.duration_sec)


_DEFAULT_REGIONS = (FaceRegion(x=16, y=16, width=32, height=32, landmark_count=68),)


class MockEmbedBackend(EmbedBackend):
    """Hash-derived unit embeddings; identical inputs embed identically.

    ``face_regions`` may be a fixed region list or a callable(image) -> list,
    so tests can stage faceless frames. ``face_vectors`` / ``style_labels``
    inject per-call values for metric worked examples.
    """

    def __init__(
        self,
        seed: int = 0,
        dimension: int = 512,
        face_regions: Sequence[FaceRegion] | Callable[[bytes], list[FaceRegion]] | None = None,
        face_vectors: Optional[Sequence[Sequence[float]]] = None,
        style_labels: Optional[Sequence[str]] = None,
    ):
        self.seed = seed
        self.dimension = dimension
        self._face_regions = face_regions if face_regions is not None else list(_DEFAULT_REGIONS)
        self._face_vectors = list(face_vectors) if face_vectors is not None else None
        self._style_labels = list(style_labels) if style_labels is not None else None
        self.calls: list[dict] = []
        self._lock = threading.Lock()

    def _record(self, method: str, **info) -> None:
        with self._lock:
            self.calls.append({"method": method, **info})

    def _unit_vector(self, material: bytes) -> np.ndarray:
        rng = _rng_from(str(self.seed).encode(), material)
        vec = rng.standard_normal(self.dimension)
        return vec / np.linalg.norm(vec)

    def detect_faces(self, image: bytes) -> list[FaceRegion]:
        if callable(self._face_regions):
            regions = list(self._face_regions(image))
        else:
            regions = list(self._face_regions)
        self._record("detect_faces", image_sha256=hashlib.sha256(image).hexdigest(), found=len(regions))
        return regions

    def embed_face(self, image: bytes, region: FaceRegion) -> np.ndarray:
        self._record("embed_face", image_sha256=hashlib.sha256(image).hexdigest(), region=region)
        if self._face_vectors is not None:
            with self._lock:
                if not self._face_vectors:
                    raise ScriptExhaustedError("mock-embed: injected face vectors exhausted")
                raw = np.asarray(self._face_vectors.pop(0), dtype=float)
            return raw / np.linalg.norm(raw)
        material = b"face:" + image + repr((region.x, region.y, region.width, region.height)).encode()
        return self._unit_vector(material)

    def embed_image(self, image: bytes) -> np.ndarray:
        self._record("embed_image", image_sha256=hashlib.sha256(image).hexdigest())
        return self._unit_vector(b"image:" + image)

    def embed_text(self, text: str) -> np.ndarray:
        self._record("embed_text", text=text)
        return self._unit_vector(b"text:" + text.encode("utf-8"))

    def classify_style(self, image: bytes, categories: Sequence[str]) -> str:
        if self._style_labels is not None:
            with self._lock:
                if not self._style_labels:
                    raise ScriptExhaustedError("mock-embed: injected style labels exhausted")
                label = self._style_labels.pop(0)
        else:
            digest = _digest(str(self.seed).encode(), b"style:" + image)
            label = list(categories)[int.from_bytes(digest[:4], "big") % len(categories)]
        self._record("classify_style", image_sha256=hashlib.sha256(image).hexdigest(), label=label)
        return label
