"""Capability interfaces for every external model the engine talks to.

Each capability has a hosted HTTP client and a deterministic mock (see
``http`` and ``mocks``); everything above this layer is testable offline.
Backends are stateless between calls except for caller-supplied history.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

Message = dict  # {"role": "system"|"user"|"assistant", "content": str}


@dataclass(frozen=True)
class FaceRegion:
    """Axis-aligned face bounding box in pixel coordinates."""

    x: int
    y: int
    width: int
    height: int
    landmark_count: int = 0

    @property
    def area(self) -> int:
        return self.width * self.height


@dataclass
class VideoClip:
    """A generated clip: raw file bytes plus the duration the backend reported."""

    data: bytes
    duration_sec: float
    suffix: str = ".mp4"


class ChatBackend(ABC):
    """Text-in/text-out with a system prompt and caller-supplied history."""

    def ping(self) -> None:
        """Liveness probe; raises BackendUnavailableError when unreachable."""

    @abstractmethod
    def complete(self, messages: Sequence[Message]) -> str:
        """Return the next assistant message for the given conversation."""


class VisionBackend(ABC):
    """(image + text) -> text."""

    def ping(self) -> None:
        pass

    @abstractmethod
    def describe(self, image: bytes, prompt: str, system: Optional[str] = None) -> str:
        pass


class ImageGenBackend(ABC):
    """text -> raster image (PNG bytes, dimensions > 0)."""

    def ping(self) -> None:
        pass

    @abstractmethod
    def generate(self, prompt: str) -> bytes:
        pass


class VideoGenBackend(ABC):
    """(image + text) -> video clip file."""

    def ping(self) -> None:
        pass

    @abstractmethod
    def generate(self, image: bytes, prompt: str) -> VideoClip:
        pass


class EmbedBackend(ABC):
    """Face detection plus unit-norm embeddings for images, faces, and text.

    Every embedding has the fixed dimension reported by ``dimension`` and unit
    L2 norm within 1e-6.
    """

    dimension: int = 512

    def ping(self) -> None:
        pass

    @abstractmethod
    def detect_faces(self, image: bytes) -> list[FaceRegion]:
        pass

    @abstractmethod
    def embed_face(self, image: bytes, region: FaceRegion) -> np.ndarray:
        pass

    @abstractmethod
    def embed_image(self, image: bytes) -> np.ndarray:
        pass

    @abstractmethod
    def embed_text(self, text: str) -> np.ndarray:
        pass

    @abstractmethod
    def classify_style(self, image: bytes, categories: Sequence[str]) -> str:
        pass


@dataclass
class Backends:
    """One backend per capability, as selected by a backend profile."""

    chat: ChatBackend
    vision: VisionBackend
    image_gen: ImageGenBackend
    video_gen: VideoGenBackend
    embed: EmbedBackend
    extras: dict = field(default_factory=dict)
