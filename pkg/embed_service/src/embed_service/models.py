"""The models behind the service, all loadable offline and CPU-cheap.

Face detection uses the LBP frontal-face cascade that ships with
scikit-image. Landmarks come from a canonical 68-point mean-face template
scaled into each detected box (no pretrained landmark regressor is bundled,
so the shape prior stands in; positions are approximate, the count and
layout are exact). Image and face embeddings are HOG + color-histogram
features, per-sample centered, pushed through a fixed seeded Gaussian
projection and unit-normalized; text uses hashed character trigrams through
the same kind of projection. Everything is deterministic: identical inputs
produce identical outputs, with no network access at any point.
"""

from __future__ import annotations

import hashlib
import io
import math
import os
import threading
from dataclasses import dataclass

import numpy as np
from PIL import Image
from skimage import data as skimage_data
from skimage import feature
from skimage.color import rgb2gray, rgb2hsv
from skimage.filters import sobel
from skimage.transform import resize

DEFAULT_DIMENSION = 512
_IMAGE_PROJECTION_SEED = 0xD1F0
_TEXT_PROJECTION_SEED = 0x7E57
_TEXT_BUCKETS = 4096
_HOG_SIZE = 96

STYLE_CATEGORIES = (
    "anime",
    "illustration",
    "origami",
    "oil_painting",
    "realism",
    "cyberpunk",
    "ink_wash",
)


def service_dimension() -> int:
    return int(os.environ.get("EMBED_SERVICE_DIMENSION", DEFAULT_DIMENSION))


def decode_image(raw: bytes) -> np.ndarray:
    """Decode to an RGB uint8 array; raises ValueError on undecodable bytes."""
    try:
        image = Image.open(io.BytesIO(raw))
        image.load()
    except Exception as exc:
        raise ValueError(f"undecodable image: {exc}") from exc
    return np.asarray(image.convert("RGB"))


# ---------------------------------------------------------------------------
# 68-point mean-face template (iBUG-style ordering: jaw, brows, nose, eyes, mouth)
# ---------------------------------------------------------------------------


def _ellipse_points(cx, cy, rx, ry, start_deg, end_deg, count):
    angles = np.linspace(math.radians(start_deg), math.radians(end_deg), count)
    return [(cx + rx * math.cos(a), cy + ry * math.sin(a)) for a in angles]


def _build_mean_face() -> np.ndarray:
    points: list[tuple[float, float]] = []
    # jaw line, left temple to right temple through the chin (17); image y grows downward
    points += _ellipse_points(0.50, 0.42, 0.43, 0.55, 180, 0, 17)
    # eyebrows (5 + 5)
    points += _ellipse_points(0.31, 0.33, 0.13, 0.04, 200, 340, 5)
    points += _ellipse_points(0.69, 0.33, 0.13, 0.04, 200, 340, 5)
    # nose bridge (4) and nostril line (5)
    points += [(0.50, y) for y in np.linspace(0.40, 0.58, 4)]
    points += _ellipse_points(0.50, 0.625, 0.085, 0.030, 150, 30, 5)
    # eyes (6 + 6)
    points += _ellipse_points(0.345, 0.415, 0.085, 0.035, 0, 300, 6)
    points += _ellipse_points(0.655, 0.415, 0.085, 0.035, 0, 300, 6)
    # outer lip (12) and inner lip (8)
    points += _ellipse_points(0.50, 0.77, 0.155, 0.055, 0, 330, 12)
    points += _ellipse_points(0.50, 0.77, 0.095, 0.025, 0, 315, 8)
    template = np.asarray(points, dtype=np.float64)
    assert template.shape == (68, 2)
    return template


MEAN_FACE_68 = _build_mean_face()


def landmarks_for_box(x: int, y: int, width: int, height: int) -> list[list[int]]:
    """The mean-face template scaled into a detected box (pixel coordinates)."""
    scaled = MEAN_FACE_68 * np.array([width, height]) + np.array([x, y])
    return [[int(round(px)), int(round(py))] for px, py in scaled]


# ---------------------------------------------------------------------------
# face detection
# ---------------------------------------------------------------------------


@dataclass
class DetectedFace:
    x: int
    y: int
    width: int
    height: int

    @property
    def area(self) -> int:
        return self.width * self.height


def _iou(a: DetectedFace, b: DetectedFace) -> float:
    x1 = max(a.x, b.x)
    y1 = max(a.y, b.y)
    x2 = min(a.x + a.width, b.x + b.width)
    y2 = min(a.y + a.height, b.y + b.height)
    inter = max(0, x2 - x1) * max(0, y2 - y1)
    union = a.area + b.area - inter
    return inter / union if union else 0.0


class FaceDetector:
    """LBP frontal-face cascade with area-descending non-max suppression."""

    identifier = "skimage-lbp-frontal-face-cascade-v1"

    def __init__(self):
        self._cascade = feature.Cascade(skimage_data.lbp_frontal_face_cascade_filename())
        self._min_face = int(os.environ.get("EMBED_SERVICE_MIN_FACE", 48))
        self._lock = threading.Lock()

    def detect(self, image: np.ndarray) -> list[DetectedFace]:
        height, width = image.shape[:2]
        min_side = min(self._min_face, max(24, min(height, width) // 2))
        with self._lock:  # the cascade object is not documented thread-safe
            raw = self._cascade.detect_multi_scale(
                img=image,
                scale_factor=1.15,
                step_ratio=1,
                min_size=(min_side, min_side),
                max_size=(height, width),
            )
        boxes = [
            DetectedFace(x=int(d["c"]), y=int(d["r"]), width=int(d["width"]), height=int(d["height"]))
            for d in raw
        ]
        boxes.sort(key=lambda b: b.area, reverse=True)
        kept: list[DetectedFace] = []
        for box in boxes:
            if all(_iou(box, other) <= 0.4 for other in kept):
                kept.append(box)
        return kept


# ---------------------------------------------------------------------------
# embeddings
# ---------------------------------------------------------------------------


class _Projector:
    """Fixed seeded Gaussian projection with per-sample centering."""

    def __init__(self, seed: int, in_dim: int, out_dim: int):
        rng = np.random.default_rng(seed)
        self._matrix = rng.standard_normal((out_dim, in_dim)) / math.sqrt(in_dim)

    def __call__(self, features: np.ndarray, fallback_material: bytes) -> np.ndarray:
        centered = features - features.mean()
        vector = self._matrix @ centered
        norm = np.linalg.norm(vector)
        if norm < 1e-12:
            # degenerate feature vector (e.g. perfectly uniform input)
            seed = int.from_bytes(hashlib.sha256(fallback_material).digest()[:8], "big")
            vector = np.random.default_rng(seed).standard_normal(self._matrix.shape[0])
            norm = np.linalg.norm(vector)
        return vector / norm


class ImageEmbedder:
    """HOG + RGB-histogram features projected to a unit vector."""

    def __init__(self, dimension: int):
        self.dimension = dimension
        self.identifier = f"hog-colorhist-proj{dimension}-v1"
        self._feature_dim = self._features(np.zeros((8, 8, 3), dtype=np.uint8)).shape[0]
        self._projector = _Projector(_IMAGE_PROJECTION_SEED, self._feature_dim, dimension)

    @staticmethod
    def _features(image: np.ndarray) -> np.ndarray:
        gray = resize(rgb2gray(image), (_HOG_SIZE, _HOG_SIZE), anti_aliasing=True)
        hog = feature.hog(
            gray, orientations=8, pixels_per_cell=(12, 12), cells_per_block=(2, 2)
        )
        histograms = []
        for channel in range(3):
            counts, _ = np.histogram(image[..., channel], bins=16, range=(0, 255))
            histograms.append(counts / max(counts.sum(), 1))
        return np.concatenate([hog, *histograms])

    def embed(self, image: np.ndarray) -> np.ndarray:
        return self._projector(self._features(image), image.tobytes())

    def embed_region(self, image: np.ndarray, x: int, y: int, width: int, height: int) -> np.ndarray:
        height_total, width_total = image.shape[:2]
        if width <= 0 or height <= 0 or x < 0 or y < 0:
            raise ValueError("malformed box")
        if x + width > width_total or y + height > height_total:
            raise ValueError("box exceeds image bounds")
        return self.embed(image[y : y + height, x : x + width])


class TextEmbedder:
    """Hashed character trigrams projected to a unit vector."""

    def __init__(self, dimension: int):
        self.dimension = dimension
        self.identifier = f"char3gram-hash{_TEXT_BUCKETS}-proj{dimension}-v1"
        self._projector = _Projector(_TEXT_PROJECTION_SEED, _TEXT_BUCKETS, dimension)

    @staticmethod
    def _features(text: str) -> np.ndarray:
        counts = np.zeros(_TEXT_BUCKETS, dtype=np.float64)
        padded = f"  {text.lower()}  "
        for i in range(len(padded) - 2):
            trigram = padded[i : i + 3].encode("utf-8")
            bucket = int.from_bytes(hashlib.blake2b(trigram, digest_size=4).digest(), "big")
            counts[bucket % _TEXT_BUCKETS] += 1.0
        return np.log1p(counts)

    def embed(self, text: str) -> np.ndarray:
        if not text.strip():
            raise ValueError("text must be nonempty")
        return self._projector(self._features(text), text.encode("utf-8"))


# ---------------------------------------------------------------------------
# style classification
# ---------------------------------------------------------------------------


class StyleClassifier:
    """Deterministic color/texture heuristic over the fixed 7-category set."""

    identifier = "hsv-texture-heuristic-v1"

    def classify(self, image: np.ndarray, categories: list[str]) -> str:
        known = [c for c in categories if c in STYLE_CATEGORIES]
        if not known:
            raise ValueError(f"no usable categories in {categories!r}")
        scores = self._scores(image)
        return max(known, key=lambda c: scores[c])

    @staticmethod
    def _scores(image: np.ndarray) -> dict[str, float]:
        small = resize(image, (64, 64, 3), anti_aliasing=True)
        hsv = rgb2hsv(small)
        hue, sat, val = hsv[..., 0], hsv[..., 1], hsv[..., 2]
        edges = sobel(rgb2gray(small))
        edge_density = float((edges > 0.08).mean())
        sat_mean = float(sat.mean())
        val_mean = float(val.mean())
        val_std = float(val.std())
        # flatness: how concentrated the palette is
        quantized = (small * 7).astype(int)
        colors = {tuple(px) for row in quantized for px in row}
        diversity = len(colors) / (64 * 64)
        flatness = 1.0 - min(diversity * 8.0, 1.0)
        neon = float(((sat > 0.6) & ((hue < 0.05) | (hue > 0.7))).mean())
        warm = float(((hue < 0.17) & (sat > 0.2)).mean())
        return {
            "anime": 1.2 * sat_mean + edge_density + 0.3 * flatness,
            "illustration": flatness + 0.6 * sat_mean + 0.2 * edge_density,
            "origami": flatness + val_mean - edge_density,
            "oil_painting": warm + val_std + 0.4 * sat_mean,
            "realism": 2.2 * diversity + val_std,
            "cyberpunk": 2.0 * neon + (1.0 - val_mean) + 0.3 * sat_mean,
            "ink_wash": (1.0 - sat_mean) + val_mean - 0.5 * flatness,
        }


# ---------------------------------------------------------------------------
# registry
# ---------------------------------------------------------------------------


class ModelRegistry:
    """Loads every model once; endpoints 503 until ``load`` has succeeded."""

    def __init__(self):
        self.loaded = False
        self.detector: FaceDetector | None = None
        self.image_embedder: ImageEmbedder | None = None
        self.text_embedder: TextEmbedder | None = None
        self.style_classifier: StyleClassifier | None = None

    def load(self) -> None:
        dimension = service_dimension()
        self.detector = FaceDetector()
        self.image_embedder = ImageEmbedder(dimension)
        self.text_embedder = TextEmbedder(dimension)
        self.style_classifier = StyleClassifier()
        self.loaded = True

    def identifiers(self) -> dict:
        if not self.loaded:
            return {}
        return {
            "detector": self.detector.identifier,
            "landmarks": "mean-shape-68-template-v1",
            "image_embedder": self.image_embedder.identifier,
            "face_embedder": self.image_embedder.identifier + "+bbox-crop",
            "text_embedder": self.text_embedder.identifier,
            "style_classifier": self.style_classifier.identifier,
        }
