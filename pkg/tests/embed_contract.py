"""The EmbedBackend contract suite, shared by the mock and any hosted service.

Any implementation must pass these checks unchanged; hosted runs are gated
behind a reachability flag by the callers.
"""

from __future__ import annotations

import io

import numpy as np
from PIL import Image

from dreamforge.metrics import DEFAULT_STYLE_CATEGORIES

UNIT_NORM_TOL = 1e-6


def sample_image(color=(200, 120, 80), size=(96, 96)) -> bytes:
    buf = io.BytesIO()
    Image.new("RGB", size, color).save(buf, format="PNG")
    return buf.getvalue()


def run_embed_contract(backend, image: bytes | None = None) -> None:
    image = image or sample_image()
    other = sample_image(color=(10, 200, 30))

    for vector in (
        backend.embed_image(image),
        backend.embed_text("a lantern maker at a workbench"),
    ):
        vector = np.asarray(vector, dtype=float)
        assert vector.ndim == 1 and vector.shape[0] == backend.dimension
        assert abs(np.linalg.norm(vector) - 1.0) <= UNIT_NORM_TOL

    # identical inputs embed identically
    assert np.array_equal(backend.embed_image(image), backend.embed_image(image))
    assert np.array_equal(backend.embed_text("same"), backend.embed_text("same"))

    regions = backend.detect_faces(image)
    assert isinstance(regions, list)
    if regions:
        face_vec = np.asarray(backend.embed_face(image, regions[0]), dtype=float)
        assert abs(np.linalg.norm(face_vec) - 1.0) <= UNIT_NORM_TOL
        same = np.asarray(backend.embed_face(image, regions[0]), dtype=float)
        assert float(face_vec @ same) == 1.0 or np.allclose(face_vec, same)

    label = backend.classify_style(other, DEFAULT_STYLE_CATEGORIES)
    assert label in DEFAULT_STYLE_CATEGORIES
