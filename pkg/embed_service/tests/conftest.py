from __future__ import annotations

import io

import numpy as np
import pytest
from fastapi.testclient import TestClient
from PIL import Image
from skimage import data as skimage_data

from embed_service import create_app


def _png(array: np.ndarray) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(array).save(buf, format="PNG")
    return buf.getvalue()


@pytest.fixture(scope="session")
def portrait_a() -> bytes:
    """Head-and-shoulders crop of the bundled astronaut photo."""
    return _png(skimage_data.astronaut()[0:340, 90:430])


@pytest.fixture(scope="session")
def portrait_b() -> bytes:
    """The same person: mild brightness lift plus a 2-pixel shift."""
    crop = skimage_data.astronaut()[0:340, 90:430].astype(np.float32)
    shifted = np.roll(np.clip(crop * 1.06 + 4, 0, 255).astype(np.uint8), 2, axis=1)
    return _png(shifted)


@pytest.fixture(scope="session")
def blank_image() -> bytes:
    return _png(np.full((256, 256, 3), 255, dtype=np.uint8))


@pytest.fixture(scope="session")
def client():
    with TestClient(create_app()) as test_client:
        yield test_client
