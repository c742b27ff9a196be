"""embed-service: face detection and embedding over HTTP, fully offline."""

__version__ = "0.1.0"

from .app import create_app  # noqa: F401
from .models import ModelRegistry  # noqa: F401
