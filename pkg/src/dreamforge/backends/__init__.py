from .base import (
    Backends,
    ChatBackend,
    EmbedBackend,
    FaceRegion,
    ImageGenBackend,
    Message,
    VideoClip,
    VisionBackend,
)
from .http import (
    CallLogger,
    HttpChatBackend,
    HttpEmbedBackend,
    HttpImageGenBackend,
    HttpVideoGenBackend,
    HttpVisionBackend,
)
from .mocks import (
    MockChatBackend,
    MockEmbedBackend,
    MockImageGenBackend,
    MockVideoGenBackend,
    MockVisionBackend,
)
from .profile import (
    CAPABILITIES,
    build_backends,
    default_mock_profile,
    load_profile,
    validate_profile,
)
from .sim import SimChatBackend, SimVisionBackend

__all__ = [
    "Backends",
    "CAPABILITIES",
    "CallLogger",
    "ChatBackend",
    "EmbedBackend",
    "FaceRegion",
    "HttpChatBackend",
    "HttpEmbedBackend",
    "HttpImageGenBackend",
    "HttpVideoGenBackend",
    "HttpVisionBackend",
    "ImageGenBackend",
    "Message",
    "MockChatBackend",
    "MockEmbedBackend",
    "MockImageGenBackend",
    "MockVideoGenBackend",
    "MockVisionBackend",
    "SimChatBackend",
    "SimVisionBackend",
    "VideoClip",
    "VideoGenBackend",
    "VisionBackend",
    "build_backends",
    "default_mock_profile",
    "load_profile",
    "validate_profile",
]
