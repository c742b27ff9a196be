"""Backend profile files: per-capability choice of mock or hosted HTTP.

Profile shape (JSON)::

    {
      "schema_version": 1,
      "chat":      {"kind": "mock"} | {"kind": "http", "base_url": ..., "model": ..., "api_key_env": ...},
      "vision":    {...},
      "image_gen": {...},
      "video_gen": {...},
      "embed":     {"kind": "mock"} | {"kind": "http", "base_url": ..., "token_env": ...}
    }

Mock chat/vision entries may carry a ``script`` list for replayed responses;
without one they fall back to the deterministic rule-driven simulators.
Credentials are never stored in the profile, only env-var names.
"""

from __future__ import annotations

import os
from pathlib import Path
from typing import Optional

from ..errors import ProfileError
from ..storage import read_json
from .base import Backends
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
from .sim import SimChatBackend, SimVisionBackend

CAPABILITIES = ("chat", "vision", "image_gen", "video_gen", "embed")
_KINDS = ("mock", "http")


def default_mock_profile() -> dict:
    return {"schema_version": 1, **{cap: {"kind": "mock"} for cap in CAPABILITIES}}


def load_profile(path: Path | str) -> dict:
    path = Path(path)
    if not path.is_file():
        raise ProfileError(f"backend profile not found: {path}")
    try:
        profile = read_json(path)
    except ValueError as exc:
        raise ProfileError(f"backend profile is not valid JSON: {exc}") from exc
    problems = [p for p in validate_profile(profile) if p.severity == "error"]
    if problems:
        raise ProfileError("; ".join(p.message for p in problems))
    return profile


class ProfileProblem:
    def __init__(self, severity: str, message: str):
        self.severity = severity
        self.message = message

    def __repr__(self) -> str:
        return f"{self.severity}: {self.message}"


def validate_profile(profile: dict) -> list[ProfileProblem]:
    problems: list[ProfileProblem] = []
    if not isinstance(profile, dict):
        return [ProfileProblem("error", "profile must be a JSON object")]
    for cap in CAPABILITIES:
        entry = profile.get(cap)
        if entry is None:
            problems.append(ProfileProblem("error", f"missing capability entry: {cap}"))
            continue
        kind = entry.get("kind")
        if kind not in _KINDS:
            problems.append(ProfileProblem("error", f"{cap}: kind must be one of {_KINDS}, got {kind!r}"))
            continue
        if kind == "http":
            if not entry.get("base_url"):
                problems.append(ProfileProblem("error", f"{cap}: http backend needs base_url"))
            for env_key in ("api_key_env", "token_env"):
                env_name = entry.get(env_key)
                if env_name and not os.environ.get(env_name):
                    problems.append(
                        ProfileProblem("warning", f"{cap}: env var {env_name} is not set")
                    )
        if kind == "mock" and "script" in entry and not isinstance(entry["script"], list):
            problems.append(ProfileProblem("error", f"{cap}: mock script must be a list"))
    return problems


def build_backends(
    profile: Optional[dict] = None,
    seed: int = 0,
    call_log_path: Optional[Path] = None,
) -> Backends:
    """Instantiate one backend per capability from a (validated) profile."""
    profile = profile if profile is not None else default_mock_profile()
    problems = [p for p in validate_profile(profile) if p.severity == "error"]
    if problems:
        raise ProfileError("; ".join(p.message for p in problems))
    logger = CallLogger(call_log_path) if call_log_path else None

    def entry(cap: str) -> dict:
        return profile[cap]

    chat_cfg = entry("chat")
    if chat_cfg["kind"] == "mock":
        chat = (
            MockChatBackend(chat_cfg["script"])
            if chat_cfg.get("script")
            else SimChatBackend(seed=seed)
        )
    else:
        chat = HttpChatBackend(
            chat_cfg["base_url"],
            model=chat_cfg.get("model", "default"),
            api_key_env=chat_cfg.get("api_key_env"),
            logger=logger,
        )

    vision_cfg = entry("vision")
    if vision_cfg["kind"] == "mock":
        vision = (
            MockVisionBackend(vision_cfg["script"])
            if vision_cfg.get("script")
            else SimVisionBackend(seed=seed)
        )
    else:
        vision = HttpVisionBackend(
            vision_cfg["base_url"],
            model=vision_cfg.get("model", "default"),
            api_key_env=vision_cfg.get("api_key_env"),
            logger=logger,
        )

    image_cfg = entry("image_gen")
    if image_cfg["kind"] == "mock":
        image_gen = MockImageGenBackend(seed=seed)
    else:
        image_gen = HttpImageGenBackend(
            image_cfg["base_url"],
            model=image_cfg.get("model", "default"),
            api_key_env=image_cfg.get("api_key_env"),
            logger=logger,
        )

    video_cfg = entry("video_gen")
    if video_cfg["kind"] == "mock":
        video_gen = MockVideoGenBackend(seed=seed)
    else:
        video_gen = HttpVideoGenBackend(
            video_cfg["base_url"],
            model=video_cfg.get("model", "default"),
            api_key_env=video_cfg.get("api_key_env"),
            logger=logger,
        )

    embed_cfg = entry("embed")
    if embed_cfg["kind"] == "mock":
        embed = MockEmbedBackend(seed=seed)
    else:
        embed = HttpEmbedBackend(
            embed_cfg["base_url"],
            token_env=embed_cfg.get("token_env"),
            logger=logger,
        )

    return Backends(chat=chat, vision=vision, image_gen=image_gen, video_gen=video_gen, embed=embed)
