"""Rule-driven simulator backends for fully offline end-to-end runs.

Unlike the scripted mocks, these answer any request with deterministic,
plausibly shaped content keyed on a hash of (seed, request), so a whole
pipeline run completes without a response script prepared in advance.
"""

from __future__ import annotations

import hashlib
import re
import threading
from typing import Optional, Sequence

from .base import ChatBackend, Message, VisionBackend

_SCENE_TARGET_RE = re.compile(r"about (\d+) scenes")
_CATEGORY_LINE_RE = re.compile(r"categories:\s*(.+)", re.IGNORECASE)


def _tag(seed: int, material: str) -> str:
    return hashlib.sha256(f"{seed}:{material}".encode("utf-8")).hexdigest()[:8]


def _subject(text: str) -> str:
    words = re.findall(r"[A-Za-z][A-Za-z'-]*", text)
    return " ".join(words[:6]) if words else "an untitled production"


class SimChatBackend(ChatBackend):
    """Answers by pattern-matching the latest instruction."""

    def __init__(self, seed: int = 0):
        self.seed = seed
        self.calls: list[dict] = []
        self._lock = threading.Lock()

    def complete(self, messages: Sequence[Message]) -> str:
        last = messages[-1]["content"] if messages else ""
        response = self._respond(last)
        with self._lock:
            self.calls.append({"messages": [dict(m) for m in messages], "response": response})
        return response

    def _respond(self, instruction: str) -> str:
        tag = _tag(self.seed, instruction)
        lowered = instruction.lower()
        if "scene <n>:" in lowered or "scene list" in lowered:
            return self._scene_list(instruction, tag)
        if "visual style" in lowered:
            return f"<INFO> layered watercolor storybook style, soft muted palette ({tag})"
        if "story outline" in lowered:
            subject = _subject(instruction.split("Brief:", 1)[-1])
            return (
                f"<INFO> Story outline ({tag}): a gentle three-act arc about {subject}, "
                "opening on daily routine, rising through a small obstacle, closing warmly."
            )
        if "task statement" in lowered:
            subject = _subject(instruction.split("Brief:", 1)[-1])
            return (
                f"<INFO> Produce a short multi-scene animated film about {subject}, "
                f"with recurring characters and a single coherent look ({tag})."
            )
        if "image-generation prompt" in lowered:
            return (
                f"A richly detailed illustration, centered subject, steady palette, "
                f"soft light, variant {tag}."
            )
        if "direction note" in lowered:
            return f"Keep the framing and palette from the prior frame; eye-level camera ({tag})."
        return f"Understood ({tag})."

    def _scene_list(self, instruction: str, tag: str) -> str:
        match = _SCENE_TARGET_RE.search(instruction)
        count = int(match.group(1)) if match else 10
        subject = _subject(instruction.split("Story:", 1)[-1])
        lines = [
            f"Scene {i}: {subject} — beat {i} of {count}, same cast and setting ({tag})"
            for i in range(1, count + 1)
        ]
        return "<INFO>\n" + "\n".join(lines)


class SimVisionBackend(VisionBackend):
    """Approves frames and describes them deterministically from the image hash."""

    def __init__(self, seed: int = 0):
        self.seed = seed
        self.calls: list[dict] = []
        self._lock = threading.Lock()

    def describe(self, image: bytes, prompt: str, system: Optional[str] = None) -> str:
        image_sha = hashlib.sha256(image).hexdigest()
        response = self._respond(image_sha, prompt)
        with self._lock:
            self.calls.append({"image_sha256": image_sha, "prompt": prompt, "response": response})
        return response

    def _respond(self, image_sha: str, prompt: str) -> str:
        tag = _tag(self.seed, image_sha + prompt)
        lowered = prompt.lower()
        if "approve" in lowered:
            return "APPROVE"
        category_match = _CATEGORY_LINE_RE.search(prompt)
        if category_match and "category" in lowered:
            categories = [c.strip() for c in category_match.group(1).split(",") if c.strip()]
            pick = int(image_sha[:8], 16) % len(categories)
            return categories[pick]
        if "must stay fixed" in lowered or "long-term" in lowered:
            return (
                f"Base look {tag}: soft watercolor washes, one recurring protagonist with "
                "round features, warm interior backdrop that repeats in every scene."
            )
        return (
            f"Frame context {tag}: protagonist centered mid-ground, palette unchanged, "
            "light from the left, background continuous with the prior frame."
        )
