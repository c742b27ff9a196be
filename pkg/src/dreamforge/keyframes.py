"""Keyframe iteration: base frame, review loop, and forward handoffs.

The first keyframe fixes the look of the whole video. Once it survives
review, the monitor extracts a frozen base description of everything that
must stay fixed (style, characters, background). Every later frame is
generated from its scene text plus two handoffs: that base description (the
long-range anchor, never regenerated) and the monitor's description of the
previous frame (the short-range link). The chain is inherently sequential:
frame t needs the context of frame t-1.

Review: after each render the monitor replies APPROVE or REJECT with a
critique; a rejection triggers full regeneration with the critique folded
into the painter's next prompt, up to an attempt cap.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .backends.base import ImageGenBackend
from .errors import BaseFrameFailedError, KeyframeFailedError
from .roles import Agent, VisionAgent

DEFAULT_ATTEMPT_CAP = 3

PAINTER_PROMPT_TEMPLATE = (
    "Write one image-generation prompt for keyframe {index}.\n"
    "Scene: {scene}\n"
    "Style: {style}"
)
PAINTER_CONTEXT_BLOCK = "\nPrevious frame context: {prev}"
PAINTER_CRITIQUE_BLOCK = (
    "\nThe previous attempt was rejected: {critique}\nAddress the critique."
)

DIRECTOR_PROMPT_TEMPLATE = (
    "Add a short direction note for keyframe {index}.\n"
    "Scene: {scene}\n"
    "Painter prompt: {painter_prompt}"
)
DIRECTOR_CONTEXT_BLOCK = "\nPrevious frame context: {prev}"

GENERATION_REQUEST_TEMPLATE = (
    "{painter_prompt}\n"
    "Direction: {director_note}\n"
    "Scene: {scene}\n"
    "Style: {style}"
)
GENERATION_ANCHOR_BLOCK = (
    "\nBase description: {base}\n"
    "Previous frame context: {prev}"
)

REVIEW_PROMPT_TEMPLATE = (
    "Review this rendered keyframe for the scene: {scene}\n"
    "{anchor_line}"
    "Reply APPROVE if the frame is usable and consistent, otherwise reply "
    "REJECT: <what must change>."
)
REVIEW_ANCHOR_LINE = "It must preserve the base look: {base}\n"

BASE_DESCRIPTION_PROMPT = (
    "This first keyframe has been approved. Describe the features that must "
    "stay fixed for the whole video: the visual style, the recurring "
    "characters and their traits, and the background."
)

CONTEXT_PROMPT_TEMPLATE = (
    "Describe keyframe {index} precisely enough that the next keyframe can "
    "continue from it: subjects and their positions, palette, lighting, and "
    "background."
)

NO_CRITIQUE_FALLBACK = "(no critique given)"


@dataclass(frozen=True)
class BaseDescription:
    """The frozen long-term anchor extracted from the accepted base frame."""

    text: str
    source_frame: int = 1

    def __post_init__(self):
        if not self.text:
            raise ValueError("base description must be nonempty")


@dataclass(frozen=True)
class ContextEnv:
    """The monitor's description of keyframe t, consumed by frame t+1."""

    index: int
    text: str

    def __post_init__(self):
        if not self.text:
            raise ValueError(f"context for frame {self.index} must be nonempty")


@dataclass(frozen=True)
class ReviewVerdict:
    verdict: str  # "approve" | "reject"
    critique: str
    attempt: int

    def __post_init__(self):
        if self.verdict not in ("approve", "reject"):
            raise ValueError(f"unknown verdict {self.verdict!r}")
        if self.verdict == "reject" and not self.critique:
            raise ValueError("a rejection needs a critique")

    def to_dict(self) -> dict:
        return {"verdict": self.verdict, "critique": self.critique, "attempt": self.attempt}


@dataclass(frozen=True)
class KeyframeRequest:
    """Everything that went into generating one keyframe."""

    index: int
    scene: str
    painter_prompt: str
    director_note: str
    generation_prompt: str
    base: Optional[BaseDescription] = None
    prev_context: Optional[ContextEnv] = None

    def __post_init__(self):
        if self.index >= 2 and (self.base is None or self.prev_context is None):
            raise ValueError(
                f"keyframe {self.index}: base description and previous context are required"
            )

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "scene": self.scene,
            "painter_prompt": self.painter_prompt,
            "director_note": self.director_note,
            "generation_prompt": self.generation_prompt,
            "base_description": self.base.text if self.base else None,
            "prev_context": (
                {"index": self.prev_context.index, "text": self.prev_context.text}
                if self.prev_context
                else None
            ),
        }


@dataclass
class Keyframe:
    index: int
    image: bytes
    request: KeyframeRequest
    review: list[ReviewVerdict] = field(default_factory=list)
    accepted: bool = False

    def __post_init__(self):
        if not self.image:
            raise ValueError(f"keyframe {self.index}: image must be nonempty")
        if self.accepted and (not self.review or self.review[-1].verdict != "approve"):
            raise ValueError(f"keyframe {self.index}: accepted without a final approve verdict")


def parse_review(response: str, attempt: int) -> ReviewVerdict:
    """APPROVE passes; anything else is a rejection (a conservative monitor)."""
    text = response.strip()
    if text.upper().startswith("APPROVE"):
        return ReviewVerdict(verdict="approve", critique="", attempt=attempt)
    critique = text
    if text.upper().startswith("REJECT"):
        _, _, remainder = text.partition(":")
        critique = remainder.strip() or text
    return ReviewVerdict(verdict="reject", critique=critique or NO_CRITIQUE_FALLBACK, attempt=attempt)


def _review_loop(
    index: int,
    scene: str,
    style: str,
    painter: Agent,
    director: Agent,
    monitor: VisionAgent,
    image_backend: ImageGenBackend,
    attempt_cap: int,
    base: Optional[BaseDescription],
    prev: Optional[ContextEnv],
) -> Keyframe:
    verdicts: list[ReviewVerdict] = []
    critique: Optional[str] = None
    for attempt in range(1, attempt_cap + 1):
        painter_ask = PAINTER_PROMPT_TEMPLATE.format(index=index, scene=scene, style=style)
        if prev is not None:
            painter_ask += PAINTER_CONTEXT_BLOCK.format(prev=prev.text)
        if critique:
            painter_ask += PAINTER_CRITIQUE_BLOCK.format(critique=critique)
        painter_prompt = painter.chat([{"role": "user", "content": painter_ask}])

        director_ask = DIRECTOR_PROMPT_TEMPLATE.format(
            index=index, scene=scene, painter_prompt=painter_prompt
        )
        if prev is not None:
            director_ask += DIRECTOR_CONTEXT_BLOCK.format(prev=prev.text)
        director_note = director.chat([{"role": "user", "content": director_ask}])

        generation_prompt = GENERATION_REQUEST_TEMPLATE.format(
            painter_prompt=painter_prompt,
            director_note=director_note,
            scene=scene,
            style=style,
        )
        if base is not None and prev is not None:
            generation_prompt += GENERATION_ANCHOR_BLOCK.format(base=base.text, prev=prev.text)

        image = image_backend.generate(generation_prompt)

        anchor_line = REVIEW_ANCHOR_LINE.format(base=base.text) if base is not None else ""
        review_response = monitor.describe(
            image, REVIEW_PROMPT_TEMPLATE.format(scene=scene, anchor_line=anchor_line)
        )
        verdict = parse_review(review_response, attempt)
        verdicts.append(verdict)
        if verdict.verdict == "approve":
            request = KeyframeRequest(
                index=index,
                scene=scene,
                painter_prompt=painter_prompt,
                director_note=director_note,
                generation_prompt=generation_prompt,
                base=base,
                prev_context=prev,
            )
            return Keyframe(
                index=index, image=image, request=request, review=verdicts, accepted=True
            )
        critique = verdict.critique

    if index == 1:
        raise BaseFrameFailedError(index, verdicts)
    raise KeyframeFailedError(index, verdicts)


def generate_base_frame(
    scene_1: str,
    painter: Agent,
    director: Agent,
    monitor: VisionAgent,
    image_backend: ImageGenBackend,
    style: str = "",
    attempt_cap: int = DEFAULT_ATTEMPT_CAP,
) -> tuple[Keyframe, BaseDescription]:
    """Produce the accepted base frame and its frozen base description.

    Cycles painter -> director -> render -> monitor review until approval or
    the attempt cap; the cap raises BaseFrameFailedError carrying every
    rejected attempt's verdict.
    """
    frame = _review_loop(
        index=1,
        scene=scene_1,
        style=style,
        painter=painter,
        director=director,
        monitor=monitor,
        image_backend=image_backend,
        attempt_cap=attempt_cap,
        base=None,
        prev=None,
    )
    base_text = monitor.describe(frame.image, BASE_DESCRIPTION_PROMPT)
    return frame, BaseDescription(text=base_text.strip(), source_frame=1)


def iterate_keyframe(
    t: int,
    scene_t: str,
    base: BaseDescription,
    prev: ContextEnv,
    painter: Agent,
    director: Agent,
    monitor: VisionAgent,
    image_backend: ImageGenBackend,
    style: str = "",
    attempt_cap: int = DEFAULT_ATTEMPT_CAP,
) -> Keyframe:
    """Generate keyframe t >= 2 from its scene plus the two handoffs.

    The rendered generation request always contains the base description and
    the previous frame's context verbatim; that containment is what makes the
    anchor threading checkable from capture ledgers.
    """
    if t < 2:
        raise ValueError("iterate_keyframe handles t >= 2; the base frame has its own path")
    if base is None or prev is None:
        raise ValueError(f"keyframe {t}: base description and previous context are required")
    return _review_loop(
        index=t,
        scene=scene_t,
        style=style,
        painter=painter,
        director=director,
        monitor=monitor,
        image_backend=image_backend,
        attempt_cap=attempt_cap,
        base=base,
        prev=prev,
    )


def derive_context(frame: Keyframe, monitor: VisionAgent) -> ContextEnv:
    """The monitor's description of an accepted frame, for the next iteration."""
    if not frame.accepted:
        raise ValueError(f"keyframe {frame.index} is not accepted; no context to derive")
    text = monitor.describe(frame.image, CONTEXT_PROMPT_TEMPLATE.format(index=frame.index))
    return ContextEnv(index=frame.index, text=text.strip())
