"""dreamforge: a multi-agent studio pipeline for multi-scene video production.

Role-played agents collaborate through bounded conversations across fixed
stages; a keyframe-iteration loop threads a frozen base description and the
previous frame's context into every generation request; an evaluation
toolkit scores cross-scene face, style, and prompt consistency.
"""

__version__ = "0.1.0"

from .errors import DreamForgeError  # noqa: F401
