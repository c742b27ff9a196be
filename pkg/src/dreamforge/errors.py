"""Exception types shared across the engine."""

from __future__ import annotations


class DreamForgeError(Exception):
    """Base class for all engine errors."""


class BackendUnavailableError(DreamForgeError):
    """A backend failed its liveness probe."""


class BackendError(DreamForgeError):
    """A backend call failed (for hosted backends: after all retries)."""


class ScriptExhaustedError(BackendError):
    """A scripted mock backend was asked for more responses than it holds."""


class ProfileError(DreamForgeError):
    """A backend profile file is missing, malformed, or inconsistent."""


class PhaseFailedError(DreamForgeError):
    """A conversation phase could not complete. Carries the partial transcript."""

    def __init__(self, message: str, transcript=None):
        super().__init__(message)
        self.transcript = transcript


class DuplicateKeyError(DreamForgeError):
    """Attempt to overwrite an existing memory entry (memory is append-only)."""


class MissingKeyError(DreamForgeError):
    """A requested memory key is absent."""

    def __init__(self, key: str):
        super().__init__(f"missing memory key: {key!r}")
        self.key = key


class ArtifactIntegrityError(DreamForgeError):
    """A memory artifact no longer matches its recorded content hash."""


class MalformedScriptError(DreamForgeError):
    """The script summary does not parse as contiguous numbered scenes."""

    def __init__(self, message: str, line_number: int):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


class KeyframeFailedError(DreamForgeError):
    """A keyframe was rejected on every attempt up to the attempt cap."""

    def __init__(self, index: int, verdicts):
        super().__init__(
            f"keyframe {index} rejected on all {len(verdicts)} attempts"
        )
        self.index = index
        self.verdicts = list(verdicts)


class BaseFrameFailedError(KeyframeFailedError):
    """The base frame (keyframe 1) never passed review."""


class InsufficientFacesError(DreamForgeError):
    """Fewer than two frames carry a detected face; CSFD is undefined."""


class StyleClassificationError(DreamForgeError):
    """The style judge returned an out-of-set label even after a reprompt."""

    def __init__(self, frame_index: int, label: str):
        super().__init__(
            f"frame {frame_index}: unusable style label {label!r} after reprompt"
        )
        self.frame_index = frame_index
        self.label = label


class MissingScenePromptError(DreamForgeError):
    """A frame lacks the scene prompt required for the CLIP-style score."""

    def __init__(self, frame_index: int):
        super().__init__(f"frame {frame_index} has no scene prompt")
        self.frame_index = frame_index


class PipelineError(DreamForgeError):
    """A pipeline stage failed; the run is persisted and resumable."""

    def __init__(self, run_id: str, stage: str, cause: Exception):
        super().__init__(f"run {run_id} failed at stage {stage!r}: {cause}")
        self.run_id = run_id
        self.stage = stage
        self.cause = cause
