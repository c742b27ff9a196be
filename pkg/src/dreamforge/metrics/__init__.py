"""Cross-scene consistency scores for a finished run.

Three scores over the accepted keyframes:

* face consistency — mean pairwise cosine similarity of unit face-region
  embeddings over every unordered frame pair that carries a detected face;
* style consistency — share of frames falling in the modal style category,
  judged frame-by-frame by a vision backend over a fixed 7-category set;
* prompt alignment — mean image/text embedding cosine between each frame
  and its scene prompt, reported as a raw cosine (the x100 convention is
  also included in the report for comparison with image-metric tooling).

Frames without a detectable face are excluded from the face score rather
than failing the report; multi-face frames contribute their largest face.
Pair computations may run on the numba or numpy kernel (see ``pairwise``)
and must match the sequential double loop exactly.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from ..backends.base import Backends, EmbedBackend, VisionBackend
from ..errors import (
    DreamForgeError,
    InsufficientFacesError,
    MissingScenePromptError,
    StyleClassificationError,
)
from ..storage import atomic_write_json, read_json, utc_now_iso
from .pairwise import mean_pairwise_cosine, normalize_rows, pairwise_cosines

REPORT_SCHEMA_VERSION = 1


class StyleCategory(enum.Enum):
    ANIME = "anime"
    ILLUSTRATION = "illustration"
    ORIGAMI = "origami"
    OIL_PAINTING = "oil_painting"
    REALISM = "realism"
    CYBERPUNK = "cyberpunk"
    INK_WASH = "ink_wash"


DEFAULT_STYLE_CATEGORIES = tuple(category.value for category in StyleCategory)

STYLE_JUDGE_PROMPT = (
    "Classify this frame into exactly one style category.\n"
    "Categories: {categories}\n"
    "Reply with the single category name only."
)
STYLE_JUDGE_REPROMPT = (
    "That was not a valid category. Categories: {categories}\n"
    "Reply with exactly one category name from the list and nothing else."
)


@dataclass
class FramePayload:
    index: int
    image: bytes
    scene_prompt: Optional[str] = None


@dataclass
class FrameSet:
    """Ordered keyframes under evaluation; indices unique, n >= 1."""

    frames: list[FramePayload]

    def __post_init__(self):
        if not self.frames:
            raise ValueError("a frame set needs at least one frame")
        indices = [f.index for f in self.frames]
        if len(set(indices)) != len(indices):
            raise ValueError("frame indices must be unique")

    def __len__(self) -> int:
        return len(self.frames)


@dataclass
class CsfdResult:
    value: float
    pair_count: int
    frames_used: list[int]
    excluded: list[dict]
    per_pair: list[dict]


@dataclass
class CsscResult:
    value: float
    labels: dict[int, str]
    modal_category: str
    modal_count: int


@dataclass
class AvgClipResult:
    value: float
    per_frame: dict[int, float]


def csfd_score(frames: FrameSet, embed: EmbedBackend) -> CsfdResult:
    """Mean pairwise face-embedding cosine over face-bearing frames.

    Frames with no detected face are excluded (and listed); frames with
    several faces contribute the largest one. Fewer than two usable frames
    raises InsufficientFacesError. Embeddings are re-normalized here, so a
    positive rescaling upstream cannot move the score.
    """
    usable: list[tuple[int, np.ndarray]] = []
    excluded: list[dict] = []
    for frame in frames.frames:
        regions = embed.detect_faces(frame.image)
        if not regions:
            excluded.append({"index": frame.index, "reason": "no face detected"})
            continue
        region = max(regions, key=lambda r: r.area)
        usable.append((frame.index, np.asarray(embed.embed_face(frame.image, region), dtype=float)))
    if len(usable) < 2:
        raise InsufficientFacesError(
            f"need >= 2 frames with a detected face, found {len(usable)}"
        )
    indices = [index for index, _ in usable]
    matrix = normalize_rows(np.stack([vec for _, vec in usable]))
    sims = pairwise_cosines(matrix)
    per_pair = []
    pos = 0
    for a in range(len(indices)):
        for b in range(a + 1, len(indices)):
            per_pair.append(
                {"i": indices[a], "j": indices[b], "similarity": float(sims[pos])}
            )
            pos += 1
    value = float(sims.sum() / sims.size)
    return CsfdResult(
        value=value,
        pair_count=int(sims.size),
        frames_used=indices,
        excluded=excluded,
        per_pair=per_pair,
    )


def _normalize_label(raw: str) -> str:
    return "_".join(raw.strip().strip(".!\"'").lower().split())


def cssc_score(
    frames: FrameSet,
    judge: VisionBackend,
    categories: Sequence[str] = DEFAULT_STYLE_CATEGORIES,
) -> CsscResult:
    """Percentage of frames in the modal style category, in (0, 100]."""
    categories = list(categories)
    prompt = STYLE_JUDGE_PROMPT.format(categories=", ".join(categories))
    reprompt = STYLE_JUDGE_REPROMPT.format(categories=", ".join(categories))
    labels: dict[int, str] = {}
    counts: dict[str, int] = {c: 0 for c in categories}
    for frame in frames.frames:
        label = _normalize_label(judge.describe(frame.image, prompt))
        if label not in counts:
            label = _normalize_label(judge.describe(frame.image, reprompt))
        if label not in counts:
            raise StyleClassificationError(frame.index, label)
        labels[frame.index] = label
        counts[label] += 1
    modal_count = max(counts.values())
    modal_category = max(counts, key=lambda c: counts[c])
    value = modal_count / len(frames) * 100.0
    return CsscResult(
        value=value, labels=labels, modal_category=modal_category, modal_count=modal_count
    )


def avg_clip_score(frames: FrameSet, embed: EmbedBackend) -> AvgClipResult:
    """Mean image/text cosine between each frame and its scene prompt (raw)."""
    per_frame: dict[int, float] = {}
    for frame in frames.frames:
        if not frame.scene_prompt:
            raise MissingScenePromptError(frame.index)
        image_vec = np.asarray(embed.embed_image(frame.image), dtype=float)
        text_vec = np.asarray(embed.embed_text(frame.scene_prompt), dtype=float)
        image_vec = image_vec / np.linalg.norm(image_vec)
        text_vec = text_vec / np.linalg.norm(text_vec)
        per_frame[frame.index] = float(image_vec @ text_vec)
    value = float(np.mean(list(per_frame.values())))
    return AvgClipResult(value=value, per_frame=per_frame)


@dataclass
class MetricReport:
    """All applicable scores for a run; absent scores carry their reason."""

    run_id: str
    csfd: Optional[float] = None
    cssc: Optional[float] = None
    avg_clip: Optional[float] = None
    csfd_detail: dict = field(default_factory=dict)
    cssc_detail: dict = field(default_factory=dict)
    avg_clip_detail: dict = field(default_factory=dict)
    reasons: dict = field(default_factory=dict)
    generated_at: str = field(default_factory=utc_now_iso)

    def to_dict(self) -> dict:
        return {
            "schema_version": REPORT_SCHEMA_VERSION,
            "run_id": self.run_id,
            "generated_at": self.generated_at,
            "csfd": self.csfd,
            "cssc": self.cssc,
            "avg_clip": self.avg_clip,
            "avg_clip_x100": None if self.avg_clip is None else self.avg_clip * 100.0,
            "csfd_detail": self.csfd_detail,
            "cssc_detail": self.cssc_detail,
            "avg_clip_detail": self.avg_clip_detail,
            "reasons": self.reasons,
            # reserved for external tooling; never computed here
            "fid": None,
            "inception_score": None,
            "fvd": None,
            "kvd": None,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "MetricReport":
        return cls(
            run_id=payload["run_id"],
            csfd=payload["csfd"],
            cssc=payload["cssc"],
            avg_clip=payload["avg_clip"],
            csfd_detail=payload.get("csfd_detail", {}),
            cssc_detail=payload.get("cssc_detail", {}),
            avg_clip_detail=payload.get("avg_clip_detail", {}),
            reasons=payload.get("reasons", {}),
            generated_at=payload["generated_at"],
        )

    def summary_text(self) -> str:
        def fmt(name: str, value: Optional[float], suffix: str = "") -> str:
            if value is None:
                reason = self.reasons.get(name, "not computed")
                return f"  {name:<10} absent ({reason})"
            return f"  {name:<10} {value:.4f}{suffix}"

        lines = [f"metrics for run {self.run_id}:"]
        lines.append(fmt("csfd", self.csfd))
        lines.append(fmt("cssc", self.cssc))
        lines.append(fmt("avg_clip", self.avg_clip))
        return "\n".join(lines)


def load_frames(run_dir: Path | str) -> FrameSet:
    """Accepted keyframes plus scene prompts from a persisted run directory."""
    run_dir = Path(run_dir)
    frames_dir = run_dir / "keyframes"
    if not frames_dir.is_dir():
        raise DreamForgeError(f"no keyframes directory under {run_dir}")
    payloads: list[FramePayload] = []
    for sidecar_path in sorted(frames_dir.glob("frame_*.json")):
        sidecar = read_json(sidecar_path)
        if not sidecar.get("accepted"):
            continue
        image = (frames_dir / sidecar["image_file"]).read_bytes()
        payloads.append(
            FramePayload(
                index=int(sidecar["index"]),
                image=image,
                scene_prompt=sidecar.get("request", {}).get("scene"),
            )
        )
    payloads.sort(key=lambda p: p.index)
    if not payloads:
        raise DreamForgeError(f"run {run_dir} has no accepted keyframes")
    return FrameSet(frames=payloads)


def evaluate_run(
    run_dir: Path | str,
    backends: Backends,
    report_path: Optional[Path | str] = None,
) -> MetricReport:
    """Compute every applicable score; a failing metric becomes an absent
    field with a reason rather than aborting the report."""
    run_dir = Path(run_dir)
    frames = load_frames(run_dir)
    run_id = run_dir.name
    report = MetricReport(run_id=run_id)

    try:
        csfd = csfd_score(frames, backends.embed)
        report.csfd = csfd.value
        report.csfd_detail = {
            "pair_count": csfd.pair_count,
            "frames_used": csfd.frames_used,
            "excluded": csfd.excluded,
            "per_pair": csfd.per_pair,
        }
    except DreamForgeError as exc:
        report.reasons["csfd"] = str(exc)

    try:
        cssc = cssc_score(frames, backends.vision)
        report.cssc = cssc.value
        report.cssc_detail = {
            "labels": {str(k): v for k, v in cssc.labels.items()},
            "modal_category": cssc.modal_category,
            "modal_count": cssc.modal_count,
        }
    except DreamForgeError as exc:
        report.reasons["cssc"] = str(exc)

    try:
        clip = avg_clip_score(frames, backends.embed)
        report.avg_clip = clip.value
        report.avg_clip_detail = {
            "per_frame": {str(k): v for k, v in clip.per_frame.items()},
            "convention": "raw_cosine",
        }
    except DreamForgeError as exc:
        report.reasons["avg_clip"] = str(exc)

    destination = Path(report_path) if report_path else run_dir / "report.json"
    atomic_write_json(destination, report.to_dict())
    return report


def load_report(path: Path | str) -> MetricReport:
    return MetricReport.from_dict(read_json(path))


__all__ = [
    "AvgClipResult",
    "CsfdResult",
    "CsscResult",
    "DEFAULT_STYLE_CATEGORIES",
    "FramePayload",
    "FrameSet",
    "MetricReport",
    "StyleCategory",
    "avg_clip_score",
    "cssc_score",
    "csfd_score",
    "evaluate_run",
    "load_frames",
    "load_report",
    "mean_pairwise_cosine",
    "pairwise_cosines",
]
