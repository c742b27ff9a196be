"""One pipeline phase: a bounded two-agent conversation.

The instructor opens with a seed instruction; the assistant answers; the
instructor reacts with the next instruction; and so on, strictly
alternating. The phase ends at the first assistant response that carries a
nonempty ``<INFO>`` summary, or — when the round budget runs out first —
after one deterministic forced-summary turn that tells the assistant to emit
one. A single conversation is strictly sequential; independent phase
executions share nothing but the append-only memory store.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

from .errors import BackendError, PhaseFailedError
from .roles import Agent
from .storage import atomic_write_json, read_json, utc_now_iso

INFO_MARKER = "<INFO>"

FORCED_SUMMARY_INSTRUCTION = (
    "The discussion budget for this phase is exhausted. Terminate now: reply "
    f"with the single word {INFO_MARKER} followed by the best final conclusion "
    "we can commit to."
)


def extract_info_summary(response: str) -> Optional[str]:
    """Text after the first ``<INFO>`` marker, trimmed; None when absent.

    Only the first marker splits; later markers are payload. A marker with an
    empty payload counts as no summary.
    """
    index = response.find(INFO_MARKER)
    if index < 0:
        return None
    payload = response[index + len(INFO_MARKER):].strip()
    return payload or None


@dataclass
class PhaseSpec:
    """Identity and budget of one phase, plus the shared phase prompt."""

    id: str
    phase_prompt: str
    instructor_role: str
    assistant_role: str
    max_rounds: int = 5
    inputs: tuple[str, ...] = ()

    def __post_init__(self):
        if self.instructor_role == self.assistant_role:
            raise ValueError(f"phase {self.id!r}: instructor and assistant must differ")
        if self.max_rounds < 1:
            raise ValueError(f"phase {self.id!r}: max_rounds must be >= 1")


@dataclass
class Transcript:
    """The alternating exchange record: ordered (instruction, response) turns."""

    turns: list[tuple[str, str]] = field(default_factory=list)
    terminated_by_info: bool = False
    rounds_used: int = 0

    def __post_init__(self):
        self.turns = [tuple(t) for t in self.turns]
        if self.rounds_used != len(self.turns):
            raise ValueError("rounds_used must equal the number of turns")
        if self.terminated_by_info and self.turns:
            if INFO_MARKER not in self.turns[-1][1]:
                raise ValueError("terminated_by_info requires the marker in the final response")

    def to_dict(self) -> dict:
        return {
            "turns": [[i, a] for i, a in self.turns],
            "terminated_by_info": self.terminated_by_info,
            "rounds_used": self.rounds_used,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "Transcript":
        return cls(
            turns=[tuple(t) for t in payload["turns"]],
            terminated_by_info=payload["terminated_by_info"],
            rounds_used=payload["rounds_used"],
        )


@dataclass
class PhaseOutput:
    """A finished phase: the extracted summary plus its transcript."""

    phase_id: str
    summary: str
    transcript: Transcript
    produced_at: str = field(default_factory=utc_now_iso)

    def to_dict(self) -> dict:
        return {
            "phase_id": self.phase_id,
            "summary": self.summary,
            "produced_at": self.produced_at,
            "transcript": self.transcript.to_dict(),
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "PhaseOutput":
        return cls(
            phase_id=payload["phase_id"],
            summary=payload["summary"],
            transcript=Transcript.from_dict(payload["transcript"]),
            produced_at=payload["produced_at"],
        )

    def save(self, path: Path) -> None:
        atomic_write_json(path, self.to_dict())

    @classmethod
    def load(cls, path: Path) -> "PhaseOutput":
        return cls.from_dict(read_json(path))


def _assistant_view(turns: Sequence[tuple[str, str]], instruction: str) -> list[dict]:
    messages: list[dict] = []
    for past_instruction, past_response in turns:
        messages.append({"role": "user", "content": past_instruction})
        messages.append({"role": "assistant", "content": past_response})
    messages.append({"role": "user", "content": instruction})
    return messages


def _instructor_view(turns: Sequence[tuple[str, str]]) -> list[dict]:
    # The instructor "speaks" the instructions, so roles flip.
    messages: list[dict] = []
    for past_instruction, past_response in turns:
        messages.append({"role": "assistant", "content": past_instruction})
        messages.append({"role": "user", "content": past_response})
    return messages


def run_phase(
    spec: PhaseSpec,
    instructor: Agent,
    assistant: Agent,
    seed_instruction: str,
) -> PhaseOutput:
    """Run one phase to completion.

    The effective round budget is the minimum of the phase's max_rounds and
    both roles' round limits. Termination requires a nonempty ``<INFO>``
    payload (a bare marker does not end the phase). On budget exhaustion the
    forced-summary turn fires exactly once, so rounds_used never exceeds the
    budget + 1. Backend failures raise PhaseFailedError carrying the partial
    transcript.
    """
    if not seed_instruction:
        raise ValueError("seed_instruction must be nonempty")
    for agent in (instructor, assistant):
        if not agent.system_prompt.startswith(spec.phase_prompt):
            raise ValueError(
                f"phase {spec.id!r}: agent {agent.card.name!r} was not constructed "
                "with this phase's prompt"
            )

    budget = min(spec.max_rounds, instructor.card.round_limit, assistant.card.round_limit)
    turns: list[tuple[str, str]] = []
    summary: Optional[str] = None
    instruction = seed_instruction

    def _partial() -> Transcript:
        return Transcript(turns=list(turns), terminated_by_info=False, rounds_used=len(turns))

    try:
        for round_index in range(1, budget + 1):
            response = assistant.chat(_assistant_view(turns, instruction))
            turns.append((instruction, response))
            summary = extract_info_summary(response)
            if summary is not None:
                break
            if round_index == budget:
                break
            instruction = instructor.chat(_instructor_view(turns))
        if summary is None:
            response = assistant.chat(_assistant_view(turns, FORCED_SUMMARY_INSTRUCTION))
            turns.append((FORCED_SUMMARY_INSTRUCTION, response))
            summary = extract_info_summary(response)
    except BackendError as exc:
        raise PhaseFailedError(
            f"phase {spec.id!r}: backend failed after retries: {exc}",
            transcript=_partial(),
        ) from exc

    final_response = turns[-1][1]
    terminated_by_info = summary is not None
    if summary is None:
        # Forced turn came back without a usable marker; keep the phase total
        # by taking the whole response as the best-effort conclusion.
        summary = final_response.strip()
    if not summary:
        raise PhaseFailedError(
            f"phase {spec.id!r}: no usable conclusion after the forced-summary turn",
            transcript=_partial(),
        )

    transcript = Transcript(
        turns=turns,
        terminated_by_info=terminated_by_info,
        rounds_used=len(turns),
    )
    return PhaseOutput(phase_id=spec.id, summary=summary, transcript=transcript)
