"""Role cards and agents.

A role card is configuration, not logic: a name, the phases the role joins,
and the Job / Task / Requirements prose that become its system prompt. Cards
load from versioned JSON files; a default set ships as package data. Cards
and rendered prompts are immutable values, safe to share across threads; an
agent is used by one conversation at a time.
"""

from __future__ import annotations

import importlib.resources
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union

from .backends.base import ChatBackend, VisionBackend
from .errors import DreamForgeError

DEFAULT_ROUND_LIMIT = 5

ROLE_SECTION_TEMPLATE = """{phase_prompt}

# Role: {name}

## Job
{job}

## Task
{task}

## Requirements
{requirements}"""


@dataclass(frozen=True)
class RoleCard:
    """A role's identity, phase memberships, and prompt parts."""

    name: str
    phases: frozenset[str]
    job: str
    task: str
    requirements: tuple[str, ...] = ()
    round_limit: int = DEFAULT_ROUND_LIMIT

    def __post_init__(self):
        if not self.name:
            raise ValueError("role card needs a nonempty name")
        if not self.phases:
            raise ValueError(f"role card {self.name!r} needs at least one phase")
        if self.round_limit < 1:
            raise ValueError(f"role card {self.name!r}: round_limit must be >= 1")
        object.__setattr__(self, "phases", frozenset(self.phases))
        object.__setattr__(self, "requirements", tuple(self.requirements))

    @classmethod
    def from_dict(cls, payload: dict) -> "RoleCard":
        return cls(
            name=payload["name"],
            phases=frozenset(payload["phases"]),
            job=payload["job"],
            task=payload["task"],
            requirements=tuple(payload.get("requirements", ())),
            round_limit=int(payload.get("round_limit", DEFAULT_ROUND_LIMIT)),
        )

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "phases": sorted(self.phases),
            "job": self.job,
            "task": self.task,
            "requirements": list(self.requirements),
            "round_limit": self.round_limit,
        }


def render_system_prompt(card: RoleCard, phase_prompt: str) -> str:
    """Render the card into its system prompt. Pure: same inputs, same bytes.

    The prompt is the phase prompt followed by the Job, Task, and every
    Requirement verbatim under fixed section headers.
    """
    requirements = "\n".join(f"- {req}" for req in card.requirements)
    return ROLE_SECTION_TEMPLATE.format(
        phase_prompt=phase_prompt,
        name=card.name,
        job=card.job,
        task=card.task,
        requirements=requirements,
    )


@dataclass
class Agent:
    """A role card bound to a chat backend via its rendered system prompt."""

    card: RoleCard
    backend: ChatBackend
    system_prompt: str

    def chat(self, messages: Sequence[dict]) -> str:
        """Send the conversation so far; the system prompt always goes first."""
        return self.backend.complete(
            [{"role": "system", "content": self.system_prompt}, *messages]
        )


@dataclass
class VisionAgent:
    """Like Agent, but over a vision backend: (image + text) -> text."""

    card: RoleCard
    backend: VisionBackend
    system_prompt: str

    def describe(self, image: bytes, prompt: str) -> str:
        return self.backend.describe(image, prompt, system=self.system_prompt)


def make_agent(
    card: RoleCard,
    backend: Union[ChatBackend, VisionBackend],
    phase_prompt: str,
) -> Union[Agent, VisionAgent]:
    """Bind a card to a backend after a liveness probe.

    Raises BackendUnavailableError when the probe fails; no agent exists that
    could receive a message before its system prompt.
    """
    backend.ping()
    system_prompt = render_system_prompt(card, phase_prompt)
    if isinstance(backend, VisionBackend):
        return VisionAgent(card=card, backend=backend, system_prompt=system_prompt)
    return Agent(card=card, backend=backend, system_prompt=system_prompt)


def load_role_card(path: Path | str) -> RoleCard:
    with open(path, "r", encoding="utf-8") as handle:
        payload = json.load(handle)
    try:
        return RoleCard.from_dict(payload)
    except (KeyError, TypeError, ValueError) as exc:
        raise DreamForgeError(f"bad role card {path}: {exc}") from exc


def load_role_cards(directory: Path | str) -> dict[str, RoleCard]:
    """Load every ``*.json`` card in a directory, keyed by role name."""
    cards: dict[str, RoleCard] = {}
    for path in sorted(Path(directory).glob("*.json")):
        card = load_role_card(path)
        if card.name in cards:
            raise DreamForgeError(f"duplicate role card name {card.name!r} in {directory}")
        cards[card.name] = card
    return cards


def default_cards(extra_dir: Optional[Path | str] = None) -> dict[str, RoleCard]:
    """The cards shipped as package data, optionally overlaid by a user directory."""
    cards: dict[str, RoleCard] = {}
    package_cards = importlib.resources.files("dreamforge").joinpath("cards")
    for resource in sorted(package_cards.iterdir(), key=lambda r: r.name):
        if resource.name.endswith(".json"):
            card = RoleCard.from_dict(json.loads(resource.read_text(encoding="utf-8")))
            cards[card.name] = card
    if extra_dir is not None:
        cards.update(load_role_cards(extra_dir))
    return cards
