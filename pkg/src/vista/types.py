"""Core domain types shared by every stage of the pipeline.

All types here are immutable value objects, safe to share across concurrent
tasks. Videos are opaque byte blobs addressed by content hash; the engine
never decodes frames or audio.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, replace
from typing import Mapping, Optional

__all__ = [
    "UserPrompt",
    "Scene",
    "ScenePlan",
    "PromptText",
    "VideoHandle",
    "Candidate",
    "Criterion",
    "MetricSuite",
    "SCENE_TEXT_SLOTS",
    "LINEAGES",
    "new_run_id",
    "short_hash",
]


def short_hash(*parts: object) -> str:
    """16-hex-char digest of the given parts; stable across platforms."""
    joined = "\x00".join(str(p) for p in parts)
    return hashlib.sha256(joined.encode("utf-8")).hexdigest()[:16]


@dataclass(frozen=True)
class UserPrompt:
    """The user's video request: free text, a target duration, and a video type."""

    text: str
    duration_seconds: int
    video_type: str = "real"

    def __post_init__(self) -> None:
        if not self.text.strip():
            raise ValueError("user prompt text must be non-empty")
        if self.duration_seconds <= 0:
            raise ValueError("duration_seconds must be positive")

    def to_dict(self) -> dict:
        return {
            "text": self.text,
            "duration_seconds": self.duration_seconds,
            "video_type": self.video_type,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "UserPrompt":
        return cls(
            text=data["text"],
            duration_seconds=data["duration_seconds"],
            video_type=data.get("video_type", "real"),
        )


# The eight text slots of a scene; duration_seconds is the ninth property.
SCENE_TEXT_SLOTS = (
    "scene_type",
    "characters",
    "actions",
    "dialogues",
    "visual_environment",
    "camera",
    "sounds",
    "moods",
)


@dataclass(frozen=True)
class Scene:
    """One timed scene with nine property slots.

    A text slot set to ``None`` means the slot was absent from the model
    output (a validation failure); an empty string means the slot is present
    but deliberately empty (e.g. a dialogue-free scene).
    """

    duration_seconds: float
    scene_type: Optional[str] = ""
    characters: Optional[str] = ""
    actions: Optional[str] = ""
    dialogues: Optional[str] = ""
    visual_environment: Optional[str] = ""
    camera: Optional[str] = ""
    sounds: Optional[str] = ""
    moods: Optional[str] = ""

    def __post_init__(self) -> None:
        if not isinstance(self.duration_seconds, (int, float)) or isinstance(
            self.duration_seconds, bool
        ):
            raise ValueError("scene duration_seconds must be a number")
        if self.duration_seconds <= 0:
            raise ValueError("scene duration_seconds must be positive")

    def missing_slots(self) -> tuple[str, ...]:
        return tuple(s for s in SCENE_TEXT_SLOTS if getattr(self, s) is None)

    def to_dict(self) -> dict:
        out: dict = {"duration_seconds": self.duration_seconds}
        for slot in SCENE_TEXT_SLOTS:
            value = getattr(self, slot)
            if value is not None:
                out[slot] = value
        return out

    @classmethod
    def from_dict(cls, data: Mapping) -> "Scene":
        return cls(
            duration_seconds=data["duration_seconds"],
            **{slot: data.get(slot) for slot in SCENE_TEXT_SLOTS},
        )


PLAN_SOURCES = ("planned", "residual")


@dataclass(frozen=True)
class ScenePlan:
    """An ordered, timed sequence of scenes. Residual plans have no scenes:
    they stand for the raw user text passed through untouched."""

    scenes: tuple[Scene, ...]
    source: str = "planned"

    def __post_init__(self) -> None:
        if self.source not in PLAN_SOURCES:
            raise ValueError(f"plan source must be one of {PLAN_SOURCES}")
        object.__setattr__(self, "scenes", tuple(self.scenes))

    @property
    def total_duration(self) -> float:
        return sum(s.duration_seconds for s in self.scenes)

    def to_dict(self) -> dict:
        return {"source": self.source, "scenes": [s.to_dict() for s in self.scenes]}

    @classmethod
    def from_dict(cls, data: Mapping) -> "ScenePlan":
        return cls(
            scenes=tuple(Scene.from_dict(s) for s in data["scenes"]),
            source=data["source"],
        )


LINEAGES = ("user", "planned", "revised", "champion-carryover")


@dataclass(frozen=True)
class PromptText:
    """A video prompt with its lineage back to the original user text.

    The identifier derives from (parent_id, text) only, so re-tagging the
    champion prompt as a carryover keeps its id stable and video handles that
    reference it stay valid.
    """

    text: str
    lineage: str
    parent_id: Optional[str] = None
    id: str = field(init=False)

    def __post_init__(self) -> None:
        if self.lineage not in LINEAGES:
            raise ValueError(f"lineage must be one of {LINEAGES}")
        if not self.text:
            raise ValueError("prompt text must be non-empty")
        object.__setattr__(self, "id", short_hash(self.parent_id or "", self.text))

    def as_carryover(self) -> "PromptText":
        return replace(self, lineage="champion-carryover")

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "text": self.text,
            "lineage": self.lineage,
            "parent_id": self.parent_id,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "PromptText":
        return cls(
            text=data["text"],
            lineage=data["lineage"],
            parent_id=data.get("parent_id"),
        )


@dataclass(frozen=True)
class VideoHandle:
    """Locator for stored video bytes; ``id`` is the content hash of the blob,
    ``uri`` is relative to the run directory for blobs the engine stored."""

    id: str
    uri: str
    prompt_id: str
    duration_seconds: float
    backend_tag: str = ""

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "uri": self.uri,
            "prompt_id": self.prompt_id,
            "duration_seconds": self.duration_seconds,
            "backend_tag": self.backend_tag,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "VideoHandle":
        return cls(
            id=data["id"],
            uri=data["uri"],
            prompt_id=data["prompt_id"],
            duration_seconds=data["duration_seconds"],
            backend_tag=data.get("backend_tag", ""),
        )


@dataclass(frozen=True)
class Candidate:
    """A video paired with the prompt that generated it."""

    video: VideoHandle
    prompt: PromptText

    def __post_init__(self) -> None:
        if self.video.prompt_id != self.prompt.id:
            raise ValueError(
                f"video prompt_id {self.video.prompt_id} does not match prompt id {self.prompt.id}"
            )

    def to_dict(self) -> dict:
        return {"video": self.video.to_dict(), "prompt": self.prompt.to_dict()}

    @classmethod
    def from_dict(cls, data: Mapping) -> "Candidate":
        return cls(
            video=VideoHandle.from_dict(data["video"]),
            prompt=PromptText.from_dict(data["prompt"]),
        )


@dataclass(frozen=True)
class Criterion:
    """One named evaluation criterion; penalized criteria attract the
    violation deduction during pairwise selection."""

    name: str
    definition: str = ""
    penalized: bool = True

    def to_dict(self) -> dict:
        return {"name": self.name, "definition": self.definition, "penalized": self.penalized}

    @classmethod
    def from_dict(cls, data: Mapping) -> "Criterion":
        return cls(
            name=data["name"],
            definition=data.get("definition", ""),
            penalized=data.get("penalized", True),
        )


@dataclass(frozen=True)
class MetricSuite:
    """An ordered set of criteria used for selection or evaluation."""

    name: str
    criteria: tuple[Criterion, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "criteria", tuple(self.criteria))
        if not self.criteria:
            raise ValueError("a metric suite needs at least one criterion")
        names = [c.name for c in self.criteria]
        if len(set(names)) != len(names):
            raise ValueError("criterion names must be unique within a suite")

    @property
    def k(self) -> int:
        return len(self.criteria)

    def criterion_names(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.criteria)

    def penalized_names(self) -> frozenset[str]:
        return frozenset(c.name for c in self.criteria if c.penalized)

    def fingerprint(self) -> str:
        return short_hash(self.name, *(c.to_dict() for c in self.criteria))

    def to_dict(self) -> dict:
        return {"name": self.name, "criteria": [c.to_dict() for c in self.criteria]}

    @classmethod
    def from_dict(cls, data: Mapping) -> "MetricSuite":
        return cls(
            name=data["name"],
            criteria=tuple(Criterion.from_dict(c) for c in data["criteria"]),
        )


def new_run_id(seed: int, user_prompt: UserPrompt) -> str:
    """Deterministic run identifier: equal (seed, prompt text) share an id."""
    return short_hash(seed, user_prompt.text)
