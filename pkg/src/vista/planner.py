"""Structured video prompt planning.

Parses the user prompt into timed multi-scene prompt candidates (one model
call per candidate sample) under configurable planning constraints, and always
appends the residual entry carrying the raw user text untouched. Candidates
that fail validation are dropped with a warning, never silently repaired.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass

from ._parallel import run_indexed
from .errors import MalformedResponse
from .gateway.base import Gateway, ModelRequest, STRUCTURED_BLOCK
from .templates import defaults
from .types import PromptText, Scene, ScenePlan, SCENE_TEXT_SLOTS, UserPrompt

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PlannerConfig:
    """``num_planned_prompts`` is the number of distinct planned candidates;
    each is sampled ``num_variants`` times as an independent model call, so the
    emitted set has num_planned_prompts * num_variants + 1 entries (the
    residual is always included)."""

    num_planned_prompts: int = 5
    num_variants: int = 3
    duration_tolerance_seconds: float = 0.5
    realism: bool = True
    relevancy: bool = True
    ambient_sound_encouraged: bool = True
    transition_discouraged: bool = True

    def __post_init__(self) -> None:
        if self.num_planned_prompts < 0:
            raise ValueError("num_planned_prompts must be >= 0")
        if self.num_variants < 1:
            raise ValueError("num_variants must be >= 1")
        if self.duration_tolerance_seconds < 0:
            raise ValueError("duration_tolerance_seconds must be >= 0")

    def enabled_constraint_flags(self) -> tuple[str, ...]:
        flags = []
        for flag in (
            "realism",
            "relevancy",
            "ambient_sound_encouraged",
            "transition_discouraged",
        ):
            if getattr(self, flag):
                flags.append(flag)
        return tuple(flags)


@dataclass(frozen=True)
class ValidationResult:
    ok: bool
    reasons: tuple[str, ...] = ()


@dataclass(frozen=True)
class PlanEntry:
    prompt: PromptText
    plan: ScenePlan


@dataclass(frozen=True)
class PlanResult:
    entries: tuple[PlanEntry, ...]
    warnings: tuple[str, ...] = ()


def validate_scene_plan(plan: ScenePlan, user: UserPrompt, config: PlannerConfig) -> ValidationResult:
    """Accept iff at least one scene exists, every scene carries all nine
    property slots, and the durations fit the requested length (within
    tolerance). Residual plans are always valid."""
    if plan.source == "residual":
        return ValidationResult(True)
    reasons: list[str] = []
    if not plan.scenes:
        reasons.append("no_scenes")
    for i, scene in enumerate(plan.scenes):
        for slot in scene.missing_slots():
            reasons.append(f"missing_property:{slot}@scene{i}")
    if plan.total_duration > user.duration_seconds + config.duration_tolerance_seconds:
        reasons.append("duration_overflow")
    return ValidationResult(not reasons, tuple(reasons))


def render_prompt_text(plan: ScenePlan) -> str:
    """Canonical rendering of a plan as the prompt handed to the video
    backend: one narrative paragraph per scene, then the structured block.
    Kept stable; downstream ids derive from this text."""
    paragraphs = []
    for i, scene in enumerate(plan.scenes, start=1):
        parts = [f"Scene {i} ({scene.duration_seconds:g} seconds): {scene.scene_type or 'scene'}."]
        labels = {
            "characters": "Characters",
            "actions": "Actions",
            "dialogues": "Dialogues",
            "visual_environment": "Visual environment",
            "camera": "Camera",
            "sounds": "Sounds",
            "moods": "Moods",
        }
        for slot, label in labels.items():
            value = getattr(scene, slot)
            if value:
                parts.append(f"{label}: {value}.")
        paragraphs.append(" ".join(parts))
    block = json.dumps([s.to_dict() for s in plan.scenes], ensure_ascii=False)
    return "\n\n".join(paragraphs) + "\n\n" + block


def _parse_scene_dicts(parsed: object) -> list[dict]:
    if not isinstance(parsed, list) or not parsed:
        raise ValueError("planner output must be a non-empty list of scenes")
    if not all(isinstance(item, dict) for item in parsed):
        raise ValueError("planner output must contain scene objects")
    return parsed


def _scene_from_dict(raw: dict) -> Scene:
    duration = raw.get("duration_seconds")
    if not isinstance(duration, (int, float)) or isinstance(duration, bool) or duration <= 0:
        raise ValueError("invalid_duration")
    unknown = set(raw) - set(SCENE_TEXT_SLOTS) - {"duration_seconds"}
    if unknown:
        raise ValueError(f"unknown_property:{sorted(unknown)[0]}")
    slots = {slot: raw.get(slot) for slot in SCENE_TEXT_SLOTS}
    for slot, value in slots.items():
        if value is not None and not isinstance(value, str):
            raise ValueError(f"non_text_property:{slot}")
    return Scene(duration_seconds=float(duration), **slots)


class PromptPlanner:
    def __init__(self, gateway: Gateway, config: PlannerConfig, max_workers: int = 1):
        self.gateway = gateway
        self.config = config
        self.max_workers = max_workers

    def _constraints_block(self) -> str:
        return defaults.planning_constraints_block(self.config.enabled_constraint_flags())

    def _plan_request(self, user: UserPrompt, sample_index: int) -> ModelRequest:
        return ModelRequest(
            template_name="planner",
            bindings={
                "video_type": user.video_type,
                "duration_seconds": str(user.duration_seconds),
                "input_prompt": user.text,
                "scene_template": defaults.SCENE_TEMPLATE_JSON,
                "planning_constraints": self._constraints_block(),
            },
            expected_format=STRUCTURED_BLOCK,
            nonce=f"plan{sample_index}",
        )

    def _plan_one(self, user: UserPrompt, residual_id: str, sample_index: int):
        """One planning sample -> (PlanEntry | None, warnings)."""
        warnings: list[str] = []
        try:
            response = self.gateway.complete(
                self._plan_request(user, sample_index), validator=_parse_scene_dicts
            )
        except MalformedResponse as exc:
            warnings.append(f"plan sample {sample_index} dropped: {exc}")
            return None, warnings
        scenes: list[Scene] = []
        try:
            for raw in response.parsed:
                scenes.append(_scene_from_dict(raw))
        except ValueError as exc:
            warnings.append(f"plan sample {sample_index} dropped: {exc}")
            return None, warnings
        plan = ScenePlan(scenes=tuple(scenes), source="planned")
        result = validate_scene_plan(plan, user, self.config)
        if not result.ok:
            warnings.append(
                f"plan sample {sample_index} dropped: invalid({', '.join(result.reasons)})"
            )
            return None, warnings
        prompt = PromptText(
            text=render_prompt_text(plan), lineage="planned", parent_id=residual_id
        )
        return PlanEntry(prompt=prompt, plan=plan), warnings

    def plan_prompts(self, user: UserPrompt) -> PlanResult:
        """Emit the planned entries (model output order, invalid ones dropped)
        plus the residual entry whose text is byte-identical to the user
        prompt."""
        residual_prompt = PromptText(text=user.text, lineage="user", parent_id=None)
        residual = PlanEntry(
            prompt=residual_prompt, plan=ScenePlan(scenes=(), source="residual")
        )
        total = self.config.num_planned_prompts * self.config.num_variants
        outcomes = run_indexed(
            lambda i: self._plan_one(user, residual_prompt.id, i),
            list(range(total)),
            self.max_workers,
        )
        entries: list[PlanEntry] = []
        warnings: list[str] = []
        for entry, entry_warnings in outcomes:
            warnings.extend(entry_warnings)
            if entry is not None:
                entries.append(entry)
        if total and not entries:
            warnings.append("plan rejected: every planned candidate failed; continuing residual-only")
            logger.warning("all %d planned candidates failed validation", total)
        for message in warnings:
            logger.warning("%s", message)
        entries.append(residual)
        return PlanResult(entries=tuple(entries), warnings=tuple(warnings))
