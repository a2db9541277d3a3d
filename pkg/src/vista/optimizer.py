"""Gated deep-thinking prompt revision.

The six-step introspection runs only when some consolidated (meta) score falls
at or below the threshold; otherwise zero model calls are made and the
champion prompt is resampled unchanged. Revised prompts are sampled variant by
variant and the champion prompt itself is always carried, verbatim and exactly
once.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass

from ._parallel import run_indexed
from .critics import CritiqueReport
from .errors import MalformedResponse
from .gateway.base import Gateway, ModelRequest, STRUCTURED_BLOCK
from .types import PromptText, UserPrompt

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class OptimizerConfig:
    score_threshold: float = 8.0  # inclusive: a metric at exactly 8 triggers revision
    num_sampled_prompts: int = 5
    num_variants: int = 3

    def __post_init__(self) -> None:
        if not 1 <= self.score_threshold <= 10:
            raise ValueError("score_threshold must be within [1, 10]")
        if self.num_sampled_prompts < 1 or self.num_variants < 1:
            raise ValueError("num_sampled_prompts and num_variants must be >= 1")


@dataclass(frozen=True)
class ModificationList:
    actions: tuple[str, ...]
    reasoning_trace: str
    triggered_metrics: tuple[tuple[str, str, float], ...]
    degraded: bool = False

    def to_dict(self) -> dict:
        return {
            "actions": list(self.actions),
            "reasoning_trace": self.reasoning_trace,
            "triggered_metrics": [list(t) for t in self.triggered_metrics],
            "degraded": self.degraded,
        }


def _actions_validator(parsed: object) -> None:
    if not isinstance(parsed, list):
        raise ValueError("modification actions must be a list")
    if not all(isinstance(item, str) for item in parsed):
        raise ValueError("modification actions must be strings")


def _prompts_validator(parsed: object) -> None:
    if not isinstance(parsed, list) or not parsed:
        raise ValueError("sampled prompts must be a non-empty list")
    if not all(isinstance(item, str) and item.strip() for item in parsed):
        raise ValueError("sampled prompts must be non-empty strings")


def render_feedback(report: CritiqueReport) -> str:
    """Serialize the consolidated critiques for the introspection prompt."""
    lines = []
    for dimension, critique in report.dimensions.items():
        for key, judgment in critique.meta.per_metric.items():
            score = "n/a" if judgment.score is None else f"{judgment.score:g}"
            lines.append(f"[{dimension}/{key}] score {score}: {judgment.justification}")
    return "\n".join(lines)


class PromptOptimizer:
    def __init__(self, gateway: Gateway, config: OptimizerConfig, max_workers: int = 1):
        self.gateway = gateway
        self.config = config
        self.max_workers = max_workers

    def deep_think(self, user: UserPrompt, champion_prompt: PromptText,
                   report: CritiqueReport) -> ModificationList:
        """Introspect over the critique report. Synthetic meta scores gate like
        real ones, keeping the loop progressing under judge failures."""
        triggered = tuple(
            (dimension, key, score)
            for dimension, key, score in report.meta_scores()
            if score is not None and score <= self.config.score_threshold
        )
        if not triggered:
            return ModificationList(actions=(), reasoning_trace="", triggered_metrics=())
        request = ModelRequest(
            template_name="dtpa",
            bindings={
                "input_prompt": user.text,
                "scene_prompt": champion_prompt.text,
                "all_feedback": render_feedback(report),
            },
            expected_format=STRUCTURED_BLOCK,
        )
        try:
            response = self.gateway.complete(request, validator=_actions_validator)
        except MalformedResponse as exc:
            logger.warning("deep thinking degraded, resampling around champion: %s", exc)
            return ModificationList(
                actions=(), reasoning_trace="", triggered_metrics=triggered, degraded=True
            )
        return ModificationList(
            actions=tuple(response.parsed),
            reasoning_trace=response.text,
            triggered_metrics=triggered,
        )

    def sample_prompts(self, user: UserPrompt, champion_prompt: PromptText,
                       mods: ModificationList, scope: str = "") -> list[PromptText]:
        """Sample revised prompts around the champion.

        Each variant is an independent model call proposing
        ``num_sampled_prompts`` revisions; the champion prompt is appended
        unchanged. With no modification actions the set is just the champion.
        ``scope`` namespaces the sampling nonces (the orchestrator passes the
        iteration) so each iteration draws fresh samples.
        """
        carryover = champion_prompt.as_carryover()
        if not mods.actions:
            return [carryover]

        def sample_variant(variant: int) -> list[str]:
            request = ModelRequest(
                template_name="prompt_sampler",
                bindings={
                    "duration_seconds": str(user.duration_seconds),
                    "input_prompt": user.text,
                    "scene_prompt": champion_prompt.text,
                    "suggested_modifications": json.dumps(
                        list(mods.actions), ensure_ascii=False
                    ),
                    "num_scenes": str(self.config.num_sampled_prompts),
                },
                expected_format=STRUCTURED_BLOCK,
                nonce=f"{scope}variant{variant}",
            )
            try:
                response = self.gateway.complete(request, validator=_prompts_validator)
            except MalformedResponse as exc:
                logger.warning("sampling variant %d degraded: %s", variant, exc)
                return []
            return [str(text) for text in response.parsed[: self.config.num_sampled_prompts]]

        batches = run_indexed(
            sample_variant, list(range(self.config.num_variants)), self.max_workers
        )
        revised: list[PromptText] = []
        for batch in batches:
            for text in batch:
                revised.append(
                    PromptText(text=text, lineage="revised", parent_id=champion_prompt.id)
                )
        return revised + [carryover]
