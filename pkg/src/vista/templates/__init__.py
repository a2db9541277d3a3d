"""Prompt template registry.

Each template lives in ``assets/<name>.txt`` with placeholders written
``{name}``. Rendering substitutes bound values verbatim; configurable blocks
(criteria lists, metric skeletons, planning constraints) have registry-level
default bindings so callers only need to bind the request-specific fields.
"""

from __future__ import annotations

import re
from functools import lru_cache
from pathlib import Path
from typing import Mapping

from ..errors import UnboundPlaceholder, UnknownTemplate
from . import defaults

_ASSET_DIR = Path(__file__).resolve().parent / "assets"

# Placeholders are lowercase snake_case tokens in single braces; literal JSON
# braces in the prompt bodies never match this.
_PLACEHOLDER_RE = re.compile(r"\{([a-z][a-z0-9_]*)\}")

TEMPLATE_NAMES = (
    "planner",
    "probing",
    "pairwise_select",
    "visual_normal_judge",
    "visual_adversarial_judge",
    "audio_normal_judge",
    "audio_adversarial_judge",
    "context_normal_judge",
    "context_adversarial_judge",
    "meta_judge",
    "dtpa",
    "prompt_sampler",
    "evaluator",
    "simple_compare",
)


@lru_cache(maxsize=None)
def load_template(name: str) -> str:
    path = _ASSET_DIR / f"{name}.txt"
    if name not in TEMPLATE_NAMES or not path.is_file():
        raise UnknownTemplate(name)
    return path.read_text(encoding="utf-8")


def placeholders(name: str) -> frozenset[str]:
    return frozenset(_PLACEHOLDER_RE.findall(load_template(name)))


@lru_cache(maxsize=None)
def default_bindings(name: str) -> dict[str, str]:
    """Registry defaults for the configurable blocks of each template."""
    if name == "planner":
        return {
            "scene_template": defaults.SCENE_TEMPLATE_JSON,
            "planning_constraints": defaults.planning_constraints_block(),
        }
    if name == "probing":
        aspects = defaults.DEFAULT_PROBING_ASPECTS
        return {
            "probing_aspects": defaults.probing_aspects_block(aspects),
            "probing_aspect_keys": ", ".join(key for key, _, _ in aspects),
        }
    if name == "pairwise_select":
        criteria = defaults.DEFAULT_SELECTION_CRITERIA
        return {
            "criteria_block": defaults.selection_criteria_block(criteria),
            "criteria_keys": ", ".join(key for key, _, _ in criteria),
            "penalty_value": "10",
            "comparable_epsilon": "0.05",
        }
    if name.endswith("_judge") and name != "meta_judge":
        dimension, stance, _ = name.split("_", 2)
        metrics = defaults.JUDGE_METRIC_DEFINITIONS[(dimension, stance)]
        return {"metrics_block": defaults.metrics_block(metrics)}
    if name == "evaluator":
        criteria = defaults.DEFAULT_EVALUATION_CRITERIA
        keys = [key for key, _, _ in criteria]
        return {
            "criteria_block": defaults.evaluation_criteria_block(criteria),
            "criteria_keys": ", ".join(keys),
            "output_block": defaults.evaluation_output_block(keys),
        }
    return {}


def render_template(name: str, bindings: Mapping[str, object]) -> str:
    """Substitute every placeholder of the named template.

    Raises UnboundPlaceholder for any placeholder with neither a caller
    binding nor a registry default. Extra bindings are ignored. Substituted
    values are not re-scanned, so no placeholder markers remain afterwards.
    """
    text = load_template(name)
    merged = dict(default_bindings(name))
    merged.update({key: str(value) for key, value in bindings.items()})
    needed = set(_PLACEHOLDER_RE.findall(text))
    missing = sorted(needed - merged.keys())
    if missing:
        raise UnboundPlaceholder(missing[0], template=name)
    return _PLACEHOLDER_RE.sub(lambda m: merged[m.group(1)], text)
