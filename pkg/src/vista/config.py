"""Run configuration: defaults, file loading, and round-trip serialization.

The config file is one document with sections mirroring the module configs
(run, planner, selector, critics, optimizer, evaluation, gateway). Unknown
keys are hard errors: a silent typo in a penalty or threshold would corrupt an
experiment. The resolved document is byte-frozen into the run manifest at
start, so later edits never affect a resumed run.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional

import yaml

from .critics import CriticsConfig, DIMENSIONS, MetricSpec, default_dimension_metrics
from .errors import ConfigError
from .evaluation import EvalConfig
from .optimizer import OptimizerConfig
from .planner import PlannerConfig
from .selector import DEFAULT_SELECTION_SUITE, SelectorConfig
from .types import Criterion, MetricSuite


@dataclass(frozen=True)
class GatewaySettings:
    max_parse_retries: int = 2
    max_attempts: int = 3
    inflight_limit: int = 8
    retry_wait: float = 0.0


@dataclass(frozen=True)
class RunConfig:
    """Everything a run needs besides the user prompt and the backend.

    ``iterations`` counts self-improvement iterations after initialization;
    ``early_stop_m`` (optional) halts once the champion is unchanged for that
    many consecutive self-improvement iterations. Light mode samples one video
    per iteration and replaces tournament selection with a single
    bidirectional comparison.
    """

    iterations: int = 4
    early_stop_m: Optional[int] = None
    videos_per_prompt: int = 2
    light_mode: bool = False
    seed: int = 0
    max_workers: int = 4
    planner: PlannerConfig = field(default_factory=PlannerConfig)
    selector: SelectorConfig = field(default_factory=SelectorConfig)
    critics: CriticsConfig = field(default_factory=CriticsConfig)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)

    def __post_init__(self) -> None:
        if self.iterations < 1:
            raise ConfigError("run.iterations must be >= 1")
        if self.early_stop_m is not None and self.early_stop_m < 1:
            raise ConfigError("run.early_stop must be >= 1 (or null to disable)")
        if self.videos_per_prompt < 1:
            raise ConfigError("run.videos_per_prompt must be >= 1")
        if self.max_workers < 1:
            raise ConfigError("run.max_workers must be >= 1")


def _require_keys(section: Mapping, allowed: set[str], path: str) -> None:
    unknown = set(section) - allowed
    if unknown:
        raise ConfigError(f"unknown config key {path}.{sorted(unknown)[0]!r}")


def _section(data: Mapping, name: str) -> dict:
    value = data.get(name) or {}
    if not isinstance(value, Mapping):
        raise ConfigError(f"config section {name!r} must be a mapping")
    return dict(value)


def _planner_from(section: Mapping) -> PlannerConfig:
    _require_keys(
        section,
        {"num_planned_prompts", "num_variants", "duration_tolerance_seconds", "constraints"},
        "planner",
    )
    constraints = section.get("constraints") or {}
    _require_keys(
        constraints,
        {"realism", "relevancy", "ambient_sound_encouraged", "transition_discouraged"},
        "planner.constraints",
    )
    base = PlannerConfig()
    try:
        return PlannerConfig(
            num_planned_prompts=int(section.get("num_planned_prompts", base.num_planned_prompts)),
            num_variants=int(section.get("num_variants", base.num_variants)),
            duration_tolerance_seconds=float(
                section.get("duration_tolerance_seconds", base.duration_tolerance_seconds)
            ),
            realism=bool(constraints.get("realism", base.realism)),
            relevancy=bool(constraints.get("relevancy", base.relevancy)),
            ambient_sound_encouraged=bool(
                constraints.get("ambient_sound_encouraged", base.ambient_sound_encouraged)
            ),
            transition_discouraged=bool(
                constraints.get("transition_discouraged", base.transition_discouraged)
            ),
        )
    except ValueError as exc:
        raise ConfigError(f"planner: {exc}") from exc


def _selector_from(section: Mapping) -> SelectorConfig:
    _require_keys(
        section,
        {"penalty_lambda", "comparable_epsilon", "criteria", "probing_aspects"},
        "selector",
    )
    suite = DEFAULT_SELECTION_SUITE
    raw_criteria = section.get("criteria")
    if raw_criteria is not None:
        criteria = []
        for i, item in enumerate(raw_criteria):
            if not isinstance(item, Mapping):
                raise ConfigError(f"selector.criteria[{i}] must be a mapping")
            _require_keys(item, {"key", "definition", "penalized"}, f"selector.criteria[{i}]")
            if "key" not in item:
                raise ConfigError(f"selector.criteria[{i}].key is required")
            criteria.append(
                Criterion(
                    name=str(item["key"]),
                    definition=str(item.get("definition", "")),
                    penalized=bool(item.get("penalized", True)),
                )
            )
        try:
            if tuple(criteria) == DEFAULT_SELECTION_SUITE.criteria:
                suite = DEFAULT_SELECTION_SUITE
            else:
                suite = MetricSuite(name="selection-custom", criteria=tuple(criteria))
        except ValueError as exc:
            raise ConfigError(f"selector.criteria: {exc}") from exc
    aspects = SelectorConfig().probing_aspects
    raw_aspects = section.get("probing_aspects")
    if raw_aspects is not None:
        parsed = []
        for i, item in enumerate(raw_aspects):
            if not isinstance(item, Mapping):
                raise ConfigError(f"selector.probing_aspects[{i}] must be a mapping")
            _require_keys(item, {"key", "title", "question"}, f"selector.probing_aspects[{i}]")
            if "key" not in item:
                raise ConfigError(f"selector.probing_aspects[{i}].key is required")
            key = str(item["key"])
            parsed.append(
                (key, str(item.get("title", key)), str(item.get("question", "")))
            )
        if not parsed:
            raise ConfigError("selector.probing_aspects must be non-empty when given")
        aspects = tuple(parsed)
    try:
        return SelectorConfig(
            metric_suite=suite,
            penalty_lambda=float(section.get("penalty_lambda", 10.0)),
            comparable_epsilon=float(section.get("comparable_epsilon", 0.05)),
            probing_aspects=aspects,
        )
    except ValueError as exc:
        raise ConfigError(f"selector: {exc}") from exc


def _critics_from(section: Mapping) -> CriticsConfig:
    _require_keys(section, {"dimensions"}, "critics")
    raw = section.get("dimensions")
    if raw is None:
        return CriticsConfig()
    base = default_dimension_metrics()
    dimensions: dict[str, tuple[MetricSpec, ...]] = {}
    if isinstance(raw, Mapping):
        for dimension, metrics in raw.items():
            if metrics is None and dimension in base:
                dimensions[str(dimension)] = base[dimension]
                continue
            specs = []
            for i, item in enumerate(metrics or ()):
                if not isinstance(item, Mapping):
                    raise ConfigError(f"critics.dimensions.{dimension}[{i}] must be a mapping")
                _require_keys(item, {"key", "definition"}, f"critics.dimensions.{dimension}[{i}]")
                if "key" not in item:
                    raise ConfigError(f"critics.dimensions.{dimension}[{i}].key is required")
                specs.append(MetricSpec(str(item["key"]), str(item.get("definition", ""))))
            dimensions[str(dimension)] = tuple(specs)
    else:
        for dimension in raw:
            if dimension not in base:
                raise ConfigError(
                    f"critics.dimensions: {dimension!r} is not one of {sorted(DIMENSIONS)}"
                )
            dimensions[str(dimension)] = base[dimension]
    try:
        return CriticsConfig(dimensions=dimensions)
    except ValueError as exc:
        raise ConfigError(f"critics: {exc}") from exc


def _optimizer_from(section: Mapping) -> OptimizerConfig:
    _require_keys(
        section, {"score_threshold", "num_sampled_prompts", "num_variants"}, "optimizer"
    )
    base = OptimizerConfig()
    try:
        return OptimizerConfig(
            score_threshold=float(section.get("score_threshold", base.score_threshold)),
            num_sampled_prompts=int(
                section.get("num_sampled_prompts", base.num_sampled_prompts)
            ),
            num_variants=int(section.get("num_variants", base.num_variants)),
        )
    except ValueError as exc:
        raise ConfigError(f"optimizer: {exc}") from exc


def _evaluation_from(section: Mapping) -> EvalConfig:
    _require_keys(section, {"criteria", "alignment_criterion", "min_wins"}, "evaluation")
    base = EvalConfig()
    criteria = section.get("criteria")
    try:
        return EvalConfig(
            criteria=tuple(str(c) for c in criteria) if criteria is not None else base.criteria,
            alignment_criterion=str(
                section.get("alignment_criterion", base.alignment_criterion)
            ),
            min_wins=int(section.get("min_wins", base.min_wins)),
        )
    except ValueError as exc:
        raise ConfigError(f"evaluation: {exc}") from exc


def _gateway_from(section: Mapping) -> GatewaySettings:
    _require_keys(
        section, {"max_parse_retries", "max_attempts", "inflight_limit", "retry_wait"}, "gateway"
    )
    base = GatewaySettings()
    return GatewaySettings(
        max_parse_retries=int(section.get("max_parse_retries", base.max_parse_retries)),
        max_attempts=int(section.get("max_attempts", base.max_attempts)),
        inflight_limit=int(section.get("inflight_limit", base.inflight_limit)),
        retry_wait=float(section.get("retry_wait", base.retry_wait)),
    )


TOP_LEVEL_SECTIONS = {
    "run", "planner", "selector", "critics", "optimizer", "evaluation", "gateway",
}


def build_configs(document: Mapping | None) -> tuple[RunConfig, GatewaySettings, EvalConfig]:
    """Resolve a config document (already parsed) into typed configs."""
    document = dict(document or {})
    _require_keys(document, TOP_LEVEL_SECTIONS, "config")
    run_section = _section(document, "run")
    _require_keys(
        run_section,
        {"iterations", "early_stop", "videos_per_prompt", "light_mode", "seed", "max_workers"},
        "run",
    )
    base = RunConfig()
    early_stop = run_section.get("early_stop", base.early_stop_m)
    run_config = RunConfig(
        iterations=int(run_section.get("iterations", base.iterations)),
        early_stop_m=None if early_stop is None else int(early_stop),
        videos_per_prompt=int(run_section.get("videos_per_prompt", base.videos_per_prompt)),
        light_mode=bool(run_section.get("light_mode", base.light_mode)),
        seed=int(run_section.get("seed", base.seed)),
        max_workers=int(run_section.get("max_workers", base.max_workers)),
        planner=_planner_from(_section(document, "planner")),
        selector=_selector_from(_section(document, "selector")),
        critics=_critics_from(_section(document, "critics")),
        optimizer=_optimizer_from(_section(document, "optimizer")),
    )
    return run_config, _gateway_from(_section(document, "gateway")), _evaluation_from(
        _section(document, "evaluation")
    )


def load_config_file(path: Path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    text = path.read_text(encoding="utf-8")
    try:
        if path.suffix.lower() == ".json":
            document = json.loads(text)
        else:
            document = yaml.safe_load(text)
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot parse config file {path}: {exc}") from exc
    if document is None:
        return {}
    if not isinstance(document, Mapping):
        raise ConfigError(f"config file {path} must contain a mapping")
    return dict(document)


# --- serialization (manifest freeze / resume) ---------------------------------


def run_config_to_dict(config: RunConfig, gateway: GatewaySettings) -> dict:
    return {
        "run": {
            "iterations": config.iterations,
            "early_stop": config.early_stop_m,
            "videos_per_prompt": config.videos_per_prompt,
            "light_mode": config.light_mode,
            "seed": config.seed,
            "max_workers": config.max_workers,
        },
        "planner": {
            "num_planned_prompts": config.planner.num_planned_prompts,
            "num_variants": config.planner.num_variants,
            "duration_tolerance_seconds": config.planner.duration_tolerance_seconds,
            "constraints": {
                "realism": config.planner.realism,
                "relevancy": config.planner.relevancy,
                "ambient_sound_encouraged": config.planner.ambient_sound_encouraged,
                "transition_discouraged": config.planner.transition_discouraged,
            },
        },
        "selector": {
            "penalty_lambda": config.selector.penalty_lambda,
            "comparable_epsilon": config.selector.comparable_epsilon,
            "criteria": [
                {"key": c.name, "definition": c.definition, "penalized": c.penalized}
                for c in config.selector.metric_suite.criteria
            ],
            "probing_aspects": [
                {"key": key, "title": title, "question": question}
                for key, title, question in config.selector.probing_aspects
            ],
        },
        "critics": {
            "dimensions": {
                dimension: [{"key": m.key, "definition": m.definition} for m in metrics]
                for dimension, metrics in config.critics.dimensions.items()
            }
        },
        "optimizer": {
            "score_threshold": config.optimizer.score_threshold,
            "num_sampled_prompts": config.optimizer.num_sampled_prompts,
            "num_variants": config.optimizer.num_variants,
        },
        "gateway": {
            "max_parse_retries": gateway.max_parse_retries,
            "max_attempts": gateway.max_attempts,
            "inflight_limit": gateway.inflight_limit,
            "retry_wait": gateway.retry_wait,
        },
    }


def run_config_from_dict(document: Mapping) -> tuple[RunConfig, GatewaySettings]:
    run_config, gateway_settings, _ = build_configs(document)
    return run_config, gateway_settings
