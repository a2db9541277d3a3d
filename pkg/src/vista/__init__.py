"""VISTA: test-time self-improvement for text-to-video prompts.

Plans structured multi-scene prompts, selects champion video-prompt pairs via
bidirectional pairwise tournaments, critiques them with a triadic judge court
per dimension, and revises prompts through gated deep-thinking - against live
model APIs, deterministic mocks, or recorded transcripts.
"""

from .config import GatewaySettings, RunConfig
from .critics import CriticPanel, CriticsConfig, CritiqueReport, JudgeOutput
from .errors import VistaError
from .evaluation import EvalConfig, PairEvaluator, aggregate_verdict, compute_delta
from .gateway import Gateway, LiveBackend, MockBackend, ReplayBackend, Transcript
from .optimizer import ModificationList, OptimizerConfig, PromptOptimizer
from .orchestrator import Orchestrator, Trajectory, account_costs, check_early_stop
from .planner import PlannerConfig, PromptPlanner, validate_scene_plan
from .rng import SeededRng
from .selector import (
    PairVerdict,
    ProbingCritique,
    SelectorConfig,
    TournamentSelector,
    resolve_bidirectional,
    score_pair,
)
from .types import (
    Candidate,
    Criterion,
    MetricSuite,
    PromptText,
    Scene,
    ScenePlan,
    UserPrompt,
    VideoHandle,
    new_run_id,
)

__version__ = "0.1.0"

__all__ = [
    "Candidate",
    "CriticPanel",
    "CriticsConfig",
    "Criterion",
    "CritiqueReport",
    "EvalConfig",
    "Gateway",
    "GatewaySettings",
    "JudgeOutput",
    "LiveBackend",
    "MetricSuite",
    "MockBackend",
    "ModificationList",
    "OptimizerConfig",
    "Orchestrator",
    "PairEvaluator",
    "PairVerdict",
    "PlannerConfig",
    "PromptOptimizer",
    "PromptPlanner",
    "PromptText",
    "ProbingCritique",
    "ReplayBackend",
    "RunConfig",
    "Scene",
    "ScenePlan",
    "SeededRng",
    "SelectorConfig",
    "TournamentSelector",
    "Trajectory",
    "Transcript",
    "UserPrompt",
    "VideoHandle",
    "VistaError",
    "account_costs",
    "aggregate_verdict",
    "check_early_stop",
    "compute_delta",
    "new_run_id",
    "resolve_bidirectional",
    "score_pair",
    "validate_scene_plan",
]
