"""Request/response schemas for the HTTP service."""

from __future__ import annotations

from typing import Any, Literal, Optional

from pydantic import BaseModel, Field

BackendMode = Literal["mock", "live", "replay"]


class RunRequest(BaseModel):
    prompt_text: str = Field(min_length=1)
    duration_seconds: int = Field(default=8, gt=0)
    video_type: str = "real"
    backend: BackendMode = "mock"
    seed: Optional[int] = None
    iterations: Optional[int] = Field(default=None, ge=1)
    early_stop: Optional[int] = Field(default=None, ge=1)
    light: Optional[bool] = None
    out_dir: str
    transcript: Optional[str] = None
    config: Optional[dict[str, Any]] = None
    wait: bool = True


class ResumeRequest(BaseModel):
    run_dir: str
    wait: bool = True


class RunInfo(BaseModel):
    run_id: Optional[str] = None
    status: Optional[str] = None
    backend: Optional[str] = None
    seed: Optional[int] = None
    out_dir: str
    user_prompt: Optional[dict[str, Any]] = None
    iterations_completed: int = 0
    champion: Optional[dict[str, Any]] = None
    champion_video_path: Optional[str] = None
    costs: Optional[dict[str, int]] = None


class PromptView(BaseModel):
    id: str
    lineage: str
    carryover: bool
    text: str


class VerdictView(BaseModel):
    pair: list[str]
    winner: str
    via: str
    scores: list[float]


class IterationView(BaseModel):
    run_id: str
    index: int
    phase: str
    prompts: list[PromptView]
    candidates: list[str]
    champion_video_id: str
    champion_prompt_id: str
    selection_mode: Optional[str] = None
    verdicts: list[VerdictView]
    criterion_tallies: dict[str, dict[str, int]] = {}
    meta_scores: dict[str, dict[str, Optional[float]]]
    modification_actions: list[str]
    costs: dict[str, Any]
    warnings: list[str]


class EvalRequest(BaseModel):
    prompt_file: str
    side_a: str
    side_b: str
    backend: BackendMode = "mock"
    seed: int = 0
    transcript: Optional[str] = None
    duration_seconds: int = Field(default=8, gt=0)
    results_out: Optional[str] = None
    criteria: Optional[list[str]] = None


class EvalSummary(BaseModel):
    matches: int
    win: float
    tie: float
    loss: float
    delta: float
    criteria_breakdown: dict[str, dict[str, int]] = {}
    results_file: Optional[str] = None


class TranscriptInfo(BaseModel):
    path: str
    records: int
    templates: dict[str, int]
    valid: bool
    detail: Optional[str] = None


class ErrorBody(BaseModel):
    error: str
    detail: str
