"""FastAPI service layer."""

from .app import app, create_app
from .models import (
    EvalRequest,
    EvalSummary,
    IterationView,
    ResumeRequest,
    RunInfo,
    RunRequest,
    TranscriptInfo,
)

__all__ = [
    "app",
    "create_app",
    "EvalRequest",
    "EvalSummary",
    "IterationView",
    "ResumeRequest",
    "RunInfo",
    "RunRequest",
    "TranscriptInfo",
]
