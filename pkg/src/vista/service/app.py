"""HTTP service wrapping the engine.

Runs execute under a server-side registry: synchronously when the client asks
to wait (mock/replay runs are fast), otherwise on a background thread with the
manifest as the source of truth for polling. All filesystem paths are
interpreted on the server host; the bundled CLI talks to this app in-process
by default.
"""

from __future__ import annotations

import copy
import json
import logging
import threading
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, HTTPException, Query
from fastapi.responses import JSONResponse

from .. import __version__
from ..config import build_configs
from ..errors import (
    AlreadyCompleted,
    BackendUnavailable,
    ConfigError,
    CorruptTrajectory,
    CorruptTranscript,
    FatalBackend,
    MismatchedCorpus,
    NoSuchIteration,
    ReplayMiss,
    StorageFailure,
    VistaError,
)
from ..gateway import Transcript
from ..runtime import evaluate_sides, iteration_view, resume_run, run_info, start_run
from ..types import UserPrompt, new_run_id
from .models import (
    EvalRequest,
    EvalSummary,
    IterationView,
    ResumeRequest,
    RunInfo,
    RunRequest,
    TranscriptInfo,
)

logger = logging.getLogger(__name__)

_STATUS_CODES = (
    (NoSuchIteration, 404),
    (AlreadyCompleted, 409),
    (ReplayMiss, 409),
    (FatalBackend, 502),
    (BackendUnavailable, 502),
    (ConfigError, 400),
    (MismatchedCorpus, 400),
    (CorruptTrajectory, 422),
    (CorruptTranscript, 422),
    (StorageFailure, 400),
)


def _status_code(exc: VistaError) -> int:
    for kind, code in _STATUS_CODES:
        if isinstance(exc, kind):
            return code
    return 500


class RunRegistry:
    """Maps run ids to their directories for runs this service has touched."""

    def __init__(self) -> None:
        self._dirs: dict[str, Path] = {}
        self._lock = threading.Lock()

    def register(self, run_id: str, run_dir: Path) -> None:
        with self._lock:
            self._dirs[run_id] = Path(run_dir)

    def dir_for(self, run_id: str) -> Path:
        with self._lock:
            run_dir = self._dirs.get(run_id)
        if run_dir is None:
            raise KeyError(run_id)
        return run_dir


def _resolved_config(request: RunRequest) -> dict:
    document = copy.deepcopy(request.config or {})
    run_section = dict(document.get("run") or {})
    if request.seed is not None:
        run_section["seed"] = request.seed
    if request.iterations is not None:
        run_section["iterations"] = request.iterations
    if request.early_stop is not None:
        run_section["early_stop"] = request.early_stop
    if request.light is not None:
        run_section["light_mode"] = request.light
    document["run"] = run_section
    return document


def create_app(registry: Optional[RunRegistry] = None) -> FastAPI:
    app = FastAPI(title="vista", version=__version__)
    runs = registry or RunRegistry()

    @app.exception_handler(VistaError)
    async def vista_error_handler(_, exc: VistaError):
        return JSONResponse(
            status_code=_status_code(exc),
            content={"error": type(exc).__name__, "detail": str(exc)},
        )

    @app.get("/health")
    def health() -> dict:
        return {"status": "ok", "version": __version__}

    @app.post("/runs", response_model=RunInfo)
    def post_run(request: RunRequest) -> RunInfo:
        try:
            user = UserPrompt(
                text=request.prompt_text,
                duration_seconds=request.duration_seconds,
                video_type=request.video_type,
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        run_config, gateway_settings, _ = build_configs(_resolved_config(request))
        out_dir = Path(request.out_dir)
        run_id = new_run_id(run_config.seed, user)
        runs.register(run_id, out_dir)
        transcript = Path(request.transcript) if request.transcript else None

        def execute() -> None:
            start_run(user, run_config, gateway_settings, request.backend, out_dir, transcript)

        if request.wait:
            execute()
            return RunInfo(**run_info(out_dir))
        thread = threading.Thread(target=_swallow(execute, run_id), daemon=True)
        thread.start()
        return RunInfo(run_id=run_id, status="running", backend=request.backend,
                       seed=run_config.seed, out_dir=str(out_dir))

    @app.post("/runs/open", response_model=RunInfo)
    def post_open(request: ResumeRequest) -> RunInfo:
        info = run_info(Path(request.run_dir))
        if info.get("run_id"):
            runs.register(info["run_id"], Path(request.run_dir))
        return RunInfo(**info)

    @app.post("/runs/resume", response_model=RunInfo)
    def post_resume(request: ResumeRequest) -> RunInfo:
        run_dir = Path(request.run_dir)
        info = run_info(run_dir)  # validates the manifest exists
        run_id = info.get("run_id")
        if run_id:
            runs.register(run_id, run_dir)

        def execute() -> None:
            resume_run(run_dir)

        if request.wait:
            execute()
            return RunInfo(**run_info(run_dir))
        thread = threading.Thread(target=_swallow(execute, run_id or "?"), daemon=True)
        thread.start()
        return RunInfo(**{**info, "status": "running"})

    @app.get("/runs/{run_id}", response_model=RunInfo)
    def get_run(run_id: str) -> RunInfo:
        try:
            run_dir = runs.dir_for(run_id)
        except KeyError:
            raise HTTPException(status_code=404, detail=f"unknown run id {run_id!r}")
        return RunInfo(**run_info(run_dir))

    @app.get("/runs/{run_id}/iterations/{index}", response_model=IterationView)
    def get_iteration(run_id: str, index: int) -> IterationView:
        try:
            run_dir = runs.dir_for(run_id)
        except KeyError:
            raise HTTPException(status_code=404, detail=f"unknown run id {run_id!r}")
        return IterationView(**iteration_view(run_dir, index))

    @app.post("/eval", response_model=EvalSummary)
    def post_eval(request: EvalRequest) -> EvalSummary:
        document = {"evaluation": {"criteria": request.criteria}} if request.criteria else {}
        _, gateway_settings, eval_config = build_configs(document)
        results, summary, prompts = evaluate_sides(
            prompt_file=Path(request.prompt_file),
            side_a=Path(request.side_a),
            side_b=Path(request.side_b),
            eval_config=eval_config,
            gateway_settings=gateway_settings,
            backend_mode=request.backend,
            seed=request.seed,
            transcript_path=Path(request.transcript) if request.transcript else None,
            duration_seconds=request.duration_seconds,
        )
        results_file = None
        if request.results_out:
            results_file = str(request.results_out)
            _write_results(Path(results_file), prompts, results)
        breakdown: dict[str, dict[str, int]] = {}
        for result in results:
            for outcome in result.outcomes:
                row = breakdown.setdefault(
                    outcome.criterion, {"A_BETTER": 0, "B_BETTER": 0, "TIE": 0}
                )
                row[outcome.decision] += 1
        return EvalSummary(
            **summary.to_dict(), criteria_breakdown=breakdown, results_file=results_file
        )

    @app.get("/transcripts/info", response_model=TranscriptInfo)
    def transcript_info(path: str = Query(...)) -> TranscriptInfo:
        try:
            transcript = Transcript.load(Path(path))
        except CorruptTranscript as exc:
            return TranscriptInfo(path=path, records=0, templates={}, valid=False,
                                  detail=str(exc))
        return TranscriptInfo(
            path=path,
            records=len(transcript),
            templates=transcript.template_counts(),
            valid=True,
        )

    return app


def _swallow(fn, run_id: str):
    def wrapped() -> None:
        try:
            fn()
        except Exception:  # status lands in the manifest; polling sees "failed"
            logger.exception("background run %s failed", run_id)

    return wrapped


def _write_results(path: Path, prompts, results) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for index, (prompt, result) in enumerate(zip(prompts, results)):
            row = {
                "index": index,
                "prompt": prompt.text,
                "overall": result.overall,
                "outcomes": {o.criterion: o.decision for o in result.outcomes},
            }
            fh.write(json.dumps(row, ensure_ascii=False) + "\n")


app = create_app()
