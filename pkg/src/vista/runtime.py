"""Wiring between storage, backends, and the orchestrator.

The service endpoints and the CLI both call into these functions; nothing here
talks HTTP.
"""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Optional

from .config import GatewaySettings, RunConfig, run_config_from_dict
from .errors import ConfigError, MismatchedCorpus, NoSuchIteration, StorageFailure
from .evaluation import EvalConfig, MatchResult, PairEvaluator, DeltaSummary
from .gateway import (
    Backend,
    Gateway,
    LiveBackend,
    MockBackend,
    ReplayBackend,
    Transcript,
    VideoStore,
    handle_for_file,
)
from .orchestrator import (
    IterationRecord,
    Orchestrator,
    Trajectory,
    account_costs,
    load_trajectory,
)
from .store import RunStore
from .types import Candidate, UserPrompt, VideoHandle

logger = logging.getLogger(__name__)

BACKEND_MODES = ("mock", "live", "replay")


def build_backend(mode: str, seed: int, transcript_path: Optional[Path] = None) -> Backend:
    if mode == "mock":
        return MockBackend(seed=seed)
    if mode == "live":
        return LiveBackend()
    if mode == "replay":
        if transcript_path is None:
            raise ConfigError("replay backend needs a transcript file (--transcript)")
        return ReplayBackend(Transcript.load(transcript_path))
    raise ConfigError(f"unknown backend mode {mode!r}; expected one of {BACKEND_MODES}")


def build_gateway(
    backend: Backend, video_store: VideoStore, settings: GatewaySettings
) -> Gateway:
    return Gateway(
        backend,
        video_store,
        max_parse_retries=settings.max_parse_retries,
        max_attempts=settings.max_attempts,
        inflight_limit=settings.inflight_limit,
        retry_wait=settings.retry_wait,
    )


def start_run(
    user: UserPrompt,
    run_config: RunConfig,
    gateway_settings: GatewaySettings,
    backend_mode: str,
    out_dir: Path,
    transcript_path: Optional[Path] = None,
) -> tuple[Candidate, Trajectory, RunStore]:
    store = RunStore(Path(out_dir)).create()
    if store.exists():
        raise StorageFailure(
            f"{out_dir} already contains a run; use resume or a fresh directory"
        )
    backend = build_backend(backend_mode, run_config.seed, transcript_path)
    gateway = build_gateway(backend, store.video_store, gateway_settings)
    orchestrator = Orchestrator(
        gateway, store, run_config, backend_mode=backend_mode,
        gateway_settings=gateway_settings,
    )
    champion, trajectory = orchestrator.run(user)
    return champion, trajectory, store


def resume_run(run_dir: Path) -> tuple[Candidate, Trajectory, RunStore]:
    """Continue a run from its last complete iteration under the manifest's
    frozen config snapshot; on-disk config edits are ignored by design."""
    store = RunStore(Path(run_dir))
    if not store.exists():
        raise StorageFailure(f"{run_dir} has no run manifest")
    manifest = store.read_manifest()
    run_config, gateway_settings = run_config_from_dict(manifest["config"])
    backend_mode = manifest.get("backend", "mock")
    transcript_path = store.transcript_path if store.transcript_path.exists() else None
    backend = build_backend(backend_mode, run_config.seed, transcript_path)
    gateway = build_gateway(backend, store.video_store, gateway_settings)
    orchestrator = Orchestrator(
        gateway, store, run_config, backend_mode=backend_mode,
        gateway_settings=gateway_settings,
    )
    champion, trajectory = orchestrator.resume()
    return champion, trajectory, store


def iteration_view(run_dir: Path, index: int) -> dict:
    """Inspection payload for one iteration: prompts, champion, verdict
    summary, meta scores, modification actions, costs."""
    store = RunStore(Path(run_dir))
    trajectory = load_trajectory(store)
    record = next((r for r in trajectory.iterations if r.index == index), None)
    if record is None:
        raise NoSuchIteration(index, len(trajectory.iterations))
    return summarize_record(record, trajectory.run_id)


def summarize_record(record: IterationRecord, run_id: str) -> dict:
    selection = record.selection or {}
    comparisons = selection.get("comparisons") or []
    if selection.get("mode") == "light" and selection.get("comparison"):
        comparisons = [selection["comparison"]]
    verdicts = [
        {
            "pair": [c["first"], c["second"]],
            "winner": c["winner"],
            "via": c["via"],
            "scores": [c["forward"]["score_first"], c["forward"]["score_second"]],
        }
        for c in comparisons
    ]
    criterion_tallies: dict[str, dict[str, int]] = {}
    for c in comparisons:
        for criterion, delta in c["forward"].get("deltas", {}).items():
            tally = criterion_tallies.setdefault(
                criterion, {"first_wins": 0, "ties": 0, "second_wins": 0}
            )
            if delta == 1:
                tally["first_wins"] += 1
            elif delta == 0.5:
                tally["ties"] += 1
            else:
                tally["second_wins"] += 1
    meta_scores = {}
    if record.critique_report:
        for dimension, critique in record.critique_report.items():
            meta_scores[dimension] = {
                key: judgment.get("score")
                for key, judgment in critique["meta"]["per_metric"].items()
            }
    modifications = (record.modifications or {}).get("actions", [])
    return {
        "run_id": run_id,
        "index": record.index,
        "phase": record.phase,
        "prompts": [
            {
                "id": row["id"],
                "lineage": row["lineage"],
                "carryover": row.get("carryover", False),
                "text": row["text"],
            }
            for row in record.prompts
        ],
        "candidates": [c["video"]["id"] for c in record.candidates],
        "champion_video_id": record.champion["video"]["id"],
        "champion_prompt_id": record.champion["prompt"]["id"],
        "selection_mode": selection.get("mode"),
        "verdicts": verdicts,
        "criterion_tallies": criterion_tallies,
        "meta_scores": meta_scores,
        "modification_actions": list(modifications),
        "costs": record.costs,
        "warnings": list(record.warnings),
    }


def run_info(run_dir: Path) -> dict:
    store = RunStore(Path(run_dir))
    manifest = store.read_manifest()
    info = {
        "run_id": manifest.get("run_id"),
        "status": manifest.get("status"),
        "backend": manifest.get("backend"),
        "seed": manifest.get("seed"),
        "out_dir": str(Path(run_dir)),
        "user_prompt": manifest.get("user_prompt"),
        "champion": manifest.get("champion"),
        "iterations_completed": 0,
        "costs": None,
    }
    try:
        trajectory = load_trajectory(store)
    except Exception:  # trajectory may not exist yet for a just-started run
        return info
    info["iterations_completed"] = len(trajectory.iterations)
    info["costs"] = account_costs(trajectory).totals
    if trajectory.final_champion is not None:
        champion = trajectory.final_champion
        info["champion"] = champion.to_dict()
        info["champion_video_path"] = str(store.video_store.resolve_path(champion.video))
    return info


# --- evaluation driving -------------------------------------------------------


def _collect_videos(path: Path) -> list[VideoHandle]:
    """Videos from a directory (sorted by name), or the final champion video
    when the path is a run directory."""
    path = Path(path)
    store = RunStore(path)
    if store.exists():
        trajectory = load_trajectory(store)
        if trajectory.final_champion is None:
            raise MismatchedCorpus(f"run {path} has no final champion to evaluate")
        handle = trajectory.final_champion.video
        resolved = store.video_store.resolve_path(handle)
        return [handle_for_file(resolved, prompt_id=handle.prompt_id)]
    if not path.is_dir():
        raise StorageFailure(f"{path} is neither a video directory nor a run directory")
    files = sorted(p for p in path.iterdir() if p.is_file())
    return [handle_for_file(p) for p in files]


def load_prompt_lines(prompt_file: Path) -> list[str]:
    path = Path(prompt_file)
    if not path.is_file():
        raise StorageFailure(f"prompt file not found: {path}")
    lines = [line.strip() for line in path.read_text(encoding="utf-8").splitlines()]
    return [line for line in lines if line]


def evaluate_sides(
    prompt_file: Path,
    side_a: Path,
    side_b: Path,
    eval_config: EvalConfig,
    gateway_settings: GatewaySettings,
    backend_mode: str = "mock",
    seed: int = 0,
    transcript_path: Optional[Path] = None,
    duration_seconds: int = 8,
    max_workers: int = 1,
    work_dir: Optional[Path] = None,
) -> tuple[list[MatchResult], DeltaSummary, list[UserPrompt]]:
    prompts = [
        UserPrompt(text=line, duration_seconds=duration_seconds)
        for line in load_prompt_lines(prompt_file)
    ]
    videos_a = _collect_videos(side_a)
    videos_b = _collect_videos(side_b)
    if not (len(prompts) == len(videos_a) == len(videos_b)):
        raise MismatchedCorpus(
            f"corpus sizes differ: {len(prompts)} prompt(s), "
            f"{len(videos_a)} A video(s), {len(videos_b)} B video(s)"
        )
    backend = build_backend(backend_mode, seed, transcript_path)
    video_store = VideoStore(Path(work_dir) if work_dir else Path(side_a))
    gateway = build_gateway(backend, video_store, gateway_settings)
    evaluator = PairEvaluator(gateway, eval_config, max_workers=max_workers)
    results, summary = evaluator.evaluate_corpus(list(zip(videos_a, videos_b)), prompts)
    return results, summary, prompts
