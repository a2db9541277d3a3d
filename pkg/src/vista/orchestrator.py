"""The optimization loop.

Initialization plans prompts, generates candidate videos, and selects the
champion pair; each self-improvement iteration critiques the champion,
revises prompts through the gated deep-thinking step, generates new
candidates, and reselects with the carried champion always in the set. The
loop stops early once the champion is unchanged for ``early_stop_m``
consecutive self-improvement iterations.

Every iteration appends one record to the run store as soon as it completes,
so a crash loses at most the in-flight iteration and a resumed run continues
from the last complete record under the frozen config.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, replace
from typing import Optional, Sequence

from ._parallel import run_indexed
from .config import GatewaySettings, RunConfig, run_config_to_dict
from .critics import CriticPanel
from .errors import (
    AlreadyCompleted,
    CorruptTrajectory,
    FatalBackend,
    GenerationRejected,
)
from .gateway.base import Gateway, UsageSnapshot
from .optimizer import PromptOptimizer
from .planner import PlanEntry, PromptPlanner
from .rng import SeededRng
from .selector import ProbingCritique, ResolvedComparison, TournamentSelector, resolve_bidirectional
from .store import RunStore, TRAJECTORY_SCHEMA
from .types import Candidate, PromptText, UserPrompt, new_run_id

logger = logging.getLogger(__name__)


def check_early_stop(champion_history: Sequence[str], early_stop_m: int) -> bool:
    """True iff the last ``early_stop_m + 1`` champion ids are identical,
    i.e. the champion survived that many consecutive reselections."""
    if not champion_history:
        raise ValueError("champion history must be non-empty")
    if early_stop_m < 1:
        raise ValueError("early_stop_m must be >= 1")
    window = champion_history[-(early_stop_m + 1):]
    return len(window) == early_stop_m + 1 and len(set(window)) == 1


@dataclass(frozen=True)
class IterationRecord:
    index: int
    phase: str  # "init" | "improve"
    prompts: tuple[dict, ...]
    candidates: tuple[dict, ...]
    selection: Optional[dict]
    champion: dict
    critique_report: Optional[dict]
    modifications: Optional[dict]
    costs: dict
    warnings: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "kind": "iteration",
            "index": self.index,
            "phase": self.phase,
            "prompts": list(self.prompts),
            "candidates": list(self.candidates),
            "selection": self.selection,
            "champion": self.champion,
            "critique_report": self.critique_report,
            "modifications": self.modifications,
            "costs": self.costs,
            "warnings": list(self.warnings),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "IterationRecord":
        return cls(
            index=data["index"],
            phase=data["phase"],
            prompts=tuple(data.get("prompts", ())),
            candidates=tuple(data.get("candidates", ())),
            selection=data.get("selection"),
            champion=data["champion"],
            critique_report=data.get("critique_report"),
            modifications=data.get("modifications"),
            costs=data.get("costs", {}),
            warnings=tuple(data.get("warnings", ())),
        )


@dataclass(frozen=True)
class Trajectory:
    run_id: str
    user: UserPrompt
    iterations: tuple[IterationRecord, ...]
    final_champion: Optional[Candidate]
    stopped_early: bool = False

    @property
    def champion_history(self) -> tuple[str, ...]:
        return tuple(record.champion["video"]["id"] for record in self.iterations)


@dataclass(frozen=True)
class CostReport:
    per_iteration: tuple[dict, ...]
    totals: dict

    def to_dict(self) -> dict:
        return {"per_iteration": list(self.per_iteration), "totals": self.totals}


_COST_KEYS = ("tokens_in", "tokens_out", "model_calls", "new_videos", "rejected_videos")


def account_costs(trajectory: Trajectory) -> CostReport:
    """Per-iteration costs and their sums; totals must equal the gateway's own
    accumulated usage (no call bypasses the gateway)."""
    per_iteration = []
    totals = {key: 0 for key in _COST_KEYS}
    for record in trajectory.iterations:
        row = {"index": record.index}
        for key in _COST_KEYS:
            value = int(record.costs.get(key, 0))
            row[key] = value
            totals[key] += value
        per_iteration.append(row)
    return CostReport(per_iteration=tuple(per_iteration), totals=totals)


def _costs_dict(delta: UsageSnapshot, new_videos: int, rejected: int) -> dict:
    return {
        "tokens_in": delta.tokens_in,
        "tokens_out": delta.tokens_out,
        "model_calls": delta.calls,
        "new_videos": new_videos,
        "rejected_videos": rejected,
        "by_template": {k: delta.by_template[k] for k in sorted(delta.by_template)},
    }


class Orchestrator:
    def __init__(
        self,
        gateway: Gateway,
        store: RunStore,
        config: RunConfig,
        backend_mode: str = "mock",
        gateway_settings: Optional[GatewaySettings] = None,
    ):
        self.gateway = gateway
        self.store = store
        self.config = config
        self.backend_mode = backend_mode
        self.gateway_settings = gateway_settings or GatewaySettings()
        workers = config.max_workers
        planner_config = config.planner
        optimizer_config = config.optimizer
        if config.light_mode:
            # One candidate video per iteration: one planned prompt at init,
            # one revised prompt per improvement iteration.
            planner_config = replace(planner_config, num_planned_prompts=1, num_variants=1)
            optimizer_config = replace(optimizer_config, num_sampled_prompts=1, num_variants=1)
        self.planner = PromptPlanner(gateway, planner_config, workers)
        self.selector = TournamentSelector(gateway, config.selector, workers)
        self.critics = CriticPanel(gateway, config.critics, workers)
        self.optimizer = PromptOptimizer(gateway, optimizer_config, workers)

    # -- public API -------------------------------------------------------

    def run(self, user: UserPrompt) -> tuple[Candidate, Trajectory]:
        run_id = new_run_id(self.config.seed, user)
        self.store.create()
        self.store.acquire_lock()
        try:
            self._write_initial_manifest(run_id, user)
            self.gateway.transcript.attach_sink(self.store.transcript_path)
            self.store.write_trajectory_header(run_id, self.config.seed, user.to_dict())
            return self._drive(user, run_id, records=[], history=[])
        finally:
            self.store.release_lock()

    def resume(self, user: Optional[UserPrompt] = None) -> tuple[Candidate, Trajectory]:
        """Continue from the last complete iteration record using the frozen
        config; the caller already rebuilt this orchestrator from the
        manifest's config snapshot."""
        manifest = self.store.read_manifest()
        if manifest.get("status") not in ("running", "failed"):
            raise AlreadyCompleted(
                f"run {manifest.get('run_id')} has status {manifest.get('status')!r}"
            )
        records = self.store.load_trajectory_records()
        header = next((r for r in records if r.get("kind") == "header"), None)
        if header is None:
            raise CorruptTrajectory("trajectory has no header record")
        if header.get("schema") != TRAJECTORY_SCHEMA:
            raise CorruptTrajectory(f"unexpected trajectory schema {header.get('schema')!r}")
        run_id = header["run_id"]
        user = user or UserPrompt.from_dict(header["user_prompt"])
        iteration_records = [
            IterationRecord.from_dict(r) for r in records if r.get("kind") == "iteration"
        ]
        self.store.acquire_lock()
        try:
            self.store.set_status("running")
            self.gateway.transcript.attach_sink(self.store.transcript_path)
            if not iteration_records:
                return self._drive(user, run_id, records=[], history=[])
            history = [r.champion["video"]["id"] for r in iteration_records]
            self._restore_champion_critique(iteration_records[-1])
            return self._drive(user, run_id, records=iteration_records, history=history)
        finally:
            self.store.release_lock()

    # -- internals -----------------------------------------------------------

    def _write_initial_manifest(self, run_id: str, user: UserPrompt) -> None:
        self.store.write_manifest(
            {
                "run_id": run_id,
                "created_at": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
                "status": "running",
                "backend": self.backend_mode,
                "seed": self.config.seed,
                "user_prompt": user.to_dict(),
                "config": run_config_to_dict(self.config, self.gateway_settings),
                "paths": {
                    "trajectory": "trajectory.jsonl",
                    "transcript": "transcript.jsonl",
                    "blobs": "blobs",
                },
            }
        )

    def _restore_champion_critique(self, record: IterationRecord) -> None:
        selection = record.selection or {}
        critiques = selection.get("critiques") or {}
        champion_id = record.champion["video"]["id"]
        if champion_id in critiques:
            self.selector.seed_critique(ProbingCritique.from_dict(critiques[champion_id]))

    def _drive(
        self,
        user: UserPrompt,
        run_id: str,
        records: list[IterationRecord],
        history: list[str],
    ) -> tuple[Candidate, Trajectory]:
        def stagnant() -> bool:
            return self.config.early_stop_m is not None and check_early_stop(
                history, self.config.early_stop_m
            )

        try:
            if not records:
                champion, record = self._init_iteration(user)
                records.append(record)
                history.append(champion.video.id)
            else:
                champion = Candidate.from_dict(records[-1].champion)
            # a resumed run may already satisfy the stop condition if the
            # interrupt hit between the last iteration record and the final one
            stopped_early = stagnant()
            start = records[-1].index + 1
            if not stopped_early:
                for t in range(start, self.config.iterations + 1):
                    champion, record = self._improve_iteration(user, champion, t)
                    records.append(record)
                    history.append(champion.video.id)
                    if stagnant():
                        logger.info(
                            "early stop: champion unchanged for %d iteration(s)",
                            self.config.early_stop_m,
                        )
                        stopped_early = True
                        break
        except BaseException:
            self.store.set_status("failed")
            raise
        self.store.append_trajectory_record(
            {
                "kind": "final",
                "champion": champion.to_dict(),
                "stopped_early": stopped_early,
                "iterations_run": records[-1].index,
            }
        )
        self.store.set_status(
            "stopped-early" if stopped_early else "completed", champion=champion.to_dict()
        )
        trajectory = Trajectory(
            run_id=run_id,
            user=user,
            iterations=tuple(records),
            final_champion=champion,
            stopped_early=stopped_early,
        )
        return champion, trajectory

    # -- generation --------------------------------------------------------

    def _generate_candidates(
        self, entries: Sequence[tuple[PromptText, int]], duration_seconds: float
    ) -> tuple[list[Candidate], int, list[str]]:
        """Generate (prompt, sample_index) jobs in order; rejected generations
        are dropped with a warning, duplicates (by video id) collapse."""

        def generate(job: tuple[PromptText, int]):
            prompt, sample_index = job
            try:
                handle = self.gateway.generate_video(prompt, duration_seconds, sample_index)
            except GenerationRejected as exc:
                return ("rejected", prompt, str(exc))
            return ("ok", prompt, handle)

        results = run_indexed(generate, list(entries), self.config.max_workers)
        candidates: list[Candidate] = []
        seen: set[str] = set()
        rejected = 0
        warnings: list[str] = []
        for status, prompt, payload in results:
            if status == "rejected":
                rejected += 1
                warnings.append(f"generation rejected for prompt {prompt.id}: {payload}")
                continue
            if payload.id in seen:
                continue
            seen.add(payload.id)
            candidates.append(Candidate(video=payload, prompt=prompt))
        return candidates, rejected, warnings

    # -- iterations -----------------------------------------------------------

    def _init_iteration(self, user: UserPrompt) -> tuple[Candidate, IterationRecord]:
        before = self.gateway.usage_snapshot()
        plan_result = self.planner.plan_prompts(user)
        warnings = list(plan_result.warnings)
        videos_per_prompt = 1 if self.config.light_mode else self.config.videos_per_prompt
        if self.config.light_mode:
            candidates, rejected, generation_warnings = self._light_init_generate(
                plan_result.entries, float(user.duration_seconds)
            )
        else:
            jobs = [
                (entry.prompt, sample_index)
                for entry in plan_result.entries
                for sample_index in range(videos_per_prompt)
            ]
            candidates, rejected, generation_warnings = self._generate_candidates(
                jobs, float(user.duration_seconds)
            )
        warnings.extend(generation_warnings)
        if not candidates:
            raise FatalBackend("no candidate video could be generated at initialization")
        if len(candidates) == 1:
            champion = candidates[0]
            selection = {"mode": "single"}
        else:
            rng = SeededRng(self.config.seed, "select/init")
            result = self.selector.run_tournament(candidates, user, rng)
            champion = result.winner
            selection = {
                "mode": "tournament",
                "rounds": result.rounds,
                "comparisons": [c.to_dict() for c in result.comparisons],
                "critiques": {vid: c.to_dict() for vid, c in sorted(result.critiques.items())},
            }
        delta = self.gateway.usage_snapshot().diff(before)
        record = IterationRecord(
            index=0,
            phase="init",
            prompts=tuple(
                {**entry.prompt.to_dict(), "plan": entry.plan.to_dict(), "carryover": False}
                for entry in plan_result.entries
            ),
            candidates=tuple(
                {**candidate.to_dict(), "new": True} for candidate in candidates
            ),
            selection=selection,
            champion=champion.to_dict(),
            critique_report=None,
            modifications=None,
            costs=_costs_dict(delta, new_videos=len(candidates), rejected=rejected),
            warnings=tuple(warnings),
        )
        self.store.append_trajectory_record(record.to_dict())
        return champion, record

    def _light_init_generate(self, entries: Sequence[PlanEntry], duration_seconds: float):
        """Light mode samples exactly one video: the first plan entry that the
        backend accepts (planned first, then the residual)."""
        warnings: list[str] = []
        rejected = 0
        for entry in entries:
            candidates, entry_rejected, entry_warnings = self._generate_candidates(
                [(entry.prompt, 0)], duration_seconds
            )
            rejected += entry_rejected
            warnings.extend(entry_warnings)
            if candidates:
                return candidates, rejected, warnings
        return [], rejected, warnings

    def _improve_iteration(
        self, user: UserPrompt, champion: Candidate, index: int
    ) -> tuple[Candidate, IterationRecord]:
        before = self.gateway.usage_snapshot()
        warnings: list[str] = []
        report = self.critics.run_mmac(user, champion)
        mods = self.optimizer.deep_think(user, champion.prompt, report)
        prompts = self.optimizer.sample_prompts(
            user, champion.prompt, mods, scope=f"iter{index}/"
        )
        new_prompts = [p for p in prompts if p.id != champion.prompt.id]
        videos_per_prompt = 1 if self.config.light_mode else self.config.videos_per_prompt
        jobs = [
            (prompt, sample_index)
            for prompt in new_prompts
            for sample_index in range(videos_per_prompt)
        ]
        new_candidates, rejected, generation_warnings = self._generate_candidates(
            jobs, float(user.duration_seconds)
        )
        warnings.extend(generation_warnings)
        new_candidates = [c for c in new_candidates if c.video.id != champion.video.id]

        if not new_candidates:
            if new_prompts:
                warnings.append("no new candidate survived generation; champion carried forward")
            selection: dict = {"mode": "carryover"}
            next_champion = champion
        elif self.config.light_mode:
            comparison = self._light_compare(user, champion, new_candidates[0], index)
            next_champion = (
                champion if comparison.winner == champion.video.id else new_candidates[0]
            )
            selection = {"mode": "light", "comparison": comparison.to_dict()}
        else:
            rng = SeededRng(self.config.seed, f"select/iter{index}")
            result = self.selector.run_tournament(
                new_candidates + [champion], user, rng
            )
            next_champion = result.winner
            selection = {
                "mode": "tournament",
                "rounds": result.rounds,
                "comparisons": [c.to_dict() for c in result.comparisons],
                "critiques": {vid: c.to_dict() for vid, c in sorted(result.critiques.items())},
            }

        delta = self.gateway.usage_snapshot().diff(before)
        prompt_rows = []
        for prompt in prompts:
            row = prompt.to_dict()
            row["plan"] = None
            row["carryover"] = prompt.id == champion.prompt.id
            prompt_rows.append(row)
        candidate_rows = [
            {**candidate.to_dict(), "new": True} for candidate in new_candidates
        ]
        candidate_rows.append({**champion.to_dict(), "new": False})
        record = IterationRecord(
            index=index,
            phase="improve",
            prompts=tuple(prompt_rows),
            candidates=tuple(candidate_rows),
            selection=selection,
            champion=next_champion.to_dict(),
            critique_report=report.to_dict(),
            modifications=mods.to_dict(),
            costs=_costs_dict(delta, new_videos=len(new_candidates), rejected=rejected),
            warnings=tuple(warnings),
        )
        self.store.append_trajectory_record(record.to_dict())
        return next_champion, record

    def _light_compare(
        self, user: UserPrompt, champion: Candidate, challenger: Candidate, index: int
    ) -> ResolvedComparison:
        """Degenerate two-candidate selection: one bidirectional comparison,
        no probing critiques (light mode skips them)."""
        empty_a = ProbingCritique(candidate_id=champion.video.id, aspects={})
        empty_b = ProbingCritique(candidate_id=challenger.video.id, aspects={})
        forward = self.selector.compare_pair(champion, empty_a, challenger, empty_b, user)
        swapped = self.selector.compare_pair(challenger, empty_b, champion, empty_a, user)
        rng = SeededRng(self.config.seed, f"light/iter{index}")
        winner = resolve_bidirectional(forward, swapped, rng)
        via = "agreement" if (
            forward.favored() is not None and forward.favored() == swapped.favored()
        ) else "random"
        return ResolvedComparison(
            round_index=1,
            pair_index=0,
            first=champion.video.id,
            second=challenger.video.id,
            forward=forward,
            swapped=swapped,
            winner=winner,
            via=via,
        )


def load_trajectory(store: RunStore) -> Trajectory:
    """Rebuild a Trajectory from a run directory (for inspect/eval/costs)."""
    records = store.load_trajectory_records()
    header = next((r for r in records if r.get("kind") == "header"), None)
    if header is None:
        raise CorruptTrajectory("trajectory has no header record")
    iterations = tuple(
        IterationRecord.from_dict(r) for r in records if r.get("kind") == "iteration"
    )
    final = next((r for r in reversed(records) if r.get("kind") == "final"), None)
    final_champion = Candidate.from_dict(final["champion"]) if final else None
    return Trajectory(
        run_id=header["run_id"],
        user=UserPrompt.from_dict(header["user_prompt"]),
        iterations=iterations,
        final_champion=final_champion,
        stopped_early=bool(final.get("stopped_early")) if final else False,
    )
