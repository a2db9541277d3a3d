"""Acceptance suite: one test per release criterion, each pinned to an
explicit tolerance and runtime budget, runnable entirely against mock/replay
backends.

Run with ``pytest tests/test_acceptance.py -v``; a PASS/FAIL line per
criterion is printed to the terminal.
"""

from __future__ import annotations

import itertools
import math
import random
import time

import pytest

from conftest import InstantGateway, make_candidates, rank_judge, slot_biased_judge
from vista.config import RunConfig
from vista.critics import CritiqueReport, DimensionCritique, JudgeOutput, MetricJudgment
from vista.errors import VistaError
from vista.evaluation import (
    CriterionOutcome,
    EvalConfig,
    MatchResult,
    aggregate_verdict,
    compute_delta,
    reconcile_decisions,
)
from vista.gateway import Gateway, MockBackend, ReplayBackend, Transcript
from vista.gateway.mock import _fence
from vista.optimizer import OptimizerConfig, PromptOptimizer
from vista.orchestrator import Orchestrator, account_costs
from vista.planner import PlannerConfig
from vista.rng import SeededRng
from vista.selector import SelectorConfig, TournamentSelector, score_pair
from vista.store import RunStore
from vista.types import PromptText, UserPrompt

USER = UserPrompt(text="a dog chasing a ball on a beach", duration_seconds=16)


def _pinned_low_judges(score: int = 6):
    """Side-judge responders pinned to one score so the revision gate fires
    deterministically in full-pipeline runs."""
    import re

    def respond(request):
        keys = re.findall(r'"([a-z][a-z0-9_]*)":\s*\{', request.binding("metrics_block"))
        return _fence({k: {"score": score, "justification": "pinned"} for k in keys})

    return {
        f"{dim}_{stance}_judge": respond
        for dim in ("visual", "audio", "context")
        for stance in ("normal", "adversarial")
    }


@pytest.mark.acceptance(1, "scoring-formula oracle equivalence (exact to 1e-12)")
def test_criterion_1_scoring_oracle_equivalence():
    start = time.monotonic()
    checked = 0
    for lam in (0.0, 0.5, 10.0):
        for k in range(1, 6):
            names = tuple(f"c{i}" for i in range(k))
            delta_maps = [
                dict(zip(names, combo))
                for combo in itertools.product((0.0, 0.5, 1.0), repeat=k)
            ]
            violation_sets = [
                frozenset(itertools.compress(names, mask))
                for mask in itertools.product((0, 1), repeat=k)
            ]
            for deltas in delta_maps:
                for vi in violation_sets:
                    for vj in violation_sets:
                        s_i, s_j = score_pair(deltas, vi, vj, lam)
                        # independent oracle: per-criterion terms, fsum accumulation
                        oracle_i = math.fsum(
                            deltas[n] - lam * (n in vi) for n in names
                        ) / k
                        oracle_j = math.fsum(
                            (1.0 - deltas[n]) - lam * (n in vj) for n in names
                        ) / k
                        assert abs(s_i - oracle_i) <= 1e-12
                        assert abs(s_j - oracle_j) <= 1e-12
                        identity = 1.0 - (lam / k) * (len(vi) + len(vj))
                        assert abs((s_i + s_j) - identity) <= 1e-12
                        checked += 1
    assert checked == sum(12**k for k in range(1, 6)) * 3
    assert time.monotonic() - start < 5.0


@pytest.mark.acceptance(2, "tournament soundness across n in 1..16, 1000 seeds each")
def test_criterion_2_tournament_soundness():
    start = time.monotonic()
    config = SelectorConfig()
    for n in range(1, 17):
        candidates = make_candidates(n)
        ranks = {c.video.id: i for i, c in enumerate(candidates)}
        judge = rank_judge(ranks)
        expected_rounds = math.ceil(math.log2(n)) if n > 1 else 0
        for seed in range(1000):
            gateway = InstantGateway(pairwise=judge)
            selector = TournamentSelector(gateway, config)
            result = selector.run_tournament(candidates, USER, SeededRng(seed, "t"))
            assert result.winner.video.id == candidates[0].video.id
            assert result.rounds == expected_rounds
            assert not result.winner_ever_lost()
            assert len(result.comparisons) == n - 1
            assert gateway.calls.get("pairwise_select", 0) == 2 * (n - 1)
    assert time.monotonic() - start < 30.0


@pytest.mark.acceptance(3, "conflict randomization is 50% +/- 2% over 10,000 seeds")
def test_criterion_3_conflict_randomization():
    start = time.monotonic()
    candidates = make_candidates(2)
    judge = slot_biased_judge()
    config = SelectorConfig()
    first_wins = 0
    for seed in range(10_000):
        selector = TournamentSelector(InstantGateway(pairwise=judge), config)
        result = selector.run_tournament(candidates, USER, SeededRng(seed, "t"))
        assert result.comparisons[0].via == "random"
        if result.winner.video.id == candidates[0].video.id:
            first_wins += 1
    share = first_wins / 10_000
    assert 0.48 <= share <= 0.52
    assert time.monotonic() - start < 10.0


@pytest.mark.acceptance(4, "swap-conflict tie rule and antisymmetry, exhaustive 3^4 x 3^4")
def test_criterion_4_swap_conflict_tie_rule():
    start = time.monotonic()
    criteria = ("c1", "c2", "c3", "c4")
    config = EvalConfig(criteria=criteria, alignment_criterion="c1", min_wins=3)
    decisions = ("A_BETTER", "B_BETTER", "TIE")
    flip = {"A_BETTER": "B_BETTER", "B_BETTER": "A_BETTER", "TIE": "TIE"}
    flip_overall = {"Win": "Loss", "Loss": "Win", "Tie": "Tie"}
    grids = list(itertools.product(decisions, repeat=4))
    for forward_combo in grids:
        forward = dict(zip(criteria, forward_combo))
        for swapped_combo in grids:
            swapped = dict(zip(criteria, swapped_combo))
            merged = reconcile_decisions(forward, swapped, criteria)
            for key in criteria:
                if forward[key] == flip[swapped[key]]:
                    assert merged[key] == forward[key]
                else:
                    assert merged[key] == "TIE"  # conflicts after swapping are ties
            overall = aggregate_verdict(
                [CriterionOutcome(k, merged[k]) for k in criteria], config
            ).overall
            # physically swapping the two videos exchanges the roles of the
            # forward and swapped passes and relabels every decision
            mirrored = reconcile_decisions(swapped, forward, criteria)
            mirrored_overall = aggregate_verdict(
                [CriterionOutcome(k, mirrored[k]) for k in criteria], config
            ).overall
            assert mirrored == {k: flip[v] for k, v in merged.items()}
            assert mirrored_overall == flip_overall[overall]
    assert time.monotonic() - start < 10.0


@pytest.mark.acceptance(5, "win rule on >= 100,000 sampled ten-criterion vectors")
def test_criterion_5_win_rule_table():
    start = time.monotonic()
    criteria = tuple(f"c{i}" for i in range(10))
    alignment = "c3"
    config = EvalConfig(criteria=criteria, alignment_criterion=alignment, min_wins=3)
    decisions = ("A_BETTER", "B_BETTER", "TIE")

    def oracle(vector: dict[str, str]) -> str:
        # independent restatement: a side wins iff it is better on at least
        # three criteria and is not the loser on the alignment criterion
        a_better = [k for k, v in vector.items() if v == "A_BETTER"]
        b_better = [k for k, v in vector.items() if v == "B_BETTER"]
        a_ok = len(a_better) >= 3 and alignment not in b_better
        b_ok = len(b_better) >= 3 and alignment not in a_better
        if a_ok and not b_ok:
            return "Win"
        if b_ok and not a_ok:
            return "Loss"
        return "Tie"

    rng = random.Random(20240817)
    sampled = 0
    for _ in range(100_000):
        vector = {k: decisions[rng.randrange(3)] for k in criteria}
        outcomes = [CriterionOutcome(k, v) for k, v in vector.items()]
        assert aggregate_verdict(outcomes, config).overall == oracle(vector)
        sampled += 1
    assert sampled >= 100_000

    def vector_of(a_on, b_on):
        vector = {k: "TIE" for k in criteria}
        vector.update({k: "A_BETTER" for k in a_on})
        vector.update({k: "B_BETTER" for k in b_on})
        return [CriterionOutcome(k, vector[k]) for k in criteria]

    # hand-constructed boundary cases
    exactly_two = vector_of(["c0", "c1"], [])
    assert aggregate_verdict(exactly_two, config).overall == "Tie"
    three_wins = vector_of(["c0", "c1", "c2"], [])
    assert aggregate_verdict(three_wins, config).overall == "Win"
    three_wins_tva_loss = vector_of(["c0", "c1", "c2"], [alignment])
    assert aggregate_verdict(three_wins_tva_loss, config).overall == "Tie"
    both_qualify = vector_of(["c0", "c1", "c2"], ["c5", "c6", "c7"])
    assert aggregate_verdict(both_qualify, config).overall == "Tie"
    assert time.monotonic() - start < 10.0


@pytest.mark.acceptance(6, "revision gate: zero calls above threshold, fires at exactly 8")
def test_criterion_6_dtpa_gating(tmp_path):
    start = time.monotonic()

    def report_with(scores: dict[str, float]) -> CritiqueReport:
        judgments = {
            k: MetricJudgment(score=v, justification="j") for k, v in scores.items()
        }
        judge = lambda stance: JudgeOutput("visual", stance, judgments)  # noqa: E731
        return CritiqueReport(
            dimensions={
                "visual": DimensionCritique(judge("normal"), judge("adversarial"), judge("meta"))
            }
        )

    champion = PromptText(text="champion prompt", lineage="planned")
    from vista.gateway import VideoStore

    gateway = Gateway(MockBackend(seed=0), VideoStore(tmp_path))
    optimizer = PromptOptimizer(gateway, OptimizerConfig())

    # all meta scores >= 9: no model calls, prompt set is exactly {champion}
    mods = optimizer.deep_think(USER, champion, report_with({"a": 9, "b": 10, "c": 9.5}))
    assert mods.actions == () and mods.triggered_metrics == ()
    prompts = optimizer.sample_prompts(USER, champion, mods)
    assert [p.id for p in prompts] == [champion.id]
    assert prompts[0].text == champion.text
    assert gateway.usage_snapshot().calls == 0

    # one metric at exactly 8: the gate fires (threshold is inclusive)
    mods = optimizer.deep_think(USER, champion, report_with({"a": 9, "b": 8.0}))
    assert [m[1] for m in mods.triggered_metrics] == ["b"]
    assert gateway.usage_snapshot().by_template.get("dtpa") == 1
    assert len(mods.actions) >= 1

    # just above the threshold: closed again
    mods = optimizer.deep_think(USER, champion, report_with({"a": 8.01}))
    assert mods.actions == () and mods.triggered_metrics == ()
    assert time.monotonic() - start < 1.0


@pytest.mark.acceptance(7, "pipeline arity at production-default scale, costs cross-checked")
def test_criterion_7_pipeline_arity(tmp_path):
    start = time.monotonic()
    config = RunConfig(
        iterations=1,
        seed=13,
        videos_per_prompt=2,
        planner=PlannerConfig(num_planned_prompts=5, num_variants=3),
        optimizer=OptimizerConfig(num_sampled_prompts=5, num_variants=3),
        max_workers=4,
    )
    store = RunStore(tmp_path / "arity").create()
    gateway = Gateway(
        MockBackend(seed=config.seed, responders=_pinned_low_judges()), store.video_store
    )
    champion, trajectory = Orchestrator(gateway, store, config).run(USER)

    init = trajectory.iterations[0]
    # 5 planned prompts x 3 variants + residual = 16 prompts, 2 videos each
    assert len(init.prompts) == 16
    assert init.costs["by_template"]["planner"] == 15
    assert 30 <= init.costs["new_videos"] <= 32
    assert init.costs["new_videos"] == 32
    assert init.selection["rounds"] == 5  # ceil(log2 32)
    comparisons = init.selection["comparisons"]
    assert len(comparisons) == 31  # single elimination: n - 1
    assert init.costs["by_template"]["pairwise_select"] == 2 * len(comparisons)
    assert init.costs["by_template"]["probing"] == 32

    improve = trajectory.iterations[1]
    by_template = improve.costs["by_template"]
    mmac_calls = sum(c for name, c in by_template.items() if name.endswith("_judge"))
    assert mmac_calls == 9  # 3 dimensions x 3 roles
    assert by_template["prompt_sampler"] == 3  # one call per variant
    assert len(improve.prompts) == 16  # 15 revised + carried champion
    assert improve.costs["new_videos"] == 30  # 15 new prompts x 2 videos
    assert by_template["probing"] == 30  # champion critique is cached
    improve_comparisons = improve.selection["comparisons"]
    assert len(improve_comparisons) == 30  # 31 candidates incl. carried champion
    assert by_template["pairwise_select"] == 2 * len(improve_comparisons)

    report = account_costs(trajectory)
    usage = gateway.usage_snapshot()
    assert report.totals["model_calls"] == usage.calls
    assert report.totals["tokens_in"] == usage.tokens_in
    assert report.totals["tokens_out"] == usage.tokens_out
    assert report.totals["new_videos"] == usage.videos_generated
    assert report.totals["rejected_videos"] == usage.videos_rejected
    assert time.monotonic() - start < 60.0


@pytest.mark.acceptance(8, "replay determinism and interrupt/resume equivalence")
def test_criterion_8_determinism_and_resume(tmp_path):
    start = time.monotonic()
    config = RunConfig(
        iterations=2,
        seed=29,
        videos_per_prompt=2,
        planner=PlannerConfig(num_planned_prompts=2, num_variants=1),
        optimizer=OptimizerConfig(num_sampled_prompts=2, num_variants=1),
        max_workers=1,
    )

    def fresh_run(name, backend):
        store = RunStore(tmp_path / name).create()
        gateway = Gateway(backend, store.video_store)
        orchestrator = Orchestrator(gateway, store, config)
        champion, trajectory = orchestrator.run(USER)
        return champion, store

    champion_a, store_a = fresh_run("record", MockBackend(seed=config.seed))
    trajectory_bytes = store_a.trajectory_path.read_bytes()

    # replaying the run from its own transcript is byte-identical
    transcript = Transcript.load(store_a.transcript_path)
    champion_b, store_b = fresh_run("replay", ReplayBackend(transcript))
    assert champion_b.video.id == champion_a.video.id
    assert store_b.trajectory_path.read_bytes() == trajectory_bytes

    # interrupting mid-improvement and resuming matches the uninterrupted run
    class Interrupted(VistaError):
        pass

    class FailingAfter:
        def __init__(self, inner, budget):
            self.inner, self.budget, self.name = inner, budget, inner.name

        def complete_once(self, request, rendered, get_bytes):
            self.budget -= 1
            if self.budget < 0:
                raise Interrupted("simulated crash")
            return self.inner.complete_once(request, rendered, get_bytes)

        def generate_video_bytes(self, prompt_text, duration, sample):
            return self.inner.generate_video_bytes(prompt_text, duration, sample)

    store_c = RunStore(tmp_path / "resume").create()
    flaky = FailingAfter(MockBackend(seed=config.seed), budget=25)
    gateway = Gateway(flaky, store_c.video_store, max_attempts=1)
    with pytest.raises(Interrupted):
        Orchestrator(gateway, store_c, config).run(USER)
    assert store_c.read_manifest()["status"] == "failed"

    from vista.runtime import resume_run

    champion_c, _, _ = resume_run(store_c.run_dir)
    assert champion_c.video.id == champion_a.video.id
    assert store_c.trajectory_path.read_bytes() == trajectory_bytes
    assert time.monotonic() - start < 60.0


@pytest.mark.acceptance(9, "early stop halts after exactly m stagnant iterations")
def test_criterion_9_early_stop(tmp_path):
    start = time.monotonic()
    for m in (1, 2, 3):
        config = RunConfig(
            iterations=10,
            early_stop_m=m,
            seed=31,
            videos_per_prompt=2,
            planner=PlannerConfig(num_planned_prompts=1, num_variants=1),
            optimizer=OptimizerConfig(num_sampled_prompts=1, num_variants=1),
            max_workers=1,
        )
        store = RunStore(tmp_path / f"stop-{m}").create()
        # judges pinned high: the gate never fires, so the champion never changes
        gateway = Gateway(
            MockBackend(seed=config.seed, responders=_pinned_low_judges(score=10)),
            store.video_store,
        )
        _, trajectory = Orchestrator(gateway, store, config).run(USER)
        improvements = [r for r in trajectory.iterations if r.phase == "improve"]
        assert len(improvements) == m
        assert trajectory.stopped_early
        assert len(set(trajectory.champion_history)) == 1
        assert store.read_manifest()["status"] == "stopped-early"
    assert time.monotonic() - start < 10.0


@pytest.mark.acceptance(10, "delta arithmetic on the reported row and 1000 random sets")
def test_criterion_10_delta_arithmetic():
    start = time.monotonic()
    results = (
        [MatchResult((), "Win")] * 459
        + [MatchResult((), "Tie")] * 402
        + [MatchResult((), "Loss")] * 139
    )
    summary = compute_delta(results)
    assert summary.win == pytest.approx(45.9)
    assert summary.loss == pytest.approx(13.9)
    assert summary.delta == pytest.approx(32.0)

    rng = random.Random(7)
    for _ in range(1000):
        n = rng.randrange(1, 60)
        sample = [
            MatchResult((), rng.choice(["Win", "Tie", "Loss"])) for _ in range(n)
        ]
        s = compute_delta(sample)
        assert s.win + s.tie + s.loss == pytest.approx(100.0)
        assert s.delta == pytest.approx(s.win - s.loss)
    assert time.monotonic() - start < 1.0
