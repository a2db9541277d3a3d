import itertools
import json

import pytest
from hypothesis import given, settings, strategies as st

from conftest import InstantGateway, make_candidate, make_candidates, rank_judge, slot_biased_judge
from vista.errors import InvalidDelta
from vista.rng import SeededRng
from vista.selector import (
    DEFAULT_SELECTION_SUITE,
    PairVerdict,
    ProbingCritique,
    SelectorConfig,
    TournamentSelector,
    resolve_bidirectional,
    score_pair,
)
from vista.types import UserPrompt

USER = UserPrompt(text="a dog on a beach", duration_seconds=8)
KEYS = list(DEFAULT_SELECTION_SUITE.criterion_names())


class TestScorePair:
    def test_all_ties_symmetric(self):
        deltas = {f"c{i}": 0.5 for i in range(5)}
        assert score_pair(deltas, frozenset(), frozenset(), 10.0) == (0.5, 0.5)

    def test_sweep(self):
        deltas = {f"c{i}": 1 for i in range(5)}
        assert score_pair(deltas, frozenset(), frozenset(), 10.0) == (1.0, 0.0)

    def test_hand_computed_violation_case(self):
        # k=5, deltas (1,1,1,0,0.5), first side violates one criterion, lambda=10
        deltas = {"c0": 1, "c1": 1, "c2": 1, "c3": 0, "c4": 0.5}
        s_i, s_j = score_pair(deltas, frozenset({"c0"}), frozenset(), 10.0)
        assert s_i == pytest.approx((3.5 - 10) / 5)  # -1.3
        assert s_j == pytest.approx(1.5 / 5)  # 0.3

    def test_invalid_delta_rejected(self):
        with pytest.raises(InvalidDelta):
            score_pair({"c0": 0.7}, frozenset(), frozenset(), 1.0)

    def test_empty_deltas_rejected(self):
        with pytest.raises(ValueError):
            score_pair({}, frozenset(), frozenset(), 1.0)

    @given(
        deltas=st.lists(st.sampled_from([0.0, 0.5, 1.0]), min_size=1, max_size=8),
        viol_i=st.lists(st.booleans(), min_size=8, max_size=8),
        viol_j=st.lists(st.booleans(), min_size=8, max_size=8),
        lam=st.sampled_from([0.0, 0.5, 1.0, 10.0]),
    )
    @settings(max_examples=200)
    def test_complementarity_identity(self, deltas, viol_i, viol_j, lam):
        names = [f"c{i}" for i in range(len(deltas))]
        mapping = dict(zip(names, deltas))
        first = frozenset(n for n, v in zip(names, viol_i) if v)
        second = frozenset(n for n, v in zip(names, viol_j) if v)
        s_i, s_j = score_pair(mapping, first, second, lam)
        k = len(deltas)
        expected = 1.0 - (lam / k) * (len(first & set(names)) + len(second & set(names)))
        assert s_i + s_j == pytest.approx(expected, abs=1e-12)

    def test_monotonicity_in_delta(self):
        base = {"c0": 0, "c1": 0.5, "c2": 1}
        s_i0, s_j0 = score_pair(base, frozenset(), frozenset(), 2.0)
        flipped = dict(base, c0=1)
        s_i1, s_j1 = score_pair(flipped, frozenset(), frozenset(), 2.0)
        assert s_i1 - s_i0 == pytest.approx(1 / 3)
        assert s_j0 - s_j1 == pytest.approx(1 / 3)


def _verdict(first, second, decision) -> PairVerdict:
    return PairVerdict(
        first=first,
        second=second,
        deltas={"c": 0.5},
        violations_first=frozenset(),
        violations_second=frozenset(),
        score_first=0.5,
        score_second=0.5,
        decision=decision,
    )


class TestResolveBidirectional:
    def test_agreement_on_first(self):
        forward = _verdict("a", "b", "A_BETTER")
        swapped = _verdict("b", "a", "B_BETTER")  # still favors a after unswap
        assert resolve_bidirectional(forward, swapped, SeededRng(0, "t")) == "a"

    def test_agreement_on_second(self):
        forward = _verdict("a", "b", "B_BETTER")
        swapped = _verdict("b", "a", "A_BETTER")
        assert resolve_bidirectional(forward, swapped, SeededRng(0, "t")) == "b"

    def test_disagreement_draws(self):
        forward = _verdict("a", "b", "A_BETTER")
        swapped = _verdict("b", "a", "A_BETTER")  # slot bias: favors b after unswap
        winners = {
            resolve_bidirectional(forward, swapped, SeededRng(seed, "t"))
            for seed in range(32)
        }
        assert winners == {"a", "b"}

    def test_comparable_is_disagreement(self):
        forward = _verdict("a", "b", "A_BETTER")
        swapped = _verdict("b", "a", "COMPARABLE")
        winners = {
            resolve_bidirectional(forward, swapped, SeededRng(seed, "t"))
            for seed in range(32)
        }
        assert winners == {"a", "b"}

    def test_double_comparable_is_disagreement(self):
        forward = _verdict("a", "b", "COMPARABLE")
        swapped = _verdict("b", "a", "COMPARABLE")
        winners = {
            resolve_bidirectional(forward, swapped, SeededRng(seed, "t"))
            for seed in range(32)
        }
        assert winners == {"a", "b"}

    def test_mismatched_pair_rejected(self):
        with pytest.raises(ValueError):
            resolve_bidirectional(
                _verdict("a", "b", "A_BETTER"),
                _verdict("a", "c", "A_BETTER"),
                SeededRng(0, "t"),
            )

    def test_disagreement_draw_is_roughly_uniform(self):
        forward = _verdict("a", "b", "A_BETTER")
        swapped = _verdict("b", "a", "A_BETTER")
        wins_a = sum(
            resolve_bidirectional(forward, swapped, SeededRng(seed, "draw")) == "a"
            for seed in range(2000)
        )
        assert 0.45 <= wins_a / 2000 <= 0.55


def _scripted_selector(mock_gateway_factory, script, config=None, seed=0):
    gateway = mock_gateway_factory(seed=seed, responders={"pairwise_select": script})
    return TournamentSelector(gateway, config or SelectorConfig()), gateway


def _fixed_verdict_script(body):
    def respond(request):  # noqa: ARG001
        return "Verdict.\n```json\n" + json.dumps(body) + "\n```"

    return respond


class TestComparePair:
    def test_a_wins_all_criteria(self, mock_gateway_factory):
        body = {
            "Decision": "A_BETTER",
            "WeightedScoreA": 1.0,
            "WeightedScoreB": 0.0,
            "Criteria": {key: 1 for key in KEYS},
            "Violations": {"A": [], "B": []},
        }
        selector, _ = _scripted_selector(mock_gateway_factory, _fixed_verdict_script(body))
        a, b = make_candidates(2)
        qa = ProbingCritique(candidate_id=a.video.id, aspects={})
        qb = ProbingCritique(candidate_id=b.video.id, aspects={})
        verdict = selector.compare_pair(a, qa, b, qb, USER)
        assert verdict.decision == "A_BETTER"
        assert (verdict.score_first, verdict.score_second) == (1.0, 0.0)
        assert not verdict.score_mismatch

    def test_all_ties_is_comparable(self, mock_gateway_factory):
        body = {
            "Decision": "COMPARABLE",
            "WeightedScoreA": 0.5,
            "WeightedScoreB": 0.5,
            "Criteria": {key: 0.5 for key in KEYS},
            "Violations": {"A": [], "B": []},
        }
        selector, _ = _scripted_selector(mock_gateway_factory, _fixed_verdict_script(body))
        a, b = make_candidates(2)
        verdict = selector.compare_pair(
            a, ProbingCritique(a.video.id, {}), b, ProbingCritique(b.video.id, {}), USER
        )
        assert verdict.decision == "COMPARABLE"

    def test_violation_flips_decision(self, mock_gateway_factory):
        # all ties, but B violates one penalized criterion with lambda=10
        body = {
            "Decision": "A_BETTER",
            "WeightedScoreA": 0.5,
            "WeightedScoreB": 0.5 - 2.0,
            "Criteria": {key: 0.5 for key in KEYS},
            "Violations": {"A": [], "B": [KEYS[0]]},
        }
        selector, _ = _scripted_selector(mock_gateway_factory, _fixed_verdict_script(body))
        a, b = make_candidates(2)
        verdict = selector.compare_pair(
            a, ProbingCritique(a.video.id, {}), b, ProbingCritique(b.video.id, {}), USER
        )
        assert verdict.decision == "A_BETTER"
        assert verdict.score_first == pytest.approx(0.5)
        assert verdict.score_second == pytest.approx(0.5 - 10.0 / len(KEYS))

    def test_unpenalized_criterion_ignores_violation(self, mock_gateway_factory):
        from vista.types import Criterion, MetricSuite

        suite = MetricSuite(
            name="custom",
            criteria=(Criterion("x", penalized=False), Criterion("y", penalized=True)),
        )
        body = {
            "Decision": "COMPARABLE",
            "WeightedScoreA": 0.5,
            "WeightedScoreB": 0.5,
            "Criteria": {"x": 0.5, "y": 0.5},
            "Violations": {"A": ["x"], "B": []},
        }
        selector, _ = _scripted_selector(
            mock_gateway_factory,
            _fixed_verdict_script(body),
            config=SelectorConfig(metric_suite=suite),
        )
        a, b = make_candidates(2)
        verdict = selector.compare_pair(
            a, ProbingCritique(a.video.id, {}), b, ProbingCritique(b.video.id, {}), USER
        )
        assert verdict.violations_first == frozenset()
        assert verdict.decision == "COMPARABLE"

    def test_parse_failure_degrades_to_comparable(self, mock_gateway_factory):
        selector, _ = _scripted_selector(mock_gateway_factory, lambda r: "garbage")
        a, b = make_candidates(2)
        verdict = selector.compare_pair(
            a, ProbingCritique(a.video.id, {}), b, ProbingCritique(b.video.id, {}), USER
        )
        assert verdict.parse_failed
        assert verdict.decision == "COMPARABLE"

    def test_judge_mismatch_flagged(self, mock_gateway_factory):
        body = {
            "Decision": "B_BETTER",  # inconsistent with unanimous A criteria
            "WeightedScoreA": 0.0,
            "WeightedScoreB": 1.0,
            "Criteria": {key: 1 for key in KEYS},
            "Violations": {"A": [], "B": []},
        }
        selector, _ = _scripted_selector(mock_gateway_factory, _fixed_verdict_script(body))
        a, b = make_candidates(2)
        verdict = selector.compare_pair(
            a, ProbingCritique(a.video.id, {}), b, ProbingCritique(b.video.id, {}), USER
        )
        assert verdict.decision == "A_BETTER"  # engine-side recomputation wins
        assert verdict.score_mismatch

    def test_self_comparison_rejected(self, mock_gateway_factory):
        selector, _ = _scripted_selector(mock_gateway_factory, slot_biased_judge())
        a = make_candidate("a")
        with pytest.raises(ValueError):
            selector.compare_pair(
                a, ProbingCritique(a.video.id, {}), a, ProbingCritique(a.video.id, {}), USER
            )


class TestProbing:
    def test_one_critique_per_candidate(self, mock_gateway_factory):
        gateway = mock_gateway_factory(seed=0)
        selector = TournamentSelector(gateway, SelectorConfig())
        candidates = make_candidates(3)
        critiques = selector.probe_critiques(candidates, USER)
        assert [c.candidate_id for c in critiques] == [c.video.id for c in candidates]
        assert all(set(c.aspects) == set(SelectorConfig().aspect_keys()) for c in critiques)

    def test_scripted_aspect_map_round_trip(self, mock_gateway_factory):
        fixture = {key: f"critique {key}" for key in SelectorConfig().aspect_keys()}

        def respond(request):  # noqa: ARG001
            return "```json\n" + json.dumps(fixture) + "\n```"

        gateway = mock_gateway_factory(seed=0, responders={"probing": respond})
        selector = TournamentSelector(gateway, SelectorConfig())
        critiques = selector.probe_critiques(make_candidates(1), USER)
        assert dict(critiques[0].aspects) == fixture

    def test_failed_probe_yields_empty_critique(self, mock_gateway_factory):
        gateway = mock_gateway_factory(seed=0, responders={"probing": lambda r: "garbage"})
        selector = TournamentSelector(gateway, SelectorConfig())
        critiques = selector.probe_critiques(make_candidates(2), USER)
        assert all(c.degraded and not c.aspects for c in critiques)

    def test_cache_prevents_reprobing(self, mock_gateway_factory):
        gateway = mock_gateway_factory(seed=0)
        selector = TournamentSelector(gateway, SelectorConfig())
        candidates = make_candidates(2)
        selector.probe_critiques(candidates, USER)
        first_count = gateway.usage_snapshot().by_template.get("probing", 0)
        selector.probe_critiques(candidates + make_candidates(3)[2:], USER)
        second_count = gateway.usage_snapshot().by_template.get("probing", 0)
        assert first_count == 2
        assert second_count == 3  # only the new candidate was probed

    def test_empty_candidates_rejected(self, mock_gateway_factory):
        selector = TournamentSelector(mock_gateway_factory(seed=0), SelectorConfig())
        with pytest.raises(ValueError):
            selector.probe_critiques([], USER)


class TestTournament:
    def test_single_candidate_no_judging(self):
        gateway = InstantGateway(pairwise=rank_judge({}))
        selector = TournamentSelector(gateway, SelectorConfig())
        only = make_candidate("solo")
        result = selector.run_tournament([only], USER, SeededRng(0, "t"))
        assert result.winner == only
        assert result.rounds == 0
        assert gateway.calls.get("pairwise_select", 0) == 0

    def test_strict_order_winner_is_top_ranked(self):
        candidates = make_candidates(4)
        ranks = {c.video.id: i for i, c in enumerate(candidates)}
        for seed in range(10):
            for ordering in itertools.permutations(candidates):
                gateway = InstantGateway(pairwise=rank_judge(ranks))
                selector = TournamentSelector(gateway, SelectorConfig())
                result = selector.run_tournament(list(ordering), USER, SeededRng(seed, "t"))
                assert result.winner.video.id == candidates[0].video.id

    def test_eight_candidates_counting(self):
        candidates = make_candidates(8)
        ranks = {c.video.id: i for i, c in enumerate(candidates)}
        gateway = InstantGateway(pairwise=rank_judge(ranks))
        selector = TournamentSelector(gateway, SelectorConfig())
        result = selector.run_tournament(candidates, USER, SeededRng(1, "t"))
        assert result.rounds == 3
        assert len(result.comparisons) == 7
        assert result.judge_calls() == 14
        assert gateway.calls["pairwise_select"] == 14
        assert not result.winner_ever_lost()

    def test_odd_field_gets_bye_and_correct_rounds(self):
        candidates = make_candidates(5)
        ranks = {c.video.id: i for i, c in enumerate(candidates)}
        gateway = InstantGateway(pairwise=rank_judge(ranks))
        selector = TournamentSelector(gateway, SelectorConfig())
        result = selector.run_tournament(candidates, USER, SeededRng(3, "t"))
        assert result.rounds == 3  # ceil(log2 5)
        assert len(result.comparisons) == 4  # n - 1 eliminations

    def test_swap_relabeling_preserves_winner_on_agreement(self):
        candidates = make_candidates(2)
        ranks = {c.video.id: i for i, c in enumerate(candidates)}
        for order in (candidates, list(reversed(candidates))):
            gateway = InstantGateway(pairwise=rank_judge(ranks))
            selector = TournamentSelector(gateway, SelectorConfig())
            result = selector.run_tournament(order, USER, SeededRng(0, "t"))
            assert result.winner.video.id == candidates[0].video.id
            assert result.comparisons[0].via == "agreement"

    def test_slot_bias_forces_random_resolution(self):
        candidates = make_candidates(2)
        gateway = InstantGateway(pairwise=slot_biased_judge())
        selector = TournamentSelector(gateway, SelectorConfig())
        result = selector.run_tournament(candidates, USER, SeededRng(0, "t"))
        assert result.comparisons[0].via == "random"
