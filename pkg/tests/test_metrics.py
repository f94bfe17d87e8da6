import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hiem.agent import default_params
from hiem.baselines import OracleAgent, RandomAgent
from hiem.metrics import (
    EpisodeResult,
    aggregate,
    compute_ar,
    compute_spl,
    evaluate,
    sample_episode_specs,
)


def res(success, steps, minimal, goal=0, seed=0):
    return EpisodeResult(success, steps, minimal, goal, seed)


class TestSpl:
    def test_hand_computed_mixture(self):
        # (1)*4/max(4,8)=0.5, fail=0, (1)*3/max(3,3)=1 -> mean = 0.5
        results = [res(True, 8, 4), res(False, 20, 5), res(True, 3, 3)]
        assert compute_spl(results) == pytest.approx(0.5, abs=1e-12)

    def test_zero_minimal_contributes_success_indicator(self):
        assert compute_spl([res(True, 0, 0)]) == 1.0
        assert compute_spl([res(True, 7, 0)]) == 1.0
        assert compute_spl([res(False, 0, 0)]) == 0.0

    def test_empty_faults(self):
        with pytest.raises(ValueError):
            compute_spl([])

    def test_agent_never_beats_minimal_gives_sr(self):
        results = [res(True, 5, 5), res(True, 9, 9), res(False, 1, 1)]
        assert compute_spl(results) == pytest.approx(2 / 3, abs=1e-12)

    @given(
        st.lists(
            st.tuples(st.booleans(), st.integers(0, 500), st.integers(0, 100)),
            min_size=1,
            max_size=30,
        )
    )
    @settings(max_examples=100, deadline=None)
    def test_bounded_by_sr(self, raw):
        results = [res(s, max(t, m), m) for s, t, m in raw]
        sr = sum(r.success for r in results) / len(results)
        spl = compute_spl(results)
        assert 0.0 <= spl <= sr + 1e-12


class TestAr:
    def test_hand_computed(self):
        g = 0.9
        results = [res(True, 3, 1), res(False, 2, 1), res(True, 0, 0)]
        assert compute_ar(results, g) == pytest.approx((g**3 + 1.0) / 3, abs=1e-12)

    def test_all_failures_zero(self):
        assert compute_ar([res(False, 5, 2)] * 4, 0.99) == 0.0

    def test_invalid_gamma_faults(self):
        with pytest.raises(ValueError):
            compute_ar([res(True, 1, 1)], 0.0)
        with pytest.raises(ValueError):
            compute_ar([res(True, 1, 1)], 1.5)

    @given(
        st.lists(
            st.tuples(st.booleans(), st.integers(0, 500)),
            min_size=1,
            max_size=30,
        ),
        st.floats(0.5, 1.0, exclude_min=False),
    )
    @settings(max_examples=100, deadline=None)
    def test_bounded_by_sr(self, raw, gamma):
        results = [res(s, t, 0) for s, t in raw]
        sr = sum(r.success for r in results) / len(results)
        ar = compute_ar(results, gamma)
        assert 0.0 <= ar <= sr + 1e-12


class TestAggregate:
    def test_no_success_report(self):
        rep = aggregate([res(False, 10, 3)] * 3, 0.99)
        assert rep.sr == 0.0
        assert rep.avg_steps is None
        assert rep.min_steps is None
        assert rep.spl == 0.0
        assert rep.ar == 0.0
        assert rep.n == 3

    def test_success_only_averages(self):
        rep = aggregate([res(True, 4, 2), res(False, 9, 3), res(True, 8, 6)], 0.5)
        assert rep.sr == pytest.approx(2 / 3)
        assert rep.avg_steps == pytest.approx(6.0)
        assert rep.min_steps == pytest.approx(4.0)
        assert rep.ar == pytest.approx((0.5**4 + 0.5**8) / 3, abs=1e-12)

    def test_as_row_keys(self):
        row = aggregate([res(True, 1, 1)], 0.99).as_row()
        assert list(row) == ["SR", "AS", "MS", "SPL", "AR", "N"]


class TestSampling:
    def test_deterministic_given_seed(self, bench15):
        a = sample_episode_specs(bench15, 25, seed=42)
        b = sample_episode_specs(bench15, 25, seed=42)
        assert [(s.start, s.goal_label, s.seed) for s, _ in a] == [
            (s.start, s.goal_label, s.seed) for s, _ in b
        ]

    def test_minimal_lengths_match_bfs(self, bench15):
        for spec, minimal in sample_episode_specs(bench15, 15, seed=7):
            assert minimal == bench15.shortest_path_to_label(
                spec.start, spec.goal_label
            )

    def test_all_starts_free_and_goals_present(self, bench15):
        present = set(bench15.labels_present())
        for spec, _ in sample_episode_specs(bench15, 30, seed=8):
            assert bench15.passable(spec.start.x, spec.start.y)
            assert spec.goal_label in present

    def test_zero_episodes_faults(self, bench15):
        with pytest.raises(ValueError):
            evaluate(OracleAgent(bench15, default_params(1)), bench15, 0, seed=0)


class TestEvaluate:
    def test_repeatable_for_stochastic_agent(self, bench15):
        agent = RandomAgent(bench15, default_params(1))
        rep1, res1, _ = evaluate(agent, bench15, 30, seed=5)
        rep2, res2, _ = evaluate(agent, bench15, 30, seed=5)
        assert rep1 == rep2
        assert res1 == res2

    def test_oracle_sandwich(self, bench15):
        oracle_rep, _, _ = evaluate(
            OracleAgent(bench15, default_params(1)), bench15, 30, seed=6
        )
        rand_rep, _, _ = evaluate(
            RandomAgent(bench15, default_params(1)), bench15, 30, seed=6
        )
        assert oracle_rep.sr == 1.0 and oracle_rep.spl == 1.0
        assert rand_rep.sr <= oracle_rep.sr
        assert rand_rep.spl <= oracle_rep.spl
        assert rand_rep.ar <= oracle_rep.ar

    def test_records_consistent_with_results(self, bench15):
        agent = OracleAgent(bench15, default_params(1))
        _, results, records = evaluate(agent, bench15, 10, seed=11)
        for r, rec in zip(results, records):
            assert r.success == rec.success
            assert r.steps == rec.atomic_steps
