import numpy as np
import pytest

from hiem.agent import AnonymousOptionSpace, HiemAgent, LabelSubgoalSpace, default_params
from hiem.baselines import (
    METHODS,
    FlatDqnAgent,
    MethodConfig,
    OracleAgent,
    RandomAgent,
    build_agent,
    oracle_policy,
    random_policy,
)
from hiem.gridworld import AgentPose, ConfigError, EpisodeSpec, Heading, N_ACTIONS
from hiem.mapfile import parse_map_text
from hiem.metrics import evaluate, sample_episode_specs


class TestMethodConfig:
    def test_unknown_method_faults(self):
        with pytest.raises(ConfigError):
            MethodConfig("a3c")

    def test_trainable_flags(self):
        assert not MethodConfig("oracle").trainable
        assert not MethodConfig("random").trainable
        for m in set(METHODS) - {"oracle", "random"}:
            assert MethodConfig(m).trainable


class TestOracle:
    def test_matches_bfs_length_everywhere(self, bench15):
        params = default_params(1)
        agent = OracleAgent(bench15, params)
        for spec, minimal in sample_episode_specs(bench15, 40, seed=3):
            rec = agent.run_episode(spec)
            assert rec.success
            assert rec.atomic_steps == minimal

    def test_perfect_metrics(self, bench15):
        agent = OracleAgent(bench15, default_params(1))
        report, results, _ = evaluate(agent, bench15, 50, seed=9)
        assert report.sr == 1.0
        assert report.spl == 1.0
        assert report.avg_steps == report.min_steps

    def test_unreachable_goal_faults(self):
        text = """\
[map]
#######
#.#a..#
#.#####
#.....#
#######
[legend]
a = amp
"""
        world = parse_map_text(text)
        agent = OracleAgent(world, default_params(1))
        spec = EpisodeSpec(start=AgentPose(1, 1, Heading.EAST), goal_label=0)
        with pytest.raises(ConfigError):
            agent.run_episode(spec)

    def test_policy_returns_none_at_goal(self, open7):
        g = 0
        state = open7.reset(
            EpisodeSpec(start=AgentPose(3, 3, Heading.EAST), goal_label=g)
        )
        assert open7.is_goal_state(state, g)
        assert oracle_policy(open7, state, g) is None


class TestRandom:
    def test_policy_uniform_chi_square(self):
        rng = np.random.default_rng(0)
        n = 60_000
        counts = np.bincount(
            [int(random_policy(rng)) for _ in range(n)], minlength=N_ACTIONS
        )
        expect = n / N_ACTIONS
        sigma = np.sqrt(n * (1 / N_ACTIONS) * (1 - 1 / N_ACTIONS))
        assert (np.abs(counts - expect) < 4 * sigma).all()

    def test_seeded_episode_reproducible(self, bench15):
        agent = RandomAgent(bench15, default_params(1))
        spec = EpisodeSpec(
            start=AgentPose(7, 6, Heading.NORTH), goal_label=0, max_atomic_steps=100
        )
        a = agent.run_episode(spec, rng=np.random.default_rng(4))
        b = agent.run_episode(spec, rng=np.random.default_rng(4))
        assert a.success == b.success
        assert a.atomic_steps == b.atomic_steps
        assert a.options[0].path == b.options[0].path

    def test_missing_rng_faults(self, bench15):
        agent = RandomAgent(bench15, default_params(1))
        spec = EpisodeSpec(start=AgentPose(7, 6, Heading.NORTH), goal_label=0)
        with pytest.raises(ValueError):
            agent.run_episode(spec)

    def test_never_exceeds_cap(self, bench15):
        agent = RandomAgent(bench15, default_params(1))
        rng = np.random.default_rng(6)
        spec = EpisodeSpec(
            start=AgentPose(1, 1, Heading.SOUTH), goal_label=0, max_atomic_steps=30
        )
        for _ in range(5):
            rec = agent.run_episode(spec, rng=rng)
            assert rec.atomic_steps <= 30


class TestFlatDqn:
    def test_toy_convergence_matches_bfs(self):
        text = """\
[map]
#######
#.....#
#..a..#
#.....#
#######
[legend]
a = amp
[params]
goal_distance = 1
"""
        world = parse_map_text(text)
        params = default_params(
            600, hidden=(32,), min_buffer=200, batch_size=32, target_sync=1000,
            lr=3e-4, train_every=2,
        )
        agent = FlatDqnAgent(world, params, seed=0)
        specs = sample_episode_specs(world, 600, seed=1, max_atomic_steps=40)
        for i, (spec, _) in enumerate(specs):
            agent.run_episode(spec, mode="train", episode_idx=i)
        report, results, _ = evaluate(agent, world, 20, seed=2, max_atomic_steps=40)
        assert report.sr >= 0.9
        # successful paths should be near-minimal on this tiny open room
        for r in results:
            if r.success and r.minimal_steps > 0:
                assert r.steps <= r.minimal_steps + 6

    def test_checkpoint_roundtrip_bitwise(self, bench15):
        params = default_params(10, hidden=(8,), min_buffer=8, batch_size=4)
        a = FlatDqnAgent(bench15, params, seed=3)
        spec = EpisodeSpec(
            start=AgentPose(1, 1, Heading.EAST), goal_label=0, max_atomic_steps=30
        )
        a.run_episode(spec, mode="train", episode_idx=0)
        b = FlatDqnAgent(bench15, params, seed=99)
        b.set_state(a.get_state())
        x = np.random.default_rng(0).normal(size=(2, a.codec.high_dim))
        assert (a.net.forward(x) == b.net.forward(x)).all()
        assert (a.net_t.forward(x) == b.net_t.forward(x)).all()
        assert a.rng.bit_generator.state == b.rng.bit_generator.state


class TestBuildAgent:
    def test_method_to_agent_classes(self, bench15):
        params = default_params(10)
        assert isinstance(build_agent(bench15, MethodConfig("oracle"), params, 0),
                          OracleAgent)
        assert isinstance(build_agent(bench15, MethodConfig("random"), params, 0),
                          RandomAgent)
        assert isinstance(build_agent(bench15, MethodConfig("dqn"), params, 0),
                          FlatDqnAgent)
        for m in ("oc", "hdqn", "hiem", "hiem_proxy", "hiem_low", "hiem_term"):
            assert isinstance(build_agent(bench15, MethodConfig(m), params, 0),
                              HiemAgent)

    def test_ablation_overrides(self, bench15):
        params = default_params(10)
        hdqn = build_agent(bench15, MethodConfig("hdqn"), params, 0)
        assert hdqn.params.force_term_zero and hdqn.params.force_alpha == 1.0
        proxy = build_agent(bench15, MethodConfig("hiem_proxy"), params, 0)
        assert proxy.params.force_alpha == 0.0 and not proxy.params.force_term_zero
        low = build_agent(bench15, MethodConfig("hiem_low"), params, 0)
        assert low.params.force_alpha == 1.0 and not low.params.force_term_zero
        term = build_agent(bench15, MethodConfig("hiem_term"), params, 0)
        assert term.params.force_term_zero and term.params.force_alpha is None
        full = build_agent(bench15, MethodConfig("hiem"), params, 0)
        assert not full.params.force_term_zero and full.params.force_alpha is None

    def test_oc_uses_anonymous_options(self, bench15):
        agent = build_agent(
            bench15, MethodConfig("oc", option_count=5), default_params(10), 0
        )
        assert isinstance(agent.space, AnonymousOptionSpace)
        assert agent.space.n == 5
        assert not agent.space.has_intrinsic
        # every option always valid, never achieved
        mask = agent.space.valid_mask(frozenset())
        assert mask.all()

    def test_hdqn_is_forced_hiem_bitwise(self, bench15):
        """The hdqn method must coincide exactly with hiem run under the same
        seed with termination clamped to zero and behavior forced to the
        extrinsic low-level policy."""
        params = default_params(
            20, hidden=(12,), min_buffer=32, batch_size=8, train_every=2
        )
        a = build_agent(bench15, MethodConfig("hdqn"), params, seed=7)
        b = build_agent(
            bench15,
            MethodConfig("hiem", force_term_zero=True, force_alpha=1.0),
            params,
            seed=7,
        )
        specs = sample_episode_specs(bench15, 12, seed=5, max_atomic_steps=60)
        for i, (spec, _) in enumerate(specs):
            ra = a.run_episode(spec, mode="train", episode_idx=i)
            rb = b.run_episode(spec, mode="train", episode_idx=i)
            assert ra.atomic_steps == rb.atomic_steps
            assert ra.success == rb.success
        x = np.random.default_rng(1).normal(size=(3, a.codec.high_dim))
        assert (a.high.q_values(x) == b.high.q_values(x)).all()
        xe = np.random.default_rng(2).normal(size=(3, a.codec.low_ext_dim))
        assert (a.low_ext.forward(xe) == b.low_ext.forward(xe)).all()


class TestOcBehavior:
    def test_options_run_without_achievement(self, bench15):
        params = default_params(10, hidden=(8,), min_buffer=16, batch_size=4)
        agent = build_agent(bench15, MethodConfig("oc"), params, seed=1)
        spec = EpisodeSpec(
            start=AgentPose(1, 1, Heading.EAST), goal_label=0, max_atomic_steps=80
        )
        rec = agent.run_episode(spec, mode="train", episode_idx=0)
        assert rec.options
        for trace in rec.options:
            assert trace.stop_reason != "subgoal_achieved"
            assert trace.behavior in ("low", "random")
