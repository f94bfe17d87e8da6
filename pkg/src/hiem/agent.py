"""Two-level hierarchical controller.

The high level proposes a sub-goal among the objects currently visible (plus
a fallback random sub-goal), the low level executes atomic actions until the
option ends.  Four learners are trained off-policy from a shared replay
buffer:

  * high Q over sub-goals, regressed toward r_e + gamma * U(s')
  * low extrinsic Q over actions, regressed toward the same 1-step return
  * termination head, moved by the advantage of sticking with the sub-goal
  * low intrinsic Q over actions, regressed toward r_i + gamma * V_i(s')

U(s') mixes continuation and re-planning value through the termination
probability: (1 - term) * Qh(s', sg) + term * max over valid sub-goals.
All bootstrap values come from target-network copies and are zeroed at goal
states.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .features import FeatureCodec
from .gridworld import Action, EpisodeSpec, N_ACTIONS, State, World
from .nets import (
    Adam,
    ConstantSchedule,
    Mlp,
    NumericsError,
    ReplayBuffer,
    Schedule,
    SharedTrunkNet,
    clone_net,
    make_optimizer,
    sync_target,
    train_q_step,
    train_step,
    train_term_step,
)

STOP_TERMINATED = "terminated"
STOP_SUBGOAL = "subgoal_achieved"
STOP_STEP_CAP = "step_cap"
STOP_GOAL = "goal_reached"
STOP_EPISODE_CAP = "episode_cap"


class ValueDriftError(NumericsError):
    """Q predictions escaped the sane range for binary episodic rewards."""


# ----- sub-goal spaces ------------------------------------------------------


class LabelSubgoalSpace:
    """Sub-goals are 'approach label l' for visible labels, plus one random
    fallback slot at index n_labels."""

    def __init__(self, world: World):
        self.n_labels = world.n_labels
        self.n = world.n_labels + 1
        self.random_index: Optional[int] = world.n_labels
        self.has_intrinsic = True
        self._names = list(world.label_names) + ["random"]

    def valid_mask(self, visible_labels) -> np.ndarray:
        mask = np.zeros(self.n, dtype=bool)
        for l in visible_labels:
            mask[l] = True
        mask[self.random_index] = True
        return mask

    def is_achieved(self, world: World, state: State, sg: int) -> bool:
        if sg == self.random_index:
            return False
        return world.is_goal_state(state, sg)

    def name(self, sg: int) -> str:
        return self._names[sg]


class AnonymousOptionSpace:
    """Fixed count of abstract options: always proposable, never 'achieved',
    no intrinsic learning.  Options end only by termination, the step cap or
    episode-level events."""

    def __init__(self, n_options: int):
        self.n = int(n_options)
        self.random_index: Optional[int] = None
        self.has_intrinsic = False

    def valid_mask(self, visible_labels) -> np.ndarray:
        return np.ones(self.n, dtype=bool)

    def is_achieved(self, world: World, state: State, sg: int) -> bool:
        return False

    def name(self, sg: int) -> str:
        return f"option{sg}"


# ----- records --------------------------------------------------------------


@dataclass
class Transition:
    s_hist: np.ndarray
    sp_hist: np.ndarray
    g: int
    sg: int
    a: int
    r_e: float
    r_i: float
    goal_reached: bool
    subgoal_reached: bool
    valid_after: np.ndarray  # proposable-sub-goal mask at s'


@dataclass
class OptionTrace:
    sg: int
    sg_name: str
    behavior: str  # "low" | "proxy" | "random"
    transitions: list = field(default_factory=list)
    stop_reason: str = ""
    path: list = field(default_factory=list)  # (x, y) after each step

    @property
    def length(self) -> int:
        return len(self.transitions)


@dataclass
class EpisodeRecord:
    goal: int
    goal_name: str
    success: bool
    atomic_steps: int
    start: tuple  # (x, y, heading)
    options: list = field(default_factory=list)  # OptionTrace
    discounted_return: float = 0.0


# ----- hyper-parameters -----------------------------------------------------


@dataclass
class HiemParams:
    gamma: float = 0.99
    max_atomic: int = 500
    max_low_level: int = 25
    hidden: tuple = (128, 64)
    history_len: int = 4
    lr: float = 1e-3
    optimizer: str = "adam"
    buffer_capacity: int = 50_000
    batch_size: int = 32
    min_buffer: int = 1_000
    train_every: int = 1
    target_sync: int = 500
    alpha_schedule: object = field(default_factory=lambda: Schedule(1.0, 0.0, 1))
    eps_high: object = field(default_factory=lambda: Schedule(1.0, 0.05, 1))
    eps_low: object = field(default_factory=lambda: Schedule(1.0, 0.05, 1))
    force_term_zero: bool = False
    force_alpha: Optional[float] = None
    term_threshold_eval: bool = False
    value_alarm: bool = True
    alarm_warmup: int = 10_000
    alarm_low: float = -0.5
    alarm_high: float = 1.5

    def __post_init__(self):
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError("gamma must be in (0, 1]")
        if self.max_low_level > self.max_atomic:
            raise ValueError("max_low_level must not exceed max_atomic")


def default_params(train_episodes: int, **overrides) -> HiemParams:
    """Schedules keyed to the training horizon: alpha anneals 1 -> 0 over all
    episodes, both epsilons 1 -> 0.05 over the first half."""
    half = max(1, train_episodes // 2)
    base = dict(
        alpha_schedule=Schedule(1.0, 0.0, max(1, train_episodes)),
        eps_high=Schedule(1.0, 0.05, half),
        eps_low=Schedule(1.0, 0.05, half),
    )
    base.update(overrides)
    return HiemParams(**base)


# ----- the controller -------------------------------------------------------


class HiemAgent:
    def __init__(self, world: World, space, params: HiemParams, seed: int):
        self.world = world
        self.space = space
        self.params = params
        self.codec = FeatureCodec(world, space.n, history_len=params.history_len)
        self.rng = np.random.default_rng(seed)

        p = params
        self.high = SharedTrunkNet(self.codec.high_dim, p.hidden, space.n, self.rng)
        self.high_t = clone_net(self.high)
        self.low_ext = Mlp(
            [self.codec.low_ext_dim, *p.hidden, N_ACTIONS], self.rng
        )
        self.low_ext_t = clone_net(self.low_ext)
        if space.has_intrinsic:
            self.low_int = Mlp(
                [self.codec.low_int_dim, *p.hidden, N_ACTIONS], self.rng
            )
            self.low_int_t = clone_net(self.low_int)
        else:
            self.low_int = None
            self.low_int_t = None

        self.opt_high = make_optimizer(p.optimizer, p.lr)
        self.opt_low_ext = make_optimizer(p.optimizer, p.lr)
        self.opt_low_int = make_optimizer(p.optimizer, p.lr)
        self.replay = ReplayBuffer(p.buffer_capacity)
        self.atomic_steps_total = 0
        self.train_rounds = 0
        self.episodes_done = 0

    # -- policies ------------------------------------------------------------

    def propose_subgoal(self, hist_vec, g, visible_labels, eps, rng) -> int:
        mask = self.space.valid_mask(visible_labels)
        valid = np.flatnonzero(mask)
        if len(valid) == 1:
            return int(valid[0])
        if eps > 0 and rng.random() < eps:
            return int(valid[rng.integers(len(valid))])
        q = self.high.q_values(self.codec.high_input(hist_vec, g))[0]
        q = np.where(mask, q, -np.inf)
        return int(np.argmax(q))

    def act_low(self, frame, g, sg, eps, rng) -> int:
        if sg == self.space.random_index:
            raise ValueError("low-level extrinsic policy is undefined for the random sub-goal")
        if eps > 0 and rng.random() < eps:
            return int(rng.integers(N_ACTIONS))
        q = self.low_ext.forward(self.codec.low_ext_input(frame, g, sg))[0]
        return int(np.argmax(q))

    def act_proxy(self, frame, sg, eps, rng) -> int:
        if sg == self.space.random_index:
            raise ValueError("proxy policy is undefined for the random sub-goal")
        if self.low_int is None:
            raise ValueError("this configuration has no intrinsic learner")
        if eps > 0 and rng.random() < eps:
            return int(rng.integers(N_ACTIONS))
        q = self.low_int.forward(self.codec.low_int_input(frame, sg))[0]
        return int(np.argmax(q))

    def term_prob(self, hist_vec, g, sg, use_target=False) -> float:
        net = self.high_t if use_target else self.high
        return float(net.term_probs(self.codec.high_input(hist_vec, g))[0, sg])

    # -- bootstrap values ----------------------------------------------------

    def _u_batch(self, sp_hist, gs, sgs, valid_after, goal_reached):
        """U for each transition, on target networks, with the caching of
        Qh(s') and V(s') shared with the termination update."""
        inputs = self.codec.high_inputs(sp_hist, gs)
        q_sp, term_sp = self.high_t.forward_both(inputs)
        q_masked = np.where(valid_after, q_sp, -np.inf)
        v_sp = q_masked.max(axis=1)
        rows = np.arange(len(sgs))
        q_sg = q_sp[rows, sgs]
        t = term_sp[rows, sgs]
        if self.params.force_term_zero:
            t = np.zeros_like(t)
        if self.space.random_index is not None:
            is_random = sgs == self.space.random_index
            t = np.where(is_random, 1.0, t)  # random option: re-plan value only
        u = (1.0 - t) * q_sg + t * v_sp
        u = np.where(goal_reached, 0.0, u)
        return u, q_sg, v_sp

    def compute_U(self, sp_hist, g, sg, valid_after, goal_reached=False) -> float:
        u, _, _ = self._u_batch(
            np.atleast_2d(sp_hist),
            np.array([g]),
            np.array([sg]),
            np.atleast_2d(valid_after),
            np.array([goal_reached]),
        )
        return float(u[0])

    # -- update rules --------------------------------------------------------

    def _batch_arrays(self, batch):
        s_hist = np.stack([t.s_hist for t in batch])
        sp_hist = np.stack([t.sp_hist for t in batch])
        gs = np.array([t.g for t in batch])
        sgs = np.array([t.sg for t in batch])
        acts = np.array([t.a for t in batch])
        r_e = np.array([t.r_e for t in batch])
        r_i = np.array([t.r_i for t in batch])
        goal_reached = np.array([t.goal_reached for t in batch])
        sub_reached = np.array([t.subgoal_reached for t in batch])
        valid_after = np.stack([t.valid_after for t in batch])
        return s_hist, sp_hist, gs, sgs, acts, r_e, r_i, goal_reached, sub_reached, valid_after

    def extrinsic_targets(self, batch) -> np.ndarray:
        """The shared 1-step extrinsic return r_e + gamma * U used by both
        the high-level and the low-level extrinsic updates."""
        _, sp_hist, gs, sgs, _, r_e, _, goal_reached, _, valid_after = (
            self._batch_arrays(batch)
        )
        u, _, _ = self._u_batch(sp_hist, gs, sgs, valid_after, goal_reached)
        return r_e + self.params.gamma * u

    def update_high(self, batch) -> float:
        s_hist, sp_hist, gs, sgs, _, r_e, _, goal_reached, _, valid_after = (
            self._batch_arrays(batch)
        )
        u, _, _ = self._u_batch(sp_hist, gs, sgs, valid_after, goal_reached)
        targets = r_e + self.params.gamma * u
        self._alarm(targets)
        inputs = self.codec.high_inputs(s_hist, gs)
        return train_q_step(self.high, self.opt_high, inputs, sgs, targets)

    def update_low_extrinsic(self, batch) -> Optional[float]:
        batch = self._non_random(batch)
        if not batch:
            return None
        s_hist, sp_hist, gs, sgs, acts, r_e, _, goal_reached, _, valid_after = (
            self._batch_arrays(batch)
        )
        u, _, _ = self._u_batch(sp_hist, gs, sgs, valid_after, goal_reached)
        targets = r_e + self.params.gamma * u
        self._alarm(targets)
        frames = s_hist[:, -self.codec.frame_dim:]
        inputs = self.codec.low_ext_inputs(frames, gs, sgs)
        return train_step(self.low_ext, self.opt_low_ext, inputs, acts, targets)

    def update_term(self, batch) -> None:
        batch = self._non_random(batch)
        if not batch:
            return
        _, sp_hist, gs, sgs, _, _, _, goal_reached, _, valid_after = (
            self._batch_arrays(batch)
        )
        _, q_sg, v_sp = self._u_batch(sp_hist, gs, sgs, valid_after, goal_reached)
        advantages = q_sg - v_sp
        inputs = self.codec.high_inputs(sp_hist, gs)
        train_term_step(self.high, self.opt_high, inputs, sgs, advantages)

    def update_low_intrinsic(self, batch) -> Optional[float]:
        batch = self._non_random(batch)
        if not batch:
            return None
        s_hist, sp_hist, _, sgs, acts, _, r_i, goal_reached, sub_reached, _ = (
            self._batch_arrays(batch)
        )
        frames_sp = sp_hist[:, -self.codec.frame_dim:]
        q_sp = self.low_int_t.forward(self.codec.low_int_inputs(frames_sp, sgs))
        v_i = q_sp.max(axis=1)
        v_i = np.where(sub_reached | goal_reached, 0.0, v_i)
        targets = r_i + self.params.gamma * v_i
        self._alarm(targets)
        frames = s_hist[:, -self.codec.frame_dim:]
        inputs = self.codec.low_int_inputs(frames, sgs)
        return train_step(self.low_int, self.opt_low_int, inputs, acts, targets)

    def _non_random(self, batch):
        ri = self.space.random_index
        if ri is None:
            return batch
        return [t for t in batch if t.sg != ri]

    def _alarm(self, values):
        p = self.params
        if not p.value_alarm or self.train_rounds <= p.alarm_warmup:
            return
        if values.size and (values.min() < p.alarm_low or values.max() > p.alarm_high):
            raise ValueDriftError(
                f"bootstrap values left [{p.alarm_low}, {p.alarm_high}]: "
                f"min={values.min():.4f} max={values.max():.4f} "
                f"at train round {self.train_rounds}"
            )

    def _train_round(self):
        p = self.params
        batch = self.replay.sample(p.batch_size, self.rng)
        self.update_high(batch)
        if p.force_alpha != 1:
            self.update_low_extrinsic(batch)
        if not p.force_term_zero:
            self.update_term(batch)
        if self.space.has_intrinsic and p.force_alpha != 0:
            self.update_low_intrinsic(batch)
        self.train_rounds += 1
        if self.train_rounds % p.target_sync == 0:
            self.sync_targets()

    def sync_targets(self):
        sync_target(self.high, self.high_t)
        sync_target(self.low_ext, self.low_ext_t)
        if self.low_int is not None:
            sync_target(self.low_int, self.low_int_t)

    def _maybe_train(self):
        p = self.params
        if len(self.replay) >= p.min_buffer and (
            self.atomic_steps_total % p.train_every == 0
        ):
            self._train_round()

    # -- execution -----------------------------------------------------------

    def _effective_alpha(self, mode: str, episode_idx: int) -> float:
        if self.params.force_alpha is not None:
            return float(self.params.force_alpha)
        if mode == "eval":
            return 0.0
        return float(self.params.alpha_schedule.value(episode_idx))

    def _pick_behavior(self, sg: int, alpha: float, rng) -> str:
        if sg == self.space.random_index:
            return "random"
        if not self.space.has_intrinsic or alpha <= 0.0:
            return "low"
        if alpha >= 1.0:
            return "proxy"
        return "proxy" if rng.random() < alpha else "low"

    def run_option(
        self,
        state,
        obs,
        history,
        g,
        sg,
        mode,
        alpha,
        eps_low,
        rng,
        atomic_so_far,
        max_atomic=None,
    ):
        """Execute one option.  Returns (trace, state, obs, atomic_steps_now,
        episode_done, success)."""
        p = self.params
        if max_atomic is None:
            max_atomic = p.max_atomic
        behavior = self._pick_behavior(sg, alpha, rng)
        trace = OptionTrace(sg=sg, sg_name=self.space.name(sg), behavior=behavior)
        atomic = atomic_so_far
        success = False
        done = False
        train = mode == "train"
        while True:
            frame = history[-1]
            if behavior == "random":
                a = int(rng.integers(N_ACTIONS))
            elif behavior == "proxy":
                a = self.act_proxy(frame, sg, eps_low, rng)
            else:
                a = self.act_low(frame, g, sg, eps_low, rng)
            s_hist = self.codec.stack_history(history)
            state2, _collided = self.world.step(state, Action(a))
            obs2 = self.world.observe(state2)
            history.append(self.codec.obs_vec(obs2))
            sp_hist = self.codec.stack_history(history)
            atomic += 1

            goal_reached = self.world.is_goal_state(state2, g)
            subgoal_reached = self.space.is_achieved(self.world, state2, sg)
            tr = Transition(
                s_hist=s_hist,
                sp_hist=sp_hist,
                g=g,
                sg=sg,
                a=a,
                r_e=1.0 if goal_reached else 0.0,
                r_i=1.0 if subgoal_reached else 0.0,
                goal_reached=goal_reached,
                subgoal_reached=subgoal_reached,
                valid_after=self.space.valid_mask(obs2.visible_labels),
            )
            trace.transitions.append(tr)
            trace.path.append((state2.pose.x, state2.pose.y))
            state, obs = state2, obs2
            if train:
                self.replay.push(tr)
                self.atomic_steps_total += 1
                self._maybe_train()

            if goal_reached:
                trace.stop_reason = STOP_GOAL
                done, success = True, True
                break
            if subgoal_reached:
                trace.stop_reason = STOP_SUBGOAL
                break
            if atomic >= max_atomic:
                trace.stop_reason = STOP_EPISODE_CAP
                done = True
                break
            if trace.length >= p.max_low_level:
                trace.stop_reason = STOP_STEP_CAP
                break
            if sg != self.space.random_index and not p.force_term_zero:
                tp = self.term_prob(sp_hist, g, sg)
                if mode == "eval" and p.term_threshold_eval:
                    fire = tp > 0.5
                else:
                    fire = rng.random() < tp
                if fire:
                    trace.stop_reason = STOP_TERMINATED
                    break
        return trace, state, obs, atomic, done, success

    def run_episode(
        self, spec: EpisodeSpec, mode: str = "train", episode_idx: int = 0, rng=None
    ) -> EpisodeRecord:
        if mode not in ("train", "eval"):
            raise ValueError(f"unknown mode {mode!r}")
        if rng is None:
            rng = self.rng
        p = self.params
        g = spec.goal_label
        state = self.world.reset(spec)
        history = self.codec.new_history()
        obs = self.world.observe(state)
        history.append(self.codec.obs_vec(obs))
        start = (state.pose.x, state.pose.y, int(state.pose.heading))
        record = EpisodeRecord(
            goal=g,
            goal_name=self.world.label_names[g],
            success=False,
            atomic_steps=0,
            start=start,
        )
        if self.world.is_goal_state(state, g):
            record.success = True
            record.discounted_return = 1.0
            if mode == "train":
                self.episodes_done += 1
            return record
        max_atomic = min(p.max_atomic, spec.max_atomic_steps)
        alpha = self._effective_alpha(mode, episode_idx)
        eps_h = 0.0 if mode == "eval" else float(p.eps_high.value(episode_idx))
        eps_l = 0.0 if mode == "eval" else float(p.eps_low.value(episode_idx))
        atomic = 0
        done = False
        success = False
        while not done:
            hist_vec = self.codec.stack_history(history)
            sg = self.propose_subgoal(hist_vec, g, obs.visible_labels, eps_h, rng)
            trace, state, obs, atomic, done, success = self.run_option(
                state, obs, history, g, sg, mode, alpha, eps_l, rng, atomic,
                max_atomic=max_atomic,
            )
            record.options.append(trace)
        record.success = success
        record.atomic_steps = atomic
        record.discounted_return = p.gamma**atomic if success else 0.0
        if mode == "train":
            self.episodes_done += 1
        return record

    # -- checkpoint state ----------------------------------------------------

    def get_state(self) -> dict:
        arrays = {}
        meta = {
            "atomic_steps_total": self.atomic_steps_total,
            "train_rounds": self.train_rounds,
            "episodes_done": self.episodes_done,
            "rng_state": self.rng.bit_generator.state,
        }
        nets = {
            "high": self.high,
            "high_t": self.high_t,
            "low_ext": self.low_ext,
            "low_ext_t": self.low_ext_t,
        }
        opts = {"high": self.opt_high, "low_ext": self.opt_low_ext}
        online = {"high": self.high, "low_ext": self.low_ext}
        if self.low_int is not None:
            nets["low_int"] = self.low_int
            nets["low_int_t"] = self.low_int_t
            opts["low_int"] = self.opt_low_int
            online["low_int"] = self.low_int
        for name, net in nets.items():
            for i, parr in enumerate(net.params()):
                arrays[f"net/{name}/{i}"] = parr
        for name, opt in opts.items():
            m, v, t = opt.export(online[name].params())
            for i, (mi, vi) in enumerate(zip(m, v)):
                arrays[f"opt/{name}/m{i}"] = mi
                arrays[f"opt/{name}/v{i}"] = vi
            meta[f"opt_t/{name}"] = t
        return {"arrays": arrays, "meta": meta}

    def set_state(self, state: dict) -> None:
        arrays, meta = state["arrays"], state["meta"]
        nets = {
            "high": self.high,
            "high_t": self.high_t,
            "low_ext": self.low_ext,
            "low_ext_t": self.low_ext_t,
        }
        opts = {"high": self.opt_high, "low_ext": self.opt_low_ext}
        online = {"high": self.high, "low_ext": self.low_ext}
        if self.low_int is not None:
            nets["low_int"] = self.low_int
            nets["low_int_t"] = self.low_int_t
            opts["low_int"] = self.opt_low_int
            online["low_int"] = self.low_int
        for name, net in nets.items():
            for i, parr in enumerate(net.params()):
                saved = arrays[f"net/{name}/{i}"]
                if saved.shape != parr.shape:
                    raise ValueError(
                        f"checkpoint architecture mismatch for {name} param {i}: "
                        f"{saved.shape} vs {parr.shape}"
                    )
                parr[...] = saved
        for name, opt in opts.items():
            params = online[name].params()
            t_list = meta.get(f"opt_t/{name}", [])
            if t_list:
                m = [arrays[f"opt/{name}/m{i}"] for i in range(len(params))]
                v = [arrays[f"opt/{name}/v{i}"] for i in range(len(params))]
                opt.rebind(params, m, v, t_list)
        self.atomic_steps_total = int(meta["atomic_steps_total"])
        self.train_rounds = int(meta["train_rounds"])
        self.episodes_done = int(meta["episodes_done"])
        self.rng.bit_generator.state = meta["rng_state"]
