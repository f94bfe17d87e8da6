"""Evaluation protocol and metrics: SR, AS/MS, SPL, AR.

Path lengths count atomic actions, turns included.  An episode that starts
at a goal state has minimal length 0 and contributes its success indicator
to SPL.  AS and MS aggregate over the successful episodes only, so they are
absent when nothing succeeded.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .gridworld import AgentPose, EpisodeSpec, Heading, World

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class EpisodeResult:
    success: bool
    steps: int
    minimal_steps: int
    goal_label: int
    seed: int


@dataclass(frozen=True)
class MetricsReport:
    sr: float
    avg_steps: Optional[float]  # over successes; None when no successes
    min_steps: Optional[float]
    spl: float
    ar: float
    n: int

    def as_row(self) -> dict:
        return {
            "SR": self.sr,
            "AS": self.avg_steps,
            "MS": self.min_steps,
            "SPL": self.spl,
            "AR": self.ar,
            "N": self.n,
        }


def compute_spl(results) -> float:
    """(1/N) * sum S_i * l_i / max(l_i, p_i); an l_i = 0 episode contributes
    its success indicator."""
    results = list(results)
    if not results:
        raise ValueError("no results")
    total = 0.0
    for r in results:
        if not r.success:
            continue
        if r.minimal_steps == 0:
            total += 1.0
        else:
            total += r.minimal_steps / max(r.minimal_steps, r.steps)
    return total / len(results)


def compute_ar(results, gamma: float) -> float:
    """(1/N) * sum 1(success) * gamma^steps."""
    if not 0.0 < gamma <= 1.0:
        raise ValueError("gamma must be in (0, 1]")
    results = list(results)
    if not results:
        raise ValueError("no results")
    return sum(gamma**r.steps for r in results if r.success) / len(results)


def aggregate(results, gamma: float) -> MetricsReport:
    results = list(results)
    succ = [r for r in results if r.success]
    return MetricsReport(
        sr=len(succ) / len(results),
        avg_steps=float(np.mean([r.steps for r in succ])) if succ else None,
        min_steps=float(np.mean([r.minimal_steps for r in succ])) if succ else None,
        spl=compute_spl(results),
        ar=compute_ar(results, gamma),
        n=len(results),
    )


def sample_episode_specs(
    world: World, n_episodes: int, seed: int, max_atomic_steps: int = 500
):
    """Seeded random (start pose, goal label) pairs; unreachable pairs are
    resampled (and logged)."""
    rng = np.random.default_rng(seed)
    cells = world.free_cells()
    labels = world.labels_present()
    if not labels:
        raise ValueError("map has no objects")
    specs = []
    while len(specs) < n_episodes:
        cell = cells[rng.integers(len(cells))]
        heading = Heading(int(rng.integers(4)))
        goal = labels[rng.integers(len(labels))]
        pose = AgentPose(cell[0], cell[1], heading)
        minimal = world.shortest_path_to_label(pose, goal)
        if minimal is None:
            log.info("resampling unreachable pair start=%s goal=%s", pose, goal)
            continue
        specs.append(
            (
                EpisodeSpec(
                    start=pose,
                    goal_label=goal,
                    seed=int(rng.integers(2**31)),
                    max_atomic_steps=max_atomic_steps,
                ),
                minimal,
            )
        )
    return specs


def evaluate(agent, world: World, n_episodes: int, seed: int, gamma: float = 0.99,
             max_atomic_steps: int = 500):
    """Run eval-mode episodes over seeded (start, goal) pairs.  Returns
    (MetricsReport, [EpisodeResult], [EpisodeRecord])."""
    if n_episodes < 1:
        raise ValueError("need at least one episode")
    specs = sample_episode_specs(world, n_episodes, seed, max_atomic_steps)
    results = []
    records = []
    for spec, minimal in specs:
        rng = np.random.default_rng(spec.seed)
        record = agent.run_episode(spec, mode="eval", rng=rng)
        results.append(
            EpisodeResult(
                success=record.success,
                steps=record.atomic_steps,
                minimal_steps=minimal,
                goal_label=spec.goal_label,
                seed=spec.seed,
            )
        )
        records.append(record)
    return aggregate(results, gamma), results, records
