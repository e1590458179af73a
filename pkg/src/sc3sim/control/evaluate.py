"""Greedy rollouts and replays in the true environment."""

from __future__ import annotations

import numpy as np

from ..scene import Scene
from .env import LinkModel, MissionConfig, PlannerResult, env_step, fly_positions, initial_state
from .rl import Policy


def evaluate(policy: Policy, scene: Scene, link: LinkModel, mission: MissionConfig) -> PlannerResult:
    """Greedy rollout until every payload is served, a collision, or the time limit."""
    s = initial_state(scene, mission)
    demanded = s.remaining_bits.copy()
    rows = [(0.0, *s.uav_position, 0.0)]
    while not s.done and s.elapsed < mission.time_limit - 1e-9:
        s, _ = env_step(s, policy.act(s, scene), scene, link, mission)
        rows.append((s.elapsed, *s.uav_position, float((demanded - s.remaining_bits).sum())))
    return PlannerResult(
        trajectory=np.array(rows),
        completion_time=float(s.elapsed),
        collisions=int(s.collided),
        served=demanded - s.remaining_bits,
        completed=s.done and not s.collided,
        planner="rl",
        meta=dict(policy.meta),
    )


def replay(result: PlannerResult, scene: Scene, link: LinkModel, mission: MissionConfig) -> PlannerResult:
    """Fly a stored trajectory again (no extra hovering) to re-derive its service record."""
    return fly_positions(result.trajectory[:, 1:4], scene, link, mission, hover_until_done=False, planner=result.planner)


def first_time_above(result: PlannerResult, height: float) -> float:
    """Earliest timestamp with altitude strictly above ``height`` (inf if never)."""
    hit = np.flatnonzero(result.trajectory[:, 3] > height)
    return float(result.trajectory[hit[0], 0]) if hit.size else float("inf")
