"""Tabular Q-learning over coarse (offset-to-scheduled-GU cell, altitude layer) states.

Horizontal offsets are binned in ``cell``-sized steps, so one table is shared by every
GU in turn; the scheduler decides which GU the offset refers to.
"""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from ..scene import Scene
from .env import ACTIONS, HOVER, LinkModel, MissionConfig, MissionState, env_step, initial_state, scheduled_user

log = logging.getLogger(__name__)


class DivergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class RlConfig:
    episodes: int = 1500
    alpha: float = 0.3
    gamma: float = 0.98
    eps_start: float = 1.0
    eps_end: float = 0.05
    eps_decay_frac: float = 0.7  # fraction of episodes over which epsilon decays linearly
    cell: float = 25.0  # horizontal cell size (m)
    radius_cells: int = 24  # offsets beyond this many cells are clipped
    layers: int = 4
    episode_time: float | None = None  # per-episode time cap during training; None = mission limit
    value_bound: float = 1e6
    # potential-based shaping weight (training only; leaves the optimal policy unchanged)
    shaping: float = 1.0


@dataclass
class Policy:
    q: np.ndarray  # [dx cell, dy cell, layer, action]
    cfg: RlConfig
    mission: MissionConfig
    bounds: tuple[float, float]
    meta: dict = field(default_factory=dict)
    min_elevation_deg: float = 0.0  # service-cone angle used by the shaping potential

    def state_index(self, position, remaining: np.ndarray, scene: Scene) -> tuple[int, int, int]:
        return discretize(position, remaining, scene, self.cfg, self.mission)

    def scores(self, position, remaining, scene) -> np.ndarray:
        """Q row of the state; a never-updated row falls back to the shaping potential
        one step ahead, which is the value prior that shaping stands for."""
        row = self.q[self.state_index(position, remaining, scene)]
        if row.any() or self.cfg.shaping == 0.0:
            return row
        p = np.asarray(position, float)
        ahead = p + ACTIONS * self.mission.step_len
        off_band = (ahead[:, 2] < self.mission.z_min - 1e-9) | (ahead[:, 2] > self.mission.z_max + 1e-9)
        ahead[off_band] = p
        return np.array(
            [service_potential(a, remaining, scene, self.mission, self.min_elevation_deg) for a in ahead]
        )

    def act(self, s: MissionState, scene: Scene) -> int:
        """Greedy action; ties go to the lowest action index."""
        return int(np.argmax(self.scores(s.uav_position, s.remaining_bits, scene)))


def discretize(position, remaining, scene: Scene, cfg: RlConfig, mission: MissionConfig) -> tuple[int, int, int]:
    """(dx cell, dy cell, layer) of the scheduled GU relative to the UAV; (R, R, layer) when all are served."""
    x, y, z = position
    span = (mission.z_max - mission.z_min) / cfg.layers
    layer = min(max(int((z - mission.z_min) // span), 0), cfg.layers - 1)
    r = cfg.radius_cells
    k = scheduled_user(position, remaining, scene)
    if k < 0:
        return r, r, layer
    gx, gy, _ = scene.user_positions[k]
    # offsets are binned symmetrically around zero: cell 0 spans (-cell/2, cell/2)
    cx = int(np.clip(np.floor((gx - x) / cfg.cell + 0.5), -r, r)) + r
    cy = int(np.clip(np.floor((gy - y) / cfg.cell + 0.5), -r, r)) + r
    return cx, cy, layer


def service_potential(position, remaining, scene: Scene, mission: MissionConfig, min_elevation_deg: float) -> float:
    """Minus the flight time until the scheduled GU sits inside the UAV's service cone.

    The cone has half-angle ``90 - min_elevation_deg`` degrees, so climbing widens it.
    """
    k = scheduled_user(position, remaining, scene)
    if k < 0 or min_elevation_deg <= 0:
        return 0.0
    p = np.asarray(position, float)
    g = scene.user_positions[k]
    reach = (p[2] - g[2]) / np.tan(np.radians(min_elevation_deg))
    gap = max(float(np.hypot(*(g[:2] - p[:2]))) - reach, 0.0)
    return -mission.w_time * gap / mission.speed


@dataclass
class TrainingRecord:
    episode: int
    completion_time: float  # the episode's time cap when it did not complete
    ret: float
    completed: bool


def train_rl(
    scene: Scene, link: LinkModel, mission: MissionConfig, cfg: RlConfig, seed: int
) -> tuple[Policy, list[TrainingRecord]]:
    """Epsilon-greedy Q-learning in the true environment; deterministic given ``seed``."""
    rng = np.random.default_rng(seed)
    side = 2 * cfg.radius_cells + 1
    q = np.zeros((side, side, cfg.layers, len(ACTIONS)))
    elev = float(getattr(link, "min_elevation_deg", 0.0))
    pol = Policy(q=q, cfg=cfg, mission=mission, bounds=scene.bounds, meta={"seed": seed, **asdict(cfg)},
                 min_elevation_deg=elev)
    steps_cap = int(round((cfg.episode_time or mission.time_limit) / mission.dt))
    decay_eps = max(1, int(cfg.episodes * cfg.eps_decay_frac))

    def phi(st: MissionState) -> float:
        if st.done or cfg.shaping == 0.0:
            return 0.0
        return cfg.shaping * service_potential(st.uav_position, st.remaining_bits, scene, mission, elev)

    curve = []
    for ep in range(cfg.episodes):
        eps = cfg.eps_end + (cfg.eps_start - cfg.eps_end) * max(0.0, 1.0 - ep / decay_eps)
        s = initial_state(scene, mission)
        si = pol.state_index(s.uav_position, s.remaining_bits, scene)
        ret = 0.0
        pot = phi(s)
        for _ in range(steps_cap):
            if rng.random() < eps:
                a = int(rng.integers(len(ACTIONS)))
            else:
                a = int(np.argmax(q[si]))
            s2, r = env_step(s, a, scene, link, mission)
            ret += r
            pot2 = phi(s2)
            shaped = r + cfg.gamma * pot2 - pot
            if s2.done:
                target = shaped
            else:
                si2 = pol.state_index(s2.uav_position, s2.remaining_bits, scene)
                target = shaped + cfg.gamma * q[si2].max()
            q[si + (a,)] += cfg.alpha * (target - q[si + (a,)])
            if abs(q[si + (a,)]) > cfg.value_bound:
                raise DivergenceError(f"Q value {q[si + (a,)]:.3g} exceeded bound at episode {ep}")
            s, pot = s2, pot2
            if s.done:
                break
            si = si2
        completed = s.done and not s.collided
        curve.append(TrainingRecord(ep, s.elapsed if completed else steps_cap * mission.dt, ret, completed))
    pol.meta["episodes_completed"] = int(sum(c.completed for c in curve))
    return pol, curve


def training_curve_csv(curve: list[TrainingRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("episode", "completion_time", "return"))
    for c in curve:
        w.writerow([c.episode, f"{c.completion_time:.2f}", f"{c.ret:.4f}"])
    return buf.getvalue()


__all__ = ["DivergenceError", "HOVER", "Policy", "RlConfig", "TrainingRecord", "discretize", "service_potential", "train_rl", "training_curve_csv"]
