"""Mission environment: UAV kinematics on a 3-D lattice, GU scheduling and downlink service."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field, replace

import numpy as np

from ..channel import LinkBudget, achievable_rate, link_snr
from ..scene import Scene, collides, segments_blocked

# velocity directions; ascend/descend are the vertical pair, index 6 hovers
ACTIONS = np.array(
    [[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1], [0, 0, 0]], dtype=float
)
ACTION_NAMES = ("east", "west", "north", "south", "ascend", "descend", "hover")
HOVER = 6


@dataclass(frozen=True)
class MissionConfig:
    speed: float = 40.0  # m/s, also the cap
    dt: float = 0.25  # s
    start: tuple[float, float, float] = (20.0, 20.0, 20.0)
    z_min: float = 10.0
    z_max: float = 150.0
    margin: float = 2.0  # safety clearance to buildings (m)
    time_limit: float = 120.0  # s
    w_bits: float = 1.0  # reward per Mbit delivered
    w_time: float = 1.0  # penalty per second
    w_collision: float = 50.0

    @property
    def step_len(self) -> float:
        return self.speed * self.dt

    @property
    def max_steps(self) -> int:
        return int(round(self.time_limit / self.dt))


class LinkModel:
    """Downlink rate (bit/s) from the UAV to a ground user."""

    def rate(self, uav, gu, scene: Scene) -> float:  # pragma: no cover - interface
        raise NotImplementedError


@dataclass(frozen=True)
class ConstantRateLink(LinkModel):
    value: float

    def rate(self, uav, gu, scene) -> float:
        return self.value


@dataclass
class BudgetLink(LinkModel):
    """Shannon rate over the imaging/communication band, LoS from true geometry.

    Links blocked by a building, or arriving below ``min_elevation_deg`` (shadowed by
    low clutter that the box model does not carry), suffer the configured excess loss;
    below ``outage_snr_db`` the rate is 0. LoS tests are cached per (position, GU) so
    lattice rollouts stay cheap.
    """

    budget: LinkBudget = LinkBudget()
    bandwidth: float = 144e6
    nlos_excess_db: float = 30.0
    outage_snr_db: float = 0.0
    min_elevation_deg: float = 15.0
    # per-scene LoS memo; holding the scene keeps its id from being reused
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def los(self, uav, gu, scene: Scene) -> bool:
        memo = self._cache.setdefault(id(scene), (scene, {}))[1]
        key = (tuple(np.round(np.asarray(uav, float), 3)), tuple(np.round(np.asarray(gu, float), 3)))
        hit = memo.get(key)
        if hit is None:
            a, b = np.asarray(uav, float), np.asarray(gu, float)
            dz = abs(a[2] - b[2])
            elev = np.degrees(np.arctan2(dz, float(np.hypot(a[0] - b[0], a[1] - b[1]))))
            hit = elev >= self.min_elevation_deg and not bool(segments_blocked(a, b, scene))
            memo[key] = hit
        return hit

    def rate(self, uav, gu, scene: Scene) -> float:
        d = float(np.linalg.norm(np.asarray(uav, float) - np.asarray(gu, float)))
        snr = link_snr(self.budget, max(d, 1.0), self.los(uav, gu, scene), self.bandwidth, self.nlos_excess_db)
        if 10 * np.log10(snr) < self.outage_snr_db:
            return 0.0
        return achievable_rate(snr, self.bandwidth)


@dataclass(frozen=True)
class MissionState:
    uav_position: np.ndarray
    uav_velocity: np.ndarray
    remaining_bits: np.ndarray
    elapsed: float = 0.0
    collided: bool = False
    known_occupancy: np.ndarray | None = None

    @property
    def done(self) -> bool:
        return self.collided or not np.any(self.remaining_bits > 0)


def initial_state(scene: Scene, cfg: MissionConfig) -> MissionState:
    return MissionState(
        uav_position=np.asarray(cfg.start, dtype=float),
        uav_velocity=np.zeros(3),
        remaining_bits=np.array([u.remaining_bits for u in scene.users], dtype=float),
    )


def scheduled_user(position, remaining: np.ndarray, scene: Scene) -> int:
    """GU with the most remaining bits, nearest first on ties; -1 when all are served."""
    if not np.any(remaining > 0):
        return -1
    top = np.flatnonzero(remaining == remaining.max())
    d = np.linalg.norm(scene.user_positions[top] - np.asarray(position, float), axis=1)
    return int(top[np.argmin(d)])


def serve(position, remaining: np.ndarray, scene: Scene, link: LinkModel, dt: float) -> tuple[np.ndarray, int, float]:
    """One scheduling slot at ``position``: returns (new remaining, GU id, bits delivered)."""
    k = scheduled_user(position, remaining, scene)
    if k < 0:
        return remaining, k, 0.0
    bits = min(float(remaining[k]), link.rate(position, scene.user_positions[k], scene) * dt)
    out = remaining.copy()
    out[k] -= bits
    if out[k] < 1e-6:
        out[k] = 0.0
    return out, k, bits


def env_step(
    s: MissionState, action: int, scene: Scene, link: LinkModel, cfg: MissionConfig
) -> tuple[MissionState, float]:
    """Move for ``cfg.dt`` at full speed along ``ACTIONS[action]``, then serve the scheduled GU.

    Leaving the altitude band is refused (the UAV holds position). A collision with the
    true geometry ends the episode with the collision penalty and no service.
    """
    v = ACTIONS[action] * cfg.speed
    p = s.uav_position + v * cfg.dt
    if p[2] < cfg.z_min - 1e-9 or p[2] > cfg.z_max + 1e-9:
        p, v = s.uav_position.copy(), np.zeros(3)
    t = s.elapsed + cfg.dt
    if collides(p, scene, cfg.margin):
        ns = replace(s, uav_position=p, uav_velocity=v, elapsed=t, collided=True)
        return ns, -cfg.w_time * cfg.dt - cfg.w_collision
    rem, _, bits = serve(p, s.remaining_bits, scene, link, cfg.dt)
    ns = replace(s, uav_position=p, uav_velocity=v, remaining_bits=rem, elapsed=t)
    return ns, cfg.w_bits * bits / 1e6 - cfg.w_time * cfg.dt


@dataclass
class PlannerResult:
    trajectory: np.ndarray  # (T, 5): t, x, y, z, served_bits_total
    completion_time: float
    collisions: int
    served: np.ndarray  # per-GU bits delivered
    completed: bool
    planner: str = ""
    meta: dict = field(default_factory=dict)

    @property
    def time_limited(self) -> bool:
        return not self.completed


def trajectory_csv(res: PlannerResult) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("t", "x", "y", "z", "served_bits_total"))
    for row in res.trajectory:
        w.writerow([f"{row[0]:.2f}", f"{row[1]:.3f}", f"{row[2]:.3f}", f"{row[3]:.3f}", f"{row[4]:.0f}"])
    return buf.getvalue()


def resample_path(waypoints, speed: float, dt: float) -> np.ndarray:
    """Positions every ``dt`` when flying the polyline at constant ``speed`` (last point repeated once reached)."""
    w = np.asarray(waypoints, dtype=float)
    if len(w) == 1:
        return w.copy()
    seg = np.linalg.norm(np.diff(w, axis=0), axis=1)
    s = np.concatenate([[0.0], np.cumsum(seg)])
    n = int(np.ceil(s[-1] / (speed * dt) - 1e-9))
    q = np.minimum(speed * dt * np.arange(n + 1), s[-1])
    return np.column_stack([np.interp(q, s, w[:, k]) for k in range(3)])


def fly_positions(
    positions, scene: Scene, link: LinkModel, cfg: MissionConfig, *, hover_until_done: bool = True, planner: str = ""
) -> PlannerResult:
    """Replay a position sequence sampled every ``cfg.dt`` with the mission's service model.

    ``positions[0]`` is the start (t = 0). After the last sample the UAV hovers until every
    payload is served or the time limit expires.
    """
    pos = np.asarray(positions, dtype=float)
    s = initial_state(scene, cfg)
    rem = s.remaining_bits
    demanded = rem.copy()
    rows = [(0.0, *pos[0], 0.0)]
    collisions = 0
    t = 0.0
    i = 1
    completion = np.nan
    if not np.any(rem > 0):
        completion = 0.0
    while np.isnan(completion) and t < cfg.time_limit - 1e-9:
        if i < len(pos):
            p = pos[i]
            i += 1
        elif hover_until_done:
            p = rows[-1][1:4]
        else:
            break
        t += cfg.dt
        if np.linalg.norm(np.asarray(p) - np.asarray(rows[-1][1:4])) > cfg.speed * cfg.dt + 1e-6:
            raise ValueError("position sequence exceeds the speed cap")
        if collides(p, scene, cfg.margin):
            collisions += 1
            rows.append((t, *p, float((demanded - rem).sum())))
            break
        rem, _, _ = serve(p, rem, scene, link, cfg.dt)
        rows.append((t, *p, float((demanded - rem).sum())))
        if not np.any(rem > 0):
            completion = t
    done = not np.isnan(completion)
    return PlannerResult(
        trajectory=np.array(rows),
        completion_time=float(completion) if done else float(t),
        collisions=collisions,
        served=demanded - rem,
        completed=done and collisions == 0,
        planner=planner,
    )


def fly_legs(
    legs, scene: Scene, link: LinkModel, cfg: MissionConfig, *, planner: str = "", meta: dict | None = None
) -> PlannerResult:
    """Fly polyline legs in order, hovering at the end of each until its GU is served.

    ``legs`` is a sequence of (waypoints, gu_index). Each leg's first waypoint should be
    the previous leg's last. The run stops once every payload is served, on a collision,
    or at the time limit.
    """
    pos = [np.asarray(cfg.start, float)]
    hold = []  # GU to wait for at each sample (-1: none)
    for pts, k in legs:
        seq = resample_path(np.vstack([pos[-1], np.asarray(pts, float)]), cfg.speed, cfg.dt)[1:]
        if len(seq) == 0:  # already there: one hover sample
            seq = pos[-1][None]
        pos.extend(seq)
        hold.extend([-1] * (len(seq) - 1) + [k])
    s = initial_state(scene, cfg)
    rem = s.remaining_bits
    demanded = rem.copy()
    rows = [(0.0, *pos[0], 0.0)]
    t, i, collisions = 0.0, 1, 0
    done = not np.any(rem > 0)
    while not done and t < cfg.time_limit - 1e-9:
        p = pos[min(i, len(pos) - 1)]
        t += cfg.dt
        if collides(p, scene, cfg.margin):
            collisions += 1
            rows.append((t, *p, float((demanded - rem).sum())))
            break
        rem, _, _ = serve(p, rem, scene, link, cfg.dt)
        rows.append((t, *p, float((demanded - rem).sum())))
        done = not np.any(rem > 0)
        if i < len(pos) and (hold[i - 1] < 0 or rem[hold[i - 1]] <= 0):
            i += 1
    return PlannerResult(
        trajectory=np.array(rows),
        completion_time=float(t),
        collisions=collisions,
        served=demanded - rem,
        completed=done and collisions == 0,
        planner=planner,
        meta=dict(meta or {}),
    )
