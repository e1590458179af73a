"""RRT baseline: conservative low-altitude legs between GUs in nearest-neighbour order."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from ..scene import Scene
from .env import LinkModel, MissionConfig, PlannerResult, fly_legs
from .maps import OccupancyMap


class PlanningError(RuntimeError):
    """No feasible plan within the search budget (or the graph is disconnected)."""


@dataclass(frozen=True)
class RrtParams:
    step: float = 10.0  # tree extension length (m)
    goal_bias: float = 0.1
    max_nodes: int = 20_000
    z_band: tuple[float, float] = (15.0, 45.0)  # sampling altitudes
    cruise_z: float = 30.0  # altitude of the goal above each GU
    goal_tol: float = 5.0
    shortcut: bool = True


def _segment_ok(occ: OccupancyMap, a, b, band) -> bool:
    lo, hi = band
    if not (lo - 1e-9 <= a[2] <= hi + 1e-9 and lo - 1e-9 <= b[2] <= hi + 1e-9):
        return False
    return occ.segment_free(a, b)


def shortcut_path(path: np.ndarray, occ: OccupancyMap, band) -> np.ndarray:
    """Greedy pruning: from each kept vertex jump to the farthest directly reachable one."""
    out = [path[0]]
    i = 0
    while i < len(path) - 1:
        j = len(path) - 1
        while j > i + 1 and not _segment_ok(occ, path[i], path[j], band):
            j -= 1
        out.append(path[j])
        i = j
    return np.array(out)


def rrt_path(occ: OccupancyMap, start, goal, lo, hi, params: RrtParams, rng: np.random.Generator) -> np.ndarray:
    """Waypoints from ``start`` to ``goal`` (both included) inside the box [lo, hi]."""
    start = np.asarray(start, float)
    goal = np.asarray(goal, float)
    lo = np.asarray(lo, float)
    hi = np.asarray(hi, float)
    band = (lo[2], hi[2])
    if occ.occupied(start[:2]) or occ.occupied(goal[:2]):
        raise PlanningError("start or goal lies in occupied space")
    if _segment_ok(occ, start, goal, band):
        return np.array([start, goal])
    nodes = np.empty((params.max_nodes, 3))
    parent = np.full(params.max_nodes, -1, dtype=int)
    nodes[0] = start
    n = 1
    while n < params.max_nodes:
        target = goal if rng.random() < params.goal_bias else rng.uniform(lo, hi)
        d = np.linalg.norm(nodes[:n] - target, axis=1)
        near = int(np.argmin(d))
        if d[near] < 1e-9:
            continue
        new = nodes[near] + (target - nodes[near]) * min(1.0, params.step / d[near])
        if not _segment_ok(occ, nodes[near], new, band):
            continue
        nodes[n] = new
        parent[n] = near
        n += 1
        if np.linalg.norm(new - goal) <= params.goal_tol or (
            np.linalg.norm(new - goal) <= params.step and _segment_ok(occ, new, goal, band)
        ):
            chain = [n - 1]
            while parent[chain[-1]] >= 0:
                chain.append(parent[chain[-1]])
            path = np.vstack([nodes[chain[::-1]], goal])
            return shortcut_path(path, occ, band) if params.shortcut else path
    raise PlanningError(f"no path after {params.max_nodes} nodes")


def nearest_neighbor_order(start, points) -> list[int]:
    pts = np.asarray(points, float)
    left = list(range(len(pts)))
    here = np.asarray(start, float)[: pts.shape[1]]
    order = []
    while left:
        d = [np.linalg.norm(pts[k] - here) for k in left]
        k = left.pop(int(np.argmin(d)))
        order.append(k)
        here = pts[k]
    return order


def plan_rrt(
    occ: OccupancyMap,
    scene: Scene,
    link: LinkModel,
    mission: MissionConfig,
    seed: int,
    params: RrtParams = RrtParams(),
) -> PlannerResult:
    """Plan on ``occ`` (inflated by the mission margin), then fly it in the true ``scene``.

    Goals sit ``cruise_z`` above each GU; the UAV hovers at each goal until that GU's
    payload is served.
    """
    rng = np.random.default_rng(seed)
    occ = occ.inflated(mission.margin)
    lo = np.array([0.0, 0.0, params.z_band[0]])
    hi = np.array([scene.bounds[0], scene.bounds[1], params.z_band[1]])
    start = np.asarray(mission.start, float)
    here = np.array([start[0], start[1], np.clip(start[2], *params.z_band)])
    legs = [(np.array([here]), -1)]  # climb or descend into the band first
    order = nearest_neighbor_order(here[:2], scene.user_positions[:, :2])
    nodes = 0
    for k in order:
        g = scene.user_positions[k].copy()
        g[2] = params.cruise_z
        path = rrt_path(occ, here, g, lo, hi, params, rng)
        nodes += len(path)
        legs.append((path[1:], k))
        here = g
    return fly_legs(legs, scene, link, mission, planner="rrt",
                    meta={"seed": seed, "order": order, "waypoints": nodes, **asdict(params)})
