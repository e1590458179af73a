"""ACO baseline: pheromone search for the GU visit order and for each leg on a grid graph."""

from __future__ import annotations

from collections import deque
from dataclasses import asdict, dataclass

import numpy as np

from ..scene import Scene
from .env import LinkModel, MissionConfig, PlannerResult, fly_legs
from .maps import OccupancyMap
from .rrt import PlanningError

MOVES = np.array([[1, 0], [-1, 0], [0, 1], [0, -1]])


@dataclass(frozen=True)
class AcoParams:
    ants: int = 20
    iterations: int = 30
    rho: float = 0.1  # evaporation rate
    alpha: float = 1.0  # pheromone exponent
    beta: float = 2.0  # heuristic exponent
    deposit: float = 1.0
    cell: float = 25.0  # grid graph spacing (m)
    altitude: float = 30.0  # flight level of the grid graph


def aco_tour(dist: np.ndarray, params: AcoParams, rng: np.random.Generator, start: int = 0) -> tuple[list[int], float]:
    """Open tour from ``start`` through every node; returns (order without start, cost)."""
    d = np.asarray(dist, float)
    n = len(d)
    if n == 1:
        return [], 0.0
    eta = 1.0 / np.where(d > 0, d, np.inf)
    tau = np.ones((n, n))
    best, best_cost = None, np.inf
    for _ in range(params.iterations):
        tours = []
        for _ in range(params.ants):
            here, left, cost, order = start, [k for k in range(n) if k != start], 0.0, []
            while left:
                w = tau[here, left] ** params.alpha * eta[here, left] ** params.beta
                w = w / w.sum() if w.sum() > 0 else np.full(len(left), 1 / len(left))
                nxt = left.pop(int(rng.choice(len(w), p=w)))
                cost += d[here, nxt]
                order.append(nxt)
                here = nxt
            tours.append((cost, order))
            if cost < best_cost:
                best, best_cost = order, cost
        tau *= 1 - params.rho
        for cost, order in tours:
            prev = start
            for k in order:
                tau[prev, k] += params.deposit / max(cost, 1e-12)
                prev = k
    return list(best), float(best_cost)


def grid_distances(free: np.ndarray, src: tuple[int, int]) -> np.ndarray:
    """Hop counts from ``src`` over free 4-connected cells (inf where unreachable)."""
    nx, ny = free.shape
    out = np.full((nx, ny), np.inf)
    out[src] = 0
    todo = deque([src])
    while todo:
        x, y = todo.popleft()
        for dx, dy in MOVES:
            u, v = x + dx, y + dy
            if 0 <= u < nx and 0 <= v < ny and free[u, v] and out[u, v] == np.inf:
                out[u, v] = out[x, y] + 1
                todo.append((u, v))
    return out


def aco_grid_path(
    free: np.ndarray, src: tuple[int, int], dst: tuple[int, int], params: AcoParams, rng: np.random.Generator
) -> list[tuple[int, int]]:
    """Ant walks over the free cells with heuristic 1 / (1 + Manhattan distance to ``dst``).

    Ants never revisit a cell and back out of dead ends; the shortest successful walk wins.
    """
    free = np.asarray(free, bool)
    nx, ny = free.shape
    if not (free[src] and free[dst]):
        raise PlanningError("endpoint in an occupied cell")
    if src == dst:
        return [src]
    if not np.isfinite(grid_distances(free, src)[dst]):
        raise PlanningError("grid graph is disconnected between the endpoints")
    tau = np.ones((nx, ny, 4))
    best = None
    cap = 4 * (nx + ny)
    for _ in range(params.iterations):
        walks = []
        for _ in range(params.ants):
            x, y = src
            path, seen = [(x, y)], {(x, y)}
            while path and (x, y) != dst and len(path) <= cap:
                nb = [(m, x + dx, y + dy) for m, (dx, dy) in enumerate(MOVES)
                      if 0 <= x + dx < nx and 0 <= y + dy < ny and free[x + dx, y + dy] and (x + dx, y + dy) not in seen]
                if not nb:  # dead end: step back along the own walk, keeping the cell tabu
                    path.pop()
                    if not path:
                        break
                    x, y = path[-1]
                    continue
                eta = np.array([1.0 / (1 + abs(u - dst[0]) + abs(v - dst[1])) for _, u, v in nb])
                w = tau[x, y, [m for m, _, _ in nb]] ** params.alpha * eta**params.beta
                m, x, y = nb[int(rng.choice(len(nb), p=w / w.sum()))]
                path.append((x, y))
                seen.add((x, y))
            if (x, y) == dst:
                walks.append(path)
                if best is None or len(path) < len(best):
                    best = path
        tau *= 1 - params.rho
        for path in walks:
            for (x, y), (u, v) in zip(path[:-1], path[1:]):
                m = int(np.flatnonzero((MOVES == (u - x, v - y)).all(axis=1))[0])
                tau[x, y, m] += params.deposit / len(path)
    if best is None:
        raise PlanningError("no ant reached the goal")
    return best


def _free_grid(occ: OccupancyMap, bounds, cell: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Coarse free mask: a cell is free only if no fine occupied sample falls inside it."""
    nx = int(np.ceil(bounds[0] / cell))
    ny = int(np.ceil(bounds[1] / cell))
    xs = (np.arange(nx) + 0.5) * cell
    ys = (np.arange(ny) + 0.5) * cell
    fine = max(occ.cell / 2, 0.5)
    k = int(np.ceil(cell / fine))
    off = (np.arange(k) + 0.5) * cell / k - cell / 2
    gx, gy, ox, oy = np.meshgrid(xs, ys, off, off, indexing="ij")
    pts = np.stack([gx + ox, gy + oy], axis=-1)
    return ~occ.occupied(pts).any(axis=(2, 3)), xs, ys


def _nearest_free(free: np.ndarray, xs, ys, xy) -> tuple[int, int]:
    cand = np.argwhere(free)
    d = (xs[cand[:, 0]] - xy[0]) ** 2 + (ys[cand[:, 1]] - xy[1]) ** 2
    return tuple(int(v) for v in cand[int(np.argmin(d))])


def plan_aco(
    occ: OccupancyMap,
    scene: Scene,
    link: LinkModel,
    mission: MissionConfig,
    seed: int,
    params: AcoParams = AcoParams(),
) -> PlannerResult:
    """ACO visit order over grid-graph distances, ACO walks for each leg, flown at ``params.altitude``."""
    rng = np.random.default_rng(seed)
    free, xs, ys = _free_grid(occ.inflated(mission.margin), scene.bounds, params.cell)
    if not free.any():
        raise PlanningError("no free cell in the grid graph")
    start = _nearest_free(free, xs, ys, mission.start)
    goals = [_nearest_free(free, xs, ys, u[:2]) for u in scene.user_positions]
    nodes = [start] + goals
    dist = np.array([[grid_distances(free, a)[b] for b in nodes] for a in nodes])
    if not np.isfinite(dist).all():
        raise PlanningError("grid graph is disconnected between start and goals")
    order, _ = aco_tour(dist, params, rng, start=0)
    z = params.altitude
    legs = [(np.array([[xs[start[0]], ys[start[1]], z]]), -1)]
    here = start
    hops = 0
    for node in order:
        cells = aco_grid_path(free, here, nodes[node], params, rng)
        hops += len(cells) - 1
        legs.append((np.array([[xs[i], ys[j], z] for i, j in cells[1:] or cells]), node - 1))
        here = nodes[node]
    return fly_legs(legs, scene, link, mission, planner="aco",
                    meta={"seed": seed, "order": [k - 1 for k in order], "hops": hops, **asdict(params)})
