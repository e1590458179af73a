import itertools
import math
from collections import deque
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sc3sim.control import (
    ACTIONS,
    HOVER,
    AcoParams,
    BudgetLink,
    ConstantRateLink,
    DivergenceError,
    MissionConfig,
    OccupancyMap,
    PlanningError,
    Policy,
    RlConfig,
    RrtParams,
    aco_grid_path,
    aco_tour,
    env_step,
    evaluate,
    first_time_above,
    fly_legs,
    fly_positions,
    grid_distances,
    initial_state,
    plan_aco,
    plan_rrt,
    replay,
    resample_path,
    rrt_path,
    scheduled_user,
    train_rl,
)
from sc3sim.scene import Building, GroundUser, Scene

OPEN = Scene((200.0, 200.0), (), (GroundUser((150.0, 150.0, 0.0)),))
MISSION = MissionConfig()


def _path_len(path):
    return float(np.linalg.norm(np.diff(np.asarray(path)[:, :3], axis=0), axis=1).sum())


# -- environment ------------------------------------------------------------------


def test_env_step_kinematics_and_reward():
    s = initial_state(OPEN, MISSION)
    link = ConstantRateLink(4e6)
    s2, r = env_step(s, 0, OPEN, link, MISSION)
    assert np.allclose(s2.uav_position, (30, 20, 20))
    assert np.allclose(s2.uav_velocity, (40, 0, 0))
    assert s2.elapsed == 0.25
    assert s2.remaining_bits[0] == pytest.approx(10e6 - 1e6)
    assert r == pytest.approx(1.0 - 0.25)


def test_env_step_refuses_leaving_altitude_band():
    s = replace(initial_state(OPEN, MISSION), uav_position=np.array([50.0, 50.0, 15.0]))
    s2, _ = env_step(s, 5, OPEN, ConstantRateLink(0.0), MISSION)
    assert np.allclose(s2.uav_position, (50, 50, 15)) and not s2.uav_velocity.any()


def test_collision_ends_episode_with_penalty():
    wall = Scene((200.0, 200.0), (Building((33.0, 20.0), 4.0, 100.0, 60.0),), OPEN.users)
    s2, r = env_step(initial_state(wall, MISSION), 0, wall, ConstantRateLink(1e6), MISSION)
    assert s2.collided and s2.done
    assert r == pytest.approx(-0.25 - 50.0)
    assert s2.remaining_bits[0] == 10e6


def test_scheduler_prefers_most_remaining_then_nearest():
    sc = Scene((100.0, 100.0), (), (GroundUser((90.0, 0, 0)), GroundUser((10.0, 0, 0)), GroundUser((50.0, 0, 0), 10e6, 5e6)))
    rem = np.array([10e6, 10e6, 5e6])
    assert scheduled_user((0, 0, 0), rem, sc) == 1
    assert scheduled_user((0, 0, 0), np.array([0.0, 1.0, 5.0]), sc) == 2
    assert scheduled_user((0, 0, 0), np.zeros(3), sc) == -1


@given(st.integers(1, 5), st.floats(1e5, 2e7), st.floats(1e5, 5e7))
def test_constant_rate_service_time_closed_form(n_users, bits, rate):
    users = tuple(GroundUser((10.0 * i, 5.0, 0.0), bits, bits) for i in range(n_users))
    sc = Scene((100.0, 100.0), (), users)
    res = fly_positions([MISSION.start], sc, ConstantRateLink(rate), replace(MISSION, time_limit=1e4))
    slots = n_users * math.ceil(bits / (rate * MISSION.dt) - 1e-9)
    assert res.completed
    assert res.completion_time == pytest.approx(slots * MISSION.dt)


def test_zero_payload_completes_immediately():
    sc = Scene((100.0, 100.0), (), (GroundUser((5.0, 5.0, 0.0), 0.0, 0.0),))
    assert fly_positions([MISSION.start], sc, ConstantRateLink(0.0), MISSION).completion_time == 0.0


def test_budget_link_elevation_rule():
    link = BudgetLink()
    g = (0.0, 0.0, 0.0)
    assert link.los((100.0, 0.0, 30.0), g, OPEN)  # 16.7 degrees
    assert not link.los((100.0, 0.0, 25.0), g, OPEN)  # 14.0 degrees
    assert link.rate((100.0, 0.0, 30.0), g, OPEN) > link.rate((100.0, 0.0, 25.0), g, OPEN)


def test_resample_and_speed_cap():
    pts = resample_path([(0, 0, 0), (25, 0, 0)], 40.0, 0.25)
    assert np.allclose(pts[:, 0], [0, 10, 20, 25])
    with pytest.raises(ValueError):
        fly_positions([(0, 0, 20), (50, 0, 20)], OPEN, ConstantRateLink(0.0), MISSION)


def test_fly_legs_holds_until_served_and_handles_empty_leg():
    link = ConstantRateLink(10e6)  # 2.5 Mbit per slot, 4 slots per GU
    start = np.array(MISSION.start)
    res = fly_legs([(start[None], -1), (np.array([start + (10, 0, 0)]), 0)], OPEN, link, MISSION)
    assert res.completed
    assert res.completion_time == pytest.approx(1.0)


# -- occupancy maps ---------------------------------------------------------------


def test_occupancy_from_scene_covers_partial_cells():
    sc = Scene((20.0, 20.0), (Building((10.0, 10.0), 3.0, 3.0, 5.0),))
    occ = OccupancyMap.from_scene(sc, 2.0)
    assert occ.mask.sum() == 4  # [8.5, 11.5] touches cells 4 and 5 per axis
    assert occ.occupied(np.array([10.0, 10.0]))
    assert occ.occupied(np.array([-1.0, 5.0]))
    assert occ.inflated(2.0).mask.sum() == 16
    assert not occ.segment_free((0, 10), (20, 10))
    assert occ.segment_free((0, 1), (19, 1))


# -- RRT ---------------------------------------------------------------------------


@given(st.integers(0, 2**31 - 1))
def test_rrt_free_space_is_near_straight(seed):
    rng = np.random.default_rng(seed)
    occ = OccupancyMap(np.zeros((100, 100), bool), cell=2.0)
    a = np.array([*rng.uniform(5, 195, 2), 30.0])
    b = np.array([*rng.uniform(5, 195, 2), 30.0])
    path = rrt_path(occ, a, b, np.array([0, 0, 15.0]), np.array([200, 200, 45.0]), RrtParams(), rng)
    assert np.allclose(path[0], a) and np.allclose(path[-1], b)
    assert _path_len(path) <= 1.3 * np.linalg.norm(b - a) + 1e-9


def _maze():
    """Two staggered walls forcing an S-shaped route."""
    m = np.zeros((50, 50), bool)
    m[15:17, :40] = True
    m[33:35, 10:] = True
    return m


def _bfs_length(mask, cell, a, b):
    """8-connected grid shortest path length (m) between cell centers."""
    src, dst = tuple(int(v // cell) for v in a[:2]), tuple(int(v // cell) for v in b[:2])
    dist = np.full(mask.shape, np.inf)
    dist[src] = 0.0
    todo = deque([src])
    steps = [(dx, dy) for dx in (-1, 0, 1) for dy in (-1, 0, 1) if dx or dy]
    # Dijkstra over unit and diagonal moves, re-queueing on improvement
    while todo:
        u = todo.popleft()
        for dx, dy in steps:
            v = (u[0] + dx, u[1] + dy)
            if 0 <= v[0] < mask.shape[0] and 0 <= v[1] < mask.shape[1] and not mask[v]:
                nd = dist[u] + math.hypot(dx, dy)
                if nd < dist[v] - 1e-12:
                    dist[v] = nd
                    todo.append(v)
    return dist[dst] * cell


@pytest.mark.parametrize("seed", range(5))
def test_rrt_maze_within_twice_grid_optimum(seed):
    occ = OccupancyMap(_maze(), cell=2.0)
    a, b = np.array([5.0, 5.0, 30.0]), np.array([95.0, 95.0, 30.0])
    path = rrt_path(occ, a, b, np.array([0, 0, 15.0]), np.array([100, 100, 45.0]), RrtParams(max_nodes=50000), np.random.default_rng(seed))
    for p, q in zip(path, path[1:]):
        assert occ.segment_free(p, q)
    assert _path_len(path) <= 2.0 * _bfs_length(occ.mask, 2.0, a, b)


def test_rrt_blocked_goal_raises():
    m = np.zeros((50, 50), bool)
    m[20:30, 20:30] = True
    occ = OccupancyMap(m, cell=2.0)
    with pytest.raises(PlanningError):
        rrt_path(occ, np.array([5.0, 5, 30]), np.array([50.0, 50, 30]), np.array([0, 0, 15.0]), np.array([100, 100, 45.0]),
                 RrtParams(max_nodes=500), np.random.default_rng(0))


# -- ACO ---------------------------------------------------------------------------


def test_aco_two_nodes():
    order, cost = aco_tour(np.array([[0, 3.0], [3.0, 0]]), AcoParams(), np.random.default_rng(0))
    assert order == [1] and cost == 3.0


@pytest.mark.parametrize("seed", range(3))
def test_aco_tour_near_brute_force(seed):
    rng = np.random.default_rng(seed)
    pts = rng.uniform(0, 100, (6, 2))
    d = np.linalg.norm(pts[:, None] - pts[None], axis=-1)
    best = min(sum(d[a, b] for a, b in zip((0,) + p, p)) for p in itertools.permutations(range(1, 6)))
    order, cost = aco_tour(d, AcoParams(), np.random.default_rng(seed))
    assert sorted(order) == [1, 2, 3, 4, 5]
    assert cost == pytest.approx(sum(d[a, b] for a, b in zip([0] + order, order)))
    assert cost <= 1.1 * best


def test_aco_grid_path_is_connected_and_free():
    free = ~_maze()[::2, ::2]
    src, dst = (1, 1), (23, 23)
    path = aco_grid_path(free, src, dst, AcoParams(), np.random.default_rng(0))
    assert tuple(path[0]) == src and tuple(path[-1]) == dst
    steps = np.abs(np.diff(np.asarray(path), axis=0)).sum(axis=1)
    assert np.all(steps == 1)
    assert all(free[tuple(c)] for c in path)
    assert len(path) - 1 <= 2.5 * grid_distances(free, src)[dst]


def test_aco_grid_errors():
    free = np.ones((5, 5), bool)
    free[2, :] = False
    with pytest.raises(PlanningError):
        aco_grid_path(free, (0, 0), (4, 4), AcoParams(), np.random.default_rng(0))
    with pytest.raises(PlanningError):
        aco_grid_path(free, (2, 2), (4, 4), AcoParams(), np.random.default_rng(0))
    assert [tuple(c) for c in aco_grid_path(free, (0, 0), (0, 0), AcoParams(), np.random.default_rng(0))] == [(0, 0)]


def test_baselines_fly_collision_free_on_small_scene():
    sc = Scene((300.0, 300.0), (Building((150.0, 150.0), 60.0, 60.0, 50.0),),
               (GroundUser((250.0, 250.0, 0.0)), GroundUser((250.0, 50.0, 0.0))))
    occ = OccupancyMap.from_scene(sc, 2.0)
    for res in (plan_rrt(occ, sc, BudgetLink(), MISSION, 0), plan_aco(occ, sc, BudgetLink(), MISSION, 0)):
        assert res.completed and res.collisions == 0


# -- RL ----------------------------------------------------------------------------


def _optimal_steps(scene, link, mission, limit=60):
    """Breadth-first search over the deterministic lattice dynamics."""
    s0 = initial_state(scene, mission)
    frontier = [s0]
    seen = {(tuple(s0.uav_position), tuple(s0.remaining_bits))}
    for depth in range(1, limit + 1):
        nxt = []
        for s in frontier:
            for a in range(len(ACTIONS)):
                s2, _ = env_step(s, a, scene, link, mission)
                if s2.collided:
                    continue
                if s2.done:
                    return depth
                key = (tuple(np.round(s2.uav_position, 6)), tuple(np.round(s2.remaining_bits)))
                if key not in seen:
                    seen.add(key)
                    nxt.append(s2)
        frontier = nxt
    raise AssertionError("no solution within limit")


def test_rl_single_user_near_optimal():
    link = BudgetLink()
    opt = _optimal_steps(OPEN, link, MISSION) * MISSION.dt
    pol, curve = train_rl(OPEN, link, MISSION, RlConfig(episodes=300), seed=0)
    res = evaluate(pol, OPEN, link, MISSION)
    assert res.completed and res.collisions == 0
    assert res.completion_time <= 1.5 * opt
    assert len(curve) == 300


def test_rl_is_deterministic():
    link = BudgetLink()
    cfg = RlConfig(episodes=40)
    a, _ = train_rl(OPEN, link, MISSION, cfg, seed=3)
    b, _ = train_rl(OPEN, BudgetLink(), MISSION, cfg, seed=3)
    assert np.array_equal(a.q, b.q)


def test_divergence_detected():
    with pytest.raises(DivergenceError):
        train_rl(OPEN, BudgetLink(), MISSION, RlConfig(episodes=5, value_bound=1e-3), seed=0)


def test_hover_policy_evaluation_and_replay():
    cfg = RlConfig()
    q = np.zeros((2 * cfg.radius_cells + 1,) * 2 + (cfg.layers, len(ACTIONS)))
    q[..., HOVER] = 1.0
    pol = Policy(q, cfg, MISSION, OPEN.bounds)
    res = evaluate(pol, OPEN, BudgetLink(), MISSION)
    assert np.allclose(res.trajectory[:, 1:4], MISSION.start)
    assert res.completed == (res.completion_time < MISSION.time_limit)
    assert first_time_above(res, 50.0) == math.inf
    pol2, _ = train_rl(OPEN, BudgetLink(), MISSION, RlConfig(episodes=100), seed=1)
    res2 = evaluate(pol2, OPEN, BudgetLink(), MISSION)
    again = replay(res2, OPEN, BudgetLink(), MISSION)
    assert np.array_equal(again.trajectory, res2.trajectory)
    assert again.completion_time == res2.completion_time
