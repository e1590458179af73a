"""Trajectory control: mission environment, tabular RL agent, RRT and ACO baselines."""

from .aco import AcoParams, aco_grid_path, aco_tour, grid_distances, plan_aco
from .env import (
    ACTION_NAMES,
    ACTIONS,
    HOVER,
    BudgetLink,
    ConstantRateLink,
    LinkModel,
    MissionConfig,
    MissionState,
    PlannerResult,
    env_step,
    fly_legs,
    fly_positions,
    initial_state,
    resample_path,
    scheduled_user,
    serve,
    trajectory_csv,
)
from .evaluate import evaluate, first_time_above, replay
from .maps import OccupancyMap
from .rl import DivergenceError, Policy, RlConfig, TrainingRecord, discretize, train_rl, training_curve_csv
from .rrt import PlanningError, RrtParams, nearest_neighbor_order, plan_rrt, rrt_path, shortcut_path

__all__ = [
    "ACTIONS",
    "ACTION_NAMES",
    "AcoParams",
    "BudgetLink",
    "ConstantRateLink",
    "DivergenceError",
    "HOVER",
    "LinkModel",
    "MissionConfig",
    "MissionState",
    "OccupancyMap",
    "PlannerResult",
    "PlanningError",
    "Policy",
    "RlConfig",
    "RrtParams",
    "TrainingRecord",
    "aco_grid_path",
    "aco_tour",
    "discretize",
    "env_step",
    "evaluate",
    "first_time_above",
    "fly_legs",
    "fly_positions",
    "grid_distances",
    "initial_state",
    "nearest_neighbor_order",
    "plan_aco",
    "plan_rrt",
    "replay",
    "resample_path",
    "rrt_path",
    "scheduled_user",
    "serve",
    "shortcut_path",
    "train_rl",
    "training_curve_csv",
    "trajectory_csv",
]
